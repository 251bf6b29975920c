#include "fadi/kernels.hpp"

#include <cmath>
#include <vector>

#include "fadi/error.hpp"

namespace fadi::kernels {
namespace {

// Below this many multiply-adds the thread fork costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 14;

void check_affine(const Matrix& w, const Matrix& b, const Matrix& x) {
    if (w.cols() != x.rows()) {
        throw DataError("affine: weight " + shape_string(w) + " cannot multiply input " +
                        shape_string(x));
    }
    require_shape(b, w.rows(), 1, "affine bias");
}

void check_cosine(const Matrix& w, const Matrix& x) {
    if (w.cols() != x.rows()) {
        throw DataError("cosine classifier: weight " + shape_string(w) + " does not match input " +
                        shape_string(x));
    }
}

std::vector<double> column_norms(const Matrix& x) {
    std::vector<double> out(x.cols(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t s = 0; s < x.cols(); ++s) out[s] += x(i, s) * x(i, s);
    }
    for (double& v : out) v = std::sqrt(v);
    return out;
}

std::vector<double> row_norms(const Matrix& w) {
    std::vector<double> out(w.rows());
    for (std::size_t c = 0; c < w.rows(); ++c) out[c] = norm(w.row(c));
    return out;
}

// Per-output bodies shared by both implementations.

inline void affine_row(const Matrix& w, const Matrix& b, const Matrix& x, Matrix& y, std::size_t o) {
    for (std::size_t s = 0; s < x.cols(); ++s) {
        double acc = b(o, 0);
        for (std::size_t i = 0; i < w.cols(); ++i) acc += w(o, i) * x(i, s);
        y(o, s) = acc;
    }
}

inline void weight_grad_row(const Matrix& dy, const Matrix& x, Matrix& dw, Matrix& db,
                            std::size_t o) {
    double bias = 0.0;
    for (std::size_t s = 0; s < dy.cols(); ++s) bias += dy(o, s);
    db(o, 0) = bias;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t s = 0; s < dy.cols(); ++s) acc += dy(o, s) * x(i, s);
        dw(o, i) = acc;
    }
}

inline void input_grad_row(const Matrix& w, const Matrix& dy, Matrix& dx, std::size_t i) {
    for (std::size_t s = 0; s < dy.cols(); ++s) {
        double acc = 0.0;
        for (std::size_t o = 0; o < w.rows(); ++o) acc += w(o, i) * dy(o, s);
        dx(i, s) = acc;
    }
}

inline void cosine_row(const Matrix& w, double tau, const Matrix& x, const std::vector<double>& xn,
                       const std::vector<double>& wn, Matrix& p, std::size_t c) {
    for (std::size_t s = 0; s < x.cols(); ++s) {
        double d = 0.0;
        for (std::size_t i = 0; i < w.cols(); ++i) d += w(c, i) * x(i, s);
        p(c, s) = tau * d / ((xn[s] + kNormEps) * (wn[c] + kNormEps));
    }
}

inline double cosine_dot(const Matrix& w, const Matrix& x, std::size_t c, std::size_t s) {
    double d = 0.0;
    for (std::size_t i = 0; i < w.cols(); ++i) d += w(c, i) * x(i, s);
    return d;
}

// dW row c: sum over samples s of dp(c,s) * tau * [x_s/(ab) - dot/(a b^2) * w_c/|w_c|].
inline void cosine_weight_grad_row(const Matrix& w, double tau, const Matrix& x,
                                   const std::vector<double>& xn, const std::vector<double>& wn,
                                   const Matrix& dp, Matrix& dw, std::size_t c) {
    const double b = wn[c] + kNormEps;
    for (std::size_t i = 0; i < w.cols(); ++i) dw(c, i) = 0.0;
    for (std::size_t s = 0; s < x.cols(); ++s) {
        const double g = dp(c, s);
        if (g == 0.0) continue;
        const double a = xn[s] + kNormEps;
        const double d = cosine_dot(w, x, c, s);
        const double direct = tau * g / (a * b);
        const double radial = wn[c] > 0.0 ? tau * g * d / (a * b * b * wn[c]) : 0.0;
        for (std::size_t i = 0; i < w.cols(); ++i) dw(c, i) += direct * x(i, s) - radial * w(c, i);
    }
}

inline void cosine_input_grad_col(const Matrix& w, double tau, const Matrix& x,
                                  const std::vector<double>& xn, const std::vector<double>& wn,
                                  const Matrix& dp, Matrix& dx, std::size_t s) {
    const double a = xn[s] + kNormEps;
    for (std::size_t i = 0; i < x.rows(); ++i) dx(i, s) = 0.0;
    for (std::size_t c = 0; c < w.rows(); ++c) {
        const double g = dp(c, s);
        if (g == 0.0) continue;
        const double b = wn[c] + kNormEps;
        const double d = cosine_dot(w, x, c, s);
        const double direct = tau * g / (a * b);
        const double radial = xn[s] > 0.0 ? tau * g * d / (a * a * b * xn[s]) : 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) dx(i, s) += direct * w(c, i) - radial * x(i, s);
    }
}

}  // namespace

void affine(const Matrix& w, const Matrix& b, const Matrix& x, Matrix& y) {
    check_affine(w, b, x);
    y = Matrix(w.rows(), x.cols());
    const auto rows = static_cast<std::ptrdiff_t>(w.rows());
    const bool par = w.size() * x.cols() >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t o = 0; o < rows; ++o) affine_row(w, b, x, y, static_cast<std::size_t>(o));
}

void affine_weight_grad(const Matrix& dy, const Matrix& x, Matrix& dw, Matrix& db) {
    if (dy.cols() != x.cols()) throw DataError("affine backward: batch size mismatch");
    dw = Matrix(dy.rows(), x.rows());
    db = Matrix(dy.rows(), 1);
    const auto rows = static_cast<std::ptrdiff_t>(dy.rows());
    const bool par = dw.size() * x.cols() >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t o = 0; o < rows; ++o) {
        weight_grad_row(dy, x, dw, db, static_cast<std::size_t>(o));
    }
}

void affine_input_grad(const Matrix& w, const Matrix& dy, Matrix& dx) {
    if (w.rows() != dy.rows()) throw DataError("affine backward: output size mismatch");
    dx = Matrix(w.cols(), dy.cols());
    const auto rows = static_cast<std::ptrdiff_t>(w.cols());
    const bool par = w.size() * dy.cols() >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t i = 0; i < rows; ++i) input_grad_row(w, dy, dx, static_cast<std::size_t>(i));
}

void cosine_logits(const Matrix& w, double tau, const Matrix& x, Matrix& p) {
    check_cosine(w, x);
    const auto xn = column_norms(x);
    const auto wn = row_norms(w);
    p = Matrix(w.rows(), x.cols());
    const auto rows = static_cast<std::ptrdiff_t>(w.rows());
    const bool par = w.size() * x.cols() >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t c = 0; c < rows; ++c) {
        cosine_row(w, tau, x, xn, wn, p, static_cast<std::size_t>(c));
    }
}

void cosine_backward(const Matrix& w, double tau, const Matrix& x, const Matrix& dp, Matrix& dw,
                     Matrix& dx) {
    check_cosine(w, x);
    require_shape(dp, w.rows(), x.cols(), "cosine backward upstream gradient");
    const auto xn = column_norms(x);
    const auto wn = row_norms(w);
    dw = Matrix(w.rows(), w.cols());
    dx = Matrix(x.rows(), x.cols());
    const bool par = w.size() * x.cols() >= kParallelWork;
    const auto classes = static_cast<std::ptrdiff_t>(w.rows());
    const auto samples = static_cast<std::ptrdiff_t>(x.cols());
#pragma omp parallel if (par)
    {
#pragma omp for schedule(static) nowait
        for (std::ptrdiff_t c = 0; c < classes; ++c) {
            cosine_weight_grad_row(w, tau, x, xn, wn, dp, dw, static_cast<std::size_t>(c));
        }
#pragma omp for schedule(static)
        for (std::ptrdiff_t s = 0; s < samples; ++s) {
            cosine_input_grad_col(w, tau, x, xn, wn, dp, dx, static_cast<std::size_t>(s));
        }
    }
}

namespace reference {

void affine(const Matrix& w, const Matrix& b, const Matrix& x, Matrix& y) {
    check_affine(w, b, x);
    y = Matrix(w.rows(), x.cols());
    for (std::size_t o = 0; o < w.rows(); ++o) affine_row(w, b, x, y, o);
}

void affine_weight_grad(const Matrix& dy, const Matrix& x, Matrix& dw, Matrix& db) {
    if (dy.cols() != x.cols()) throw DataError("affine backward: batch size mismatch");
    dw = Matrix(dy.rows(), x.rows());
    db = Matrix(dy.rows(), 1);
    for (std::size_t o = 0; o < dy.rows(); ++o) weight_grad_row(dy, x, dw, db, o);
}

void affine_input_grad(const Matrix& w, const Matrix& dy, Matrix& dx) {
    if (w.rows() != dy.rows()) throw DataError("affine backward: output size mismatch");
    dx = Matrix(w.cols(), dy.cols());
    for (std::size_t i = 0; i < w.cols(); ++i) input_grad_row(w, dy, dx, i);
}

void cosine_logits(const Matrix& w, double tau, const Matrix& x, Matrix& p) {
    check_cosine(w, x);
    const auto xn = column_norms(x);
    const auto wn = row_norms(w);
    p = Matrix(w.rows(), x.cols());
    for (std::size_t c = 0; c < w.rows(); ++c) cosine_row(w, tau, x, xn, wn, p, c);
}

void cosine_backward(const Matrix& w, double tau, const Matrix& x, const Matrix& dp, Matrix& dw,
                     Matrix& dx) {
    check_cosine(w, x);
    require_shape(dp, w.rows(), x.cols(), "cosine backward upstream gradient");
    const auto xn = column_norms(x);
    const auto wn = row_norms(w);
    dw = Matrix(w.rows(), w.cols());
    dx = Matrix(x.rows(), x.cols());
    for (std::size_t c = 0; c < w.rows(); ++c) cosine_weight_grad_row(w, tau, x, xn, wn, dp, dw, c);
    for (std::size_t s = 0; s < x.cols(); ++s) cosine_input_grad_col(w, tau, x, xn, wn, dp, dx, s);
}

}  // namespace reference

}  // namespace fadi::kernels
