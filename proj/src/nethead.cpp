#include "fadi/nethead.hpp"

#include <algorithm>
#include <cmath>

#include "fadi/error.hpp"
#include "fadi/kernels.hpp"

namespace fadi {

LinearLayer LinearLayer::random(std::size_t out, std::size_t in, Rng& rng) {
    LinearLayer layer{Matrix(out, in), Matrix(out, 1), false};
    const double scale = std::sqrt(2.0 / static_cast<double>(in));
    for (double& w : layer.weight.flat()) w = scale * standard_normal(rng);
    return layer;
}

Matrix linear_forward(const LinearLayer& layer, const Matrix& x) {
    Matrix y;
    kernels::affine(layer.weight, layer.bias, x, y);
    return y;
}

LinearGrads linear_backward(const LinearLayer& layer, const Matrix& x, const Matrix& dy) {
    require_shape(dy, layer.out_dim(), x.cols(), "linear backward upstream gradient");
    LinearGrads g;
    kernels::affine_weight_grad(dy, x, g.weight, g.bias);
    kernels::affine_input_grad(layer.weight, dy, g.input);
    return g;
}

Matrix relu(const Matrix& x) {
    Matrix y = x;
    for (double& v : y.flat()) v = std::max(v, 0.0);
    return y;
}

Matrix relu_backward(const Matrix& x, const Matrix& dy) {
    if (!x.same_shape(dy)) throw DataError("relu backward: shape mismatch");
    Matrix dx(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) dx.flat()[i] = x.flat()[i] > 0.0 ? dy.flat()[i] : 0.0;
    return dx;
}

void CosineClassifier::validate() const {
    if (!(tau > 0.0)) throw DataError("cosine classifier: tau must be positive");
    for (std::size_t c = 0; c < weight.rows(); ++c) {
        if (norm(weight.row(c)) == 0.0) {
            throw DataError("cosine classifier: row " + std::to_string(c) + " has zero norm");
        }
    }
}

CosineClassifier CosineClassifier::random(std::size_t classes, std::size_t in, double tau,
                                          Rng& rng) {
    CosineClassifier c{Matrix(classes, in), tau};
    for (double& w : c.weight.flat()) w = standard_normal(rng);
    return c;
}

Matrix cosine_logits(const CosineClassifier& c, const Matrix& x) {
    Matrix p;
    kernels::cosine_logits(c.weight, c.tau, x, p);
    return p;
}

CosineGrads cosine_backward(const CosineClassifier& c, const Matrix& x, const Matrix& dlogits) {
    CosineGrads g;
    kernels::cosine_backward(c.weight, c.tau, x, dlogits, g.weight, g.input);
    return g;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    if (logits.empty()) return out;
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

Matrix softmax_columns(const Matrix& logits) {
    Matrix probs(logits.rows(), logits.cols());
    for (std::size_t s = 0; s < logits.cols(); ++s) probs.set_col(s, softmax(logits.col(s)));
    return probs;
}

std::vector<double> softmax_backward(std::span<const double> probs, std::span<const double> dprobs) {
    double inner = 0.0;
    for (std::size_t j = 0; j < probs.size(); ++j) inner += probs[j] * dprobs[j];
    std::vector<double> out(probs.size());
    for (std::size_t k = 0; k < probs.size(); ++k) out[k] = probs[k] * (dprobs[k] - inner);
    return out;
}

void DualHead::validate() const {
    if (g_base.in_dim() != g_novel.in_dim() || g_base.out_dim() != g_novel.out_dim()) {
        throw DataError("dual head: FC2 is " + shape_string(g_base.weight) + " but FC2' is " +
                        shape_string(g_novel.weight));
    }
    if (cls_base.in_dim() != g_base.out_dim() || cls_novel.in_dim() != g_novel.out_dim()) {
        throw DataError("dual head: classifier input width does not match the g layers");
    }
    if (cls_novel.num_classes() < 1) throw DataError("dual head: novel classifier needs a background row");
}

DualActivations dual_forward(const DualHead& head, const Matrix& q) {
    head.validate();
    if (q.rows() != head.g_base.in_dim()) {
        throw DataError("dual head: input has " + std::to_string(q.rows()) + " rows, expected " +
                        std::to_string(head.g_base.in_dim()));
    }
    DualActivations a;
    a.q = q;
    a.h_base = linear_forward(head.g_base, q);
    a.z_base = relu(a.h_base);
    a.h_novel = linear_forward(head.g_novel, q);
    a.z_novel = relu(a.h_novel);
    const Matrix pb = cosine_logits(head.cls_base, a.z_base);
    const Matrix pn = cosine_logits(head.cls_novel, a.z_novel);
    a.logits = Matrix(pb.rows() + pn.rows(), q.cols());
    for (std::size_t s = 0; s < q.cols(); ++s) {
        for (std::size_t r = 0; r < pb.rows(); ++r) a.logits(r, s) = pb(r, s);
        for (std::size_t r = 0; r < pn.rows(); ++r) a.logits(pb.rows() + r, s) = pn(r, s);
    }
    a.probs = softmax_columns(a.logits);
    return a;
}

DualGrads dual_backward(const DualHead& head, const DualActivations& act, const Matrix& dlogits) {
    require_shape(dlogits, head.num_outputs(), act.q.cols(), "dual head upstream gradient");
    const std::size_t nb = head.num_base();
    const std::size_t nn = head.cls_novel.num_classes();
    Matrix db(nb, act.q.cols());
    Matrix dn(nn, act.q.cols());
    for (std::size_t s = 0; s < act.q.cols(); ++s) {
        for (std::size_t r = 0; r < nb; ++r) db(r, s) = dlogits(r, s);
        for (std::size_t r = 0; r < nn; ++r) dn(r, s) = dlogits(nb + r, s);
    }
    return {cosine_backward(head.cls_base, act.z_base, db).weight,
            cosine_backward(head.cls_novel, act.z_novel, dn).weight};
}

}  // namespace fadi
