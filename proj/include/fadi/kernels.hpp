#pragma once

#include "fadi/matrix.hpp"

// Batched dense kernels. Samples are matrix columns. The default namespace
// holds the OpenMP versions; `reference` holds plain serial loops with the
// same per-output accumulation order, so both produce bit-identical results.

namespace fadi::kernels {

inline constexpr double kNormEps = 1e-12;

/// y = W x + b for every column of x. W is out x in, b is out x 1.
void affine(const Matrix& w, const Matrix& b, const Matrix& x, Matrix& y);

/// dW = dY x^T and db = row sums of dY (overwritten, not accumulated).
void affine_weight_grad(const Matrix& dy, const Matrix& x, Matrix& dw, Matrix& db);

/// dX = W^T dY.
void affine_input_grad(const Matrix& w, const Matrix& dy, Matrix& dx);

/// P(c, s) = tau * <w_c, x_s> / ((|x_s| + eps) (|w_c| + eps)).
void cosine_logits(const Matrix& w, double tau, const Matrix& x, Matrix& p);

/// Gradients of sum(dP .* P) with respect to W and x.
void cosine_backward(const Matrix& w, double tau, const Matrix& x, const Matrix& dp, Matrix& dw,
                     Matrix& dx);

namespace reference {

void affine(const Matrix& w, const Matrix& b, const Matrix& x, Matrix& y);
void affine_weight_grad(const Matrix& dy, const Matrix& x, Matrix& dw, Matrix& db);
void affine_input_grad(const Matrix& w, const Matrix& dy, Matrix& dx);
void cosine_logits(const Matrix& w, double tau, const Matrix& x, Matrix& p);
void cosine_backward(const Matrix& w, double tau, const Matrix& x, const Matrix& dp, Matrix& dw,
                     Matrix& dx);

}  // namespace reference

}  // namespace fadi::kernels
