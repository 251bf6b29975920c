#pragma once

#include <span>
#include <vector>

#include "fadi/matrix.hpp"
#include "fadi/random.hpp"

namespace fadi {

/// Fully connected layer y = W x + b. Inputs are batches with one sample per column.
struct LinearLayer {
    Matrix weight;  // out x in
    Matrix bias;    // out x 1
    bool frozen = false;

    std::size_t in_dim() const { return weight.cols(); }
    std::size_t out_dim() const { return weight.rows(); }

    /// Kaiming-style normal weights (std sqrt(2/in)), zero bias.
    static LinearLayer random(std::size_t out, std::size_t in, Rng& rng);
};

struct LinearGrads {
    Matrix weight;
    Matrix bias;
    Matrix input;
};

Matrix linear_forward(const LinearLayer& layer, const Matrix& x);
LinearGrads linear_backward(const LinearLayer& layer, const Matrix& x, const Matrix& dy);

Matrix relu(const Matrix& x);
/// Passes dy where x > 0; the subgradient at 0 is 0.
Matrix relu_backward(const Matrix& x, const Matrix& dy);

/// Bias-free classifier whose logits are tau-scaled cosines between the input
/// and each weight row. Norms carry a 1e-12 stabilizer so zero inputs are legal.
struct CosineClassifier {
    Matrix weight;  // classes x in
    double tau = 20.0;

    std::size_t num_classes() const { return weight.rows(); }
    std::size_t in_dim() const { return weight.cols(); }

    /// Throws DataError if tau <= 0 or some row has zero norm.
    void validate() const;

    static CosineClassifier random(std::size_t classes, std::size_t in, double tau, Rng& rng);
};

struct CosineGrads {
    Matrix weight;
    Matrix input;
};

Matrix cosine_logits(const CosineClassifier& c, const Matrix& x);
CosineGrads cosine_backward(const CosineClassifier& c, const Matrix& x, const Matrix& dlogits);

/// Max-shifted softmax.
std::vector<double> softmax(std::span<const double> logits);
Matrix softmax_columns(const Matrix& logits);

/// Maps dL/ds to dL/dlogits through the softmax Jacobian.
std::vector<double> softmax_backward(std::span<const double> probs, std::span<const double> dprobs);

/// Disentangled head: the base classifier reads frozen FC2 features, the novel
/// classifier (novel classes plus background) reads frozen FC2' features, and
/// both logit vectors are normalized by one softmax.
struct DualHead {
    LinearLayer g_base;   // FC2, pretrained
    LinearLayer g_novel;  // FC2', from the association step
    CosineClassifier cls_base;   // |C^B| rows
    CosineClassifier cls_novel;  // |C^N| + 1 rows, background last

    std::size_t num_base() const { return cls_base.num_classes(); }
    std::size_t num_outputs() const { return cls_base.num_classes() + cls_novel.num_classes(); }

    void validate() const;
};

/// Activations kept for the backward pass.
struct DualActivations {
    Matrix q;
    Matrix h_base, z_base;
    Matrix h_novel, z_novel;
    Matrix logits;  // (|C^B| + |C^N| + 1) x n
    Matrix probs;
};

struct DualGrads {
    Matrix cls_base;
    Matrix cls_novel;
};

DualActivations dual_forward(const DualHead& head, const Matrix& q);

/// Gradients for the two classifiers only; the g layers are frozen.
DualGrads dual_backward(const DualHead& head, const DualActivations& act, const Matrix& dlogits);

}  // namespace fadi
