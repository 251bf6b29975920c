#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fadi/dataset.hpp"
#include "fadi/nethead.hpp"

namespace fadi {

struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad;
};

/// -ln(probs[label]). The gradient is with respect to the logits that
/// produced `probs` through a softmax: probs - onehot(label).
LossGrad cross_entropy(std::span<const double> probs, std::size_t label);

/// Sum over j != y of -ln((s_y - s_j)^+ + epsilon), gradient with respect to s.
/// Pairs with s_y <= s_j sit on the saturated side and contribute no gradient.
LossGrad margin_loss_sample(std::span<const double> s, std::size_t label, double epsilon = 1e-7);

/// Per-set weights of the margin loss: alpha for base samples, beta for novel
/// samples, gamma for background samples.
struct MarginConfig {
    double alpha = 1.0 / 3.0;
    double beta = 1.0;
    double gamma = 0.001;
    double epsilon = 1e-7;

    void validate() const;
    nlohmann::json to_json() const;
    static MarginConfig from_json(const nlohmann::json& j);
};

/// beta = 1/K, alpha = beta/3, gamma = 0.001.
MarginConfig margin_schedule(int shots);

struct BatchLoss {
    double loss = 0.0;
    Matrix grad;  // same shape as the input batch
};

/// Weighted sum (not mean) of per-sample margin losses. Columns of `probs` are
/// distributions over `partition.all_labels()`.
BatchLoss set_specialized_margin(const Matrix& probs, const std::vector<std::string>& labels,
                                 const LabelPartition& partition, const MarginConfig& cfg);

/// Which samples receive an additive/angular margin at their target logit.
struct MarginScope {
    bool novel_only = false;
    std::size_t novel_begin = 0;  // label range counted as novel when novel_only is set
    std::size_t novel_end = 0;

    bool applies(std::size_t label) const {
        return !novel_only || (label >= novel_begin && label < novel_end);
    }
};

/// Cosine logits with tau * (cos - m) at each sample's target class.
Matrix cosface_logits(const CosineClassifier& c, const Matrix& x, std::span<const std::size_t> labels,
                      double m, const MarginScope& scope = {});

/// Cosine logits with tau * cos(theta + m) at the target; theta is clamped to
/// [0, pi - m] first so the target logit stays monotone in theta.
Matrix arcface_logits(const CosineClassifier& c, const Matrix& x, std::span<const std::size_t> labels,
                      double m, const MarginScope& scope = {});

/// The additive margin is a constant shift, so this is the plain cosine backward.
CosineGrads cosface_backward(const CosineClassifier& c, const Matrix& x, const Matrix& dlogits);
CosineGrads arcface_backward(const CosineClassifier& c, const Matrix& x,
                             std::span<const std::size_t> labels, double m,
                             const MarginScope& scope, const Matrix& dlogits);

/// Sum of 0.5 d^2 for |d| < 1 and |d| - 0.5 otherwise, d = pred - target.
LossGrad smooth_l1(std::span<const double> pred, std::span<const double> target);

/// cls + margin + 2 reg.
double total_finetune_loss(double cls, double margin, double reg);

}  // namespace fadi
