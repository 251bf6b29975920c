#include "fadi/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fadi/error.hpp"
#include "fadi/kernels.hpp"

namespace fadi {

LossGrad cross_entropy(std::span<const double> probs, std::size_t label) {
    if (label >= probs.size()) {
        throw DataError("cross entropy: label " + std::to_string(label) + " out of range for " +
                        std::to_string(probs.size()) + " classes");
    }
    LossGrad out{-std::log(probs[label]), std::vector<double>(probs.begin(), probs.end())};
    out.grad[label] -= 1.0;
    return out;
}

LossGrad margin_loss_sample(std::span<const double> s, std::size_t label, double epsilon) {
    if (label >= s.size()) {
        throw DataError("margin loss: label " + std::to_string(label) + " out of range");
    }
    LossGrad out{0.0, std::vector<double>(s.size(), 0.0)};
    for (std::size_t j = 0; j < s.size(); ++j) {
        if (j == label) continue;
        const double gap = s[label] - s[j];
        if (gap > 0.0) {
            out.loss -= std::log(gap + epsilon);
            const double d = 1.0 / (gap + epsilon);
            out.grad[label] -= d;
            out.grad[j] += d;
        } else {
            out.loss -= std::log(epsilon);
        }
    }
    return out;
}

void MarginConfig::validate() const {
    for (double w : {alpha, beta, gamma}) {
        if (!std::isfinite(w) || w < 0.0) throw DataError("margin config: weights must be finite and >= 0");
    }
    if (!(epsilon > 0.0)) throw DataError("margin config: epsilon must be positive");
}

nlohmann::json MarginConfig::to_json() const {
    return {{"alpha", alpha}, {"beta", beta}, {"gamma", gamma}, {"epsilon", epsilon}};
}

MarginConfig MarginConfig::from_json(const nlohmann::json& j) {
    MarginConfig cfg;
    try {
        cfg.alpha = j.at("alpha").get<double>();
        cfg.beta = j.at("beta").get<double>();
        cfg.gamma = j.at("gamma").get<double>();
        cfg.epsilon = j.value("epsilon", 1e-7);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("margin config JSON: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

MarginConfig margin_schedule(int shots) {
    if (shots < 1) throw DataError("margin schedule: shots must be >= 1");
    MarginConfig cfg;
    cfg.beta = 1.0 / shots;
    cfg.alpha = cfg.beta / 3.0;
    cfg.gamma = 0.001;
    return cfg;
}

BatchLoss set_specialized_margin(const Matrix& probs, const std::vector<std::string>& labels,
                                 const LabelPartition& partition, const MarginConfig& cfg) {
    if (labels.empty()) throw DataError("set-specialized margin: empty batch");
    if (labels.size() != probs.cols()) throw DataError("set-specialized margin: label count mismatch");
    require_shape(probs, partition.num_classes(), labels.size(), "set-specialized margin scores");
    cfg.validate();

    BatchLoss out{0.0, Matrix(probs.rows(), probs.cols())};
    for (std::size_t s = 0; s < labels.size(); ++s) {
        double w = 0.0;
        switch (partition.set_of(labels[s])) {
            case ClassSet::kBase: w = cfg.alpha; break;
            case ClassSet::kNovel: w = cfg.beta; break;
            case ClassSet::kBackground: w = cfg.gamma; break;
        }
        if (w == 0.0) continue;
        const auto sample = margin_loss_sample(probs.col(s), partition.index_of(labels[s]), cfg.epsilon);
        out.loss += w * sample.loss;
        for (std::size_t r = 0; r < probs.rows(); ++r) out.grad(r, s) = w * sample.grad[r];
    }
    return out;
}

namespace {

void check_labels(const CosineClassifier& c, const Matrix& x, std::span<const std::size_t> labels) {
    if (labels.size() != x.cols()) throw DataError("margin logits: one label per sample required");
    for (auto y : labels) {
        if (y >= c.num_classes()) throw DataError("margin logits: label out of range");
    }
}

// Raw cosine (no tau) of the target class for every sample.
std::vector<double> target_cosines(const Matrix& logits, double tau,
                                   std::span<const std::size_t> labels) {
    std::vector<double> out(labels.size());
    for (std::size_t s = 0; s < labels.size(); ++s) out[s] = logits(labels[s], s) / tau;
    return out;
}

// theta clamped to [0, pi - m] before adding the margin.
double arc_theta(double cos_value, double m) {
    const double theta = std::acos(std::clamp(cos_value, -1.0, 1.0));
    return std::min(theta, std::numbers::pi - m);
}

}  // namespace

Matrix cosface_logits(const CosineClassifier& c, const Matrix& x, std::span<const std::size_t> labels,
                      double m, const MarginScope& scope) {
    if (m < 0.0) throw DataError("cosface: margin must be >= 0");
    Matrix p = cosine_logits(c, x);
    check_labels(c, x, labels);
    for (std::size_t s = 0; s < labels.size(); ++s) {
        if (scope.applies(labels[s])) p(labels[s], s) -= c.tau * m;
    }
    return p;
}

Matrix arcface_logits(const CosineClassifier& c, const Matrix& x, std::span<const std::size_t> labels,
                      double m, const MarginScope& scope) {
    if (m < 0.0 || m >= std::numbers::pi) throw DataError("arcface: margin must lie in [0, pi)");
    Matrix p = cosine_logits(c, x);
    check_labels(c, x, labels);
    if (m == 0.0) return p;
    const auto cosines = target_cosines(p, c.tau, labels);
    for (std::size_t s = 0; s < labels.size(); ++s) {
        if (scope.applies(labels[s])) p(labels[s], s) = c.tau * std::cos(arc_theta(cosines[s], m) + m);
    }
    return p;
}

CosineGrads cosface_backward(const CosineClassifier& c, const Matrix& x, const Matrix& dlogits) {
    return cosine_backward(c, x, dlogits);
}

CosineGrads arcface_backward(const CosineClassifier& c, const Matrix& x,
                             std::span<const std::size_t> labels, double m,
                             const MarginScope& scope, const Matrix& dlogits) {
    check_labels(c, x, labels);
    if (m == 0.0) return cosine_backward(c, x, dlogits);
    const Matrix p = cosine_logits(c, x);
    const auto cosines = target_cosines(p, c.tau, labels);
    // d/dcos of cos(theta + m) is sin(theta + m) / sin(theta) inside the clamp, 0 outside.
    Matrix scaled = dlogits;
    for (std::size_t s = 0; s < labels.size(); ++s) {
        if (!scope.applies(labels[s])) continue;
        const double theta = std::acos(std::clamp(cosines[s], -1.0, 1.0));
        const double sin_theta = std::sin(theta);
        double factor = 0.0;
        if (theta < std::numbers::pi - m && sin_theta > 1e-12) factor = std::sin(theta + m) / sin_theta;
        scaled(labels[s], s) *= factor;
    }
    return cosine_backward(c, x, scaled);
}

LossGrad smooth_l1(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size()) {
        throw DataError("smooth L1: prediction has " + std::to_string(pred.size()) +
                        " values, target has " + std::to_string(target.size()));
    }
    LossGrad out{0.0, std::vector<double>(pred.size())};
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        if (std::abs(d) < 1.0) {
            out.loss += 0.5 * d * d;
            out.grad[i] = d;
        } else {
            out.loss += std::abs(d) - 0.5;
            out.grad[i] = d > 0.0 ? 1.0 : -1.0;
        }
    }
    return out;
}

double total_finetune_loss(double cls, double margin, double reg) { return cls + margin + 2.0 * reg; }

}  // namespace fadi
