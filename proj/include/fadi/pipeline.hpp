#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fadi/association.hpp"
#include "fadi/checkpoint.hpp"
#include "fadi/episodes.hpp"
#include "fadi/losses.hpp"
#include "fadi/nethead.hpp"

namespace fadi {

struct SgdConfig {
    double lr = 0.001;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    int iterations = 1000;
    int batch_size = 32;
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static SgdConfig from_json(const nlohmann::json& j);
};

/// One velocity buffer per parameter, created lazily on the first step.
struct SgdState {
    std::vector<Matrix> velocity;
};

/// v <- momentum v + g + wd p; p <- p - lr v.
void sgd_step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads, SgdState& state,
              const SgdConfig& cfg);

/// g layer followed by relu and a cosine classifier. `outputs[r]` is the
/// joint-label index (see LabelPartition::all_labels) of classifier row r.
struct SingleHead {
    LinearLayer g;
    CosineClassifier cls;
    std::vector<std::size_t> outputs;
};

/// base_train output: FC2 plus a (|C^B| + 1)-way classifier, background last.
using PretrainedHead = SingleHead;

struct Discriminated {
    DualHead head;
    std::optional<LinearLayer> regressor;  // on the base-branch features
    MarginConfig margin;
};

template <typename T>
struct StageResult {
    T params;
    std::vector<double> loss_trace;  // one entry per iteration, loss before the update
    double wall_seconds = 0.0;
    std::string stage;
};

/// Initialisation switches for ablations; defaults are warm starts.
struct InitOptions {
    bool random_fc2_prime = false;   // association: FC2' random instead of a copy of FC2
    bool random_novel_rows = false;  // discrimination: novel rows random instead of associated base rows
    bool reinit_base_rows = false;   // discrimination: base classifier re-initialised

    nlohmann::json to_json() const;
    static InitOptions from_json(const nlohmann::json& j);
};

StageResult<PretrainedHead> base_train(const Episode& episode, std::size_t d_hidden, double tau,
                                       const SgdConfig& cfg);

/// Balanced K-shot set with associated base classes dropped and novel samples
/// carrying their associated base label; background kept.
LabeledSet association_training_set(const Episode& episode, const AssociationMap& map);

StageResult<LinearLayer> association_step(const PretrainedHead& pretrained, const Episode& episode,
                                          const AssociationMap& map, const SgdConfig& cfg,
                                          const InitOptions& init = {});

StageResult<Discriminated> discrimination_step(const PretrainedHead& pretrained, const LinearLayer& w_asso,
                                               const AssociationMap& map, const Episode& episode,
                                               const MarginConfig& mcfg, const SgdConfig& cfg,
                                               bool with_regression, const InitOptions& init = {});

/// Comparison model for the discrimination step: one (|C^B|+|C^N|+1)-way
/// classifier on FC2' features, initialised like the dual head, trained with
/// cross-entropy only.
StageResult<SingleHead> association_only_finetune(const PretrainedHead& pretrained, const LinearLayer& w_asso,
                                                  const AssociationMap& map, const Episode& episode,
                                                  const SgdConfig& cfg);

enum class TfaLoss { kCosine, kCosFace, kArcFace };

struct TfaOptions {
    TfaLoss loss = TfaLoss::kCosine;
    double m = 0.0;  // 0 picks 0.35 (CosFace) or 0.5 (ArcFace)
    bool novel_only = false;

    nlohmann::json to_json() const;
    static TfaOptions from_json(const nlohmann::json& j);
};

/// Classifier-only fine-tune of the pretrained head expanded to all classes,
/// novel rows random. Throws DataError when the balanced set has no novel samples.
StageResult<SingleHead> tfa_baseline_finetune(const PretrainedHead& pretrained, const Episode& episode,
                                              const SgdConfig& cfg, const TfaOptions& opts = {});

/// Mean cosine between relu(g(q)) of novel K-shot samples and the classifier
/// row of each sample's associated base class.
double alignment_cosine(const LinearLayer& g, const CosineClassifier& base_cls, const Episode& episode,
                        const AssociationMap& map);

Model single_head_model(const SingleHead& head, const LabelPartition& partition);
Model dual_head_model(const DualHead& head);

/// Checkpoint conversions. Names: fc2.*, fc2_prime.*, cls.weight, cls_base.weight,
/// cls_novel.weight, regressor.*; tau and the output map go in meta.
Checkpoint to_checkpoint(const SingleHead& head, const std::string& prefix);
SingleHead single_head_from_checkpoint(const Checkpoint& ckpt, const std::string& prefix);
Checkpoint to_checkpoint(const Discriminated& d);
Discriminated discriminated_from_checkpoint(const Checkpoint& ckpt);
Checkpoint to_checkpoint(const LinearLayer& w_asso);
LinearLayer fc2_prime_from_checkpoint(const Checkpoint& ckpt);

/// Loss traces as `iteration,loss`.
void write_loss_trace(const std::vector<double>& trace, const std::string& path);

}  // namespace fadi
