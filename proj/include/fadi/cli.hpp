#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fadi/pipeline.hpp"

namespace fadi {

inline constexpr const char* kToolVersion = "fadi 0.1.0";

/// Everything `run` and `sweep` need. JSON keys match the member names;
/// `margin` is either "schedule" or a MarginConfig object.
struct RunConfig {
    std::uint64_t seed = 0;         // copied into the world and every stage
    WorldConfig world;
    std::size_t d_hidden = 32;
    double tau = 20.0;
    SgdConfig base_sgd;             // base training
    SgdConfig sgd;                  // association, discrimination, tfa and comparison fine-tunes
    std::optional<MarginConfig> margin;  // empty: schedule from K
    std::string association_source = "taxonomy";  // taxonomy | affinity
    std::string policy = "top1";
    bool with_regression = true;
    InitOptions init;
    TfaOptions tfa;
    std::string output_dir = "fadi_run";

    MarginConfig effective_margin() const;
    /// Propagates `seed` into the world and SGD configs.
    void apply_seed(std::uint64_t s);
    void validate() const;
    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
};

/// Reads a config file and applies FADI_SEED if set.
RunConfig load_run_config(const std::string& path);

SimilarityMatrix similarity_for(const Episode& episode, const std::string& source);

/// Measurements of one in-memory end-to-end run.
struct PipelineOutcome {
    Episode episode;
    AssociationMap map;
    StageResult<PretrainedHead> base;
    StageResult<LinearLayer> associate;
    StageResult<Discriminated> discriminate;
    EvalReport base_report;
    EvalReport fadi_report;
    double alignment_before = 0.0;
    double alignment_after = 0.0;
    double compactness_before = 0.0;  // novel test compactness on FC2 features
    double compactness_after = 0.0;   // same on FC2' features
    std::optional<EvalReport> association_only_report;
    std::optional<EvalReport> tfa_report;
};

struct PipelineExtras {
    bool association_only = false;
    bool tfa = false;
};

PipelineOutcome run_pipeline(const RunConfig& cfg, const PipelineExtras& extras = {});

/// Mean score the model gives each novel class's associated base class.
double novel_to_associated_confusion(const EvalReport& report, const AssociationMap& map);

/// Entry point shared by the executable and the tests. Returns the exit code.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fadi
