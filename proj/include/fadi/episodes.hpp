#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fadi/dataset.hpp"
#include "fadi/taxonomy.hpp"

namespace fadi {

/// Parameters of a synthetic few-shot world. Noise magnitudes are vector norms:
/// each coordinate gets a normal draw with std spread / sqrt(dim).
struct WorldConfig {
    int num_base = 6;
    int num_novel = 3;
    int dim = 32;
    int base_samples_per_class = 200;
    int test_samples_per_class = 100;
    int shots = 1;                  // K
    double cluster_spread = 0.4;
    double novel_mix = 0.55;        // weight of the nearest base mean in each novel mean
    double novel_offset = 0.1;      // norm of the random offset added to each novel mean
    double background_spread = 1.0;
    int background_samples = 0;     // abundant-set background count; 0 means base_samples_per_class
    int kshot_background = 0;       // balanced-set background count; 0 means K * (num_base + num_novel)
    int regression_dim = 4;
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static WorldConfig from_json(const nlohmann::json& j);
};

/// One generated (or loaded) few-shot episode.
struct Episode {
    WorldConfig config;
    LabelPartition partition;
    LabeledSet abundant_base;    // base classes plus background
    LabeledSet balanced_kshot;   // exactly K per non-background class, plus background
    Matrix kshot_regression;     // rows align with balanced_kshot; zeros for background
    LabeledSet test;
    SimilarityMatrix ground_truth_affinity;  // novel x base, rows sum to 1
    std::string taxonomy_text;   // taxonomy-file format, see parse_taxonomy
    Matrix base_means;           // num_base x dim
    Matrix novel_means;          // num_novel x dim
    std::vector<std::size_t> novel_anchor;  // index of the base mean each novel mostly copies

    friend bool operator==(const Episode&, const Episode&);
};

Episode generate_world(const WorldConfig& cfg);

/// Rows `label,f1,...,fd`. A header row whose first cell is `label` is allowed;
/// its `stage` column, if any, is skipped. Empty input gives an empty set.
LabeledSet load_embeddings(std::string_view text);

/// Anything that maps feature columns to joint class distributions.
struct Model {
    std::size_t num_outputs = 0;
    /// q is dim x n; returns num_outputs x n probabilities.
    std::function<Matrix(const Matrix&)> predict;
    /// Post-g features of q, routed by the class set of the samples' true labels.
    std::function<Matrix(const Matrix&, ClassSet)> embed;
};

struct EvalReport {
    double base_accuracy = 0.0;
    double novel_accuracy = 0.0;
    double overall_accuracy = 0.0;
    std::vector<std::string> class_names;  // joint order
    std::vector<std::string> novel_names;
    Matrix score_confusion;                // novel x all classes, mean predicted distribution
    std::vector<double> compactness;       // per class, mean of 1 - cos(sample, centroid)
    double novel_compactness = 0.0;        // mean over novel classes
    double separability = 0.0;             // min angle between foreground class centroids

    nlohmann::json to_json() const;
};

EvalReport evaluate(const Model& model, const Episode& episode);

/// Mean of 1 - cos(feature, class centroid) over rows of `features` with `label`.
double class_compactness(const Matrix& features, const std::vector<std::string>& labels,
                         std::string_view label);

/// Writes `label,stage,f1..fd` for every test sample.
void export_features(const Model& model, const Episode& episode, std::string_view stage,
                     const std::string& path);

/// Column matrix (dim x n) of the rows of a labeled set.
Matrix as_columns(const Matrix& rows);

}  // namespace fadi
