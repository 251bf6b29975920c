#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fadi/dataset.hpp"
#include "fadi/taxonomy.hpp"

namespace fadi {

/// How novel classes pick their base class.
struct AssignPolicy {
    enum class Kind { kTopK, kTop1NoDup, kRandom, kManual };

    Kind kind = Kind::kTopK;
    std::size_t k = 1;        // kTopK: take the k-th most similar base
    std::uint64_t seed = 0;   // kRandom
    std::vector<std::pair<std::string, std::string>> manual;  // kManual: (novel, base)

    static AssignPolicy top_k(std::size_t k);
    static AssignPolicy top1_nodup();
    static AssignPolicy random(std::uint64_t seed);
    static AssignPolicy manual_pairs(std::vector<std::pair<std::string, std::string>> pairs);

    /// Same syntax `parse_policy` accepts, except manual maps print as "manual".
    std::string describe() const;
};

/// Parses top1 | topk:K | top1-nodup | random:SEED | manual:<json>. The manual
/// JSON is either {"novel": "base", ...} or an association map document.
AssignPolicy parse_policy(std::string_view text);

struct AssociationPair {
    std::string novel;
    std::string base;
    double sim = 0.0;
};

struct AssociationMap {
    std::string policy;
    std::vector<AssociationPair> pairs;  // one per novel class, similarity-matrix order

    /// Throws DataError if `novel` has no pair.
    const std::string& base_for(std::string_view novel) const;
    bool has_novel(std::string_view novel) const;
    bool is_associated_base(std::string_view base) const;

    nlohmann::json to_json() const;
    static AssociationMap from_json(const nlohmann::json& j);
};

AssociationMap assign(const SimilarityMatrix& sim, const AssignPolicy& policy);

/// Novel samples take their associated base label, samples of associated base
/// classes are dropped, everything else passes through in input order.
LabeledSet pseudo_relabel(const LabeledSet& data, const AssociationMap& map,
                          const LabelPartition& partition);

}  // namespace fadi
