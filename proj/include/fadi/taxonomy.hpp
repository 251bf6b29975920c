#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fadi/matrix.hpp"

namespace fadi {

struct SynsetNode {
    std::string id;
    std::vector<std::string> parent_ids;  // empty only for the root
    std::uint64_t own_count = 0;
};

/// Hypernym DAG with corpus counts. Cumulative counts (own plus every distinct
/// descendant) are materialized at construction; the object is immutable after.
class Taxonomy {
public:
    /// Validates and indexes `nodes`. Throws DataError on duplicate ids, unknown
    /// parents, cycles, a missing or repeated root, or a zero root count.
    static Taxonomy from_nodes(std::vector<SynsetNode> nodes);

    bool contains(std::string_view id) const;
    const SynsetNode& node(std::string_view id) const;
    const std::string& root() const { return nodes_[root_].id; }
    std::size_t size() const { return nodes_.size(); }
    const std::vector<SynsetNode>& nodes() const { return nodes_; }

    std::uint64_t cumulative_count(std::string_view id) const;
    std::uint64_t total() const { return cumulative_[root_]; }

    /// Ancestors of `id` including itself, sorted by id.
    std::vector<std::string> ancestors(std::string_view id) const;

private:
    friend std::string lcs(const Taxonomy&, std::string_view, std::string_view);

    std::size_t index_of(std::string_view id) const;

    std::vector<SynsetNode> nodes_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::uint64_t> cumulative_;
    std::vector<std::vector<std::size_t>> ancestors_;  // sorted node indices, self included
    std::size_t root_ = 0;
};

/// Parses `id<TAB>parent1,parent2<TAB>own_count` lines. Blank parent field marks
/// the root; `#` lines and blank lines are skipped. Forward references are fine.
Taxonomy parse_taxonomy(std::string_view text);

/// Serializes back to the line format (one node per line, input order).
std::string to_text(const Taxonomy& tax);

/// -ln(cumulative(id) / total). Throws DataError for unknown ids and for
/// concepts with a zero cumulative count.
double information_content(const Taxonomy& tax, std::string_view id);

/// Common ancestor-or-self with maximal information content; ties go to the
/// lexicographically smallest id.
std::string lcs(const Taxonomy& tax, std::string_view a, std::string_view b);

/// 2 IC(lcs) / (IC(a) + IC(b)); when both ICs are zero, 1 for a == b else 0.
double lin_similarity(const Taxonomy& tax, std::string_view a, std::string_view b);

/// Novel x base matrix of similarities in [0, 1].
struct SimilarityMatrix {
    std::vector<std::string> novel_names;
    std::vector<std::string> base_names;
    Matrix values;  // |novel| x |base|

    double at(std::size_t novel, std::size_t base) const { return values(novel, base); }
};

SimilarityMatrix build_similarity_matrix(const Taxonomy& tax, const std::vector<std::string>& novel,
                                         const std::vector<std::string>& base);

/// Parses `,b1,b2,...` then `novel,v1,v2,...` rows.
SimilarityMatrix load_similarity_matrix(std::string_view text);

std::string to_csv(const SimilarityMatrix& sim);

}  // namespace fadi
