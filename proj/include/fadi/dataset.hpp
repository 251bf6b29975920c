#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "fadi/matrix.hpp"

namespace fadi {

/// Samples are rows of `features`; `labels[i]` names the class of row i.
struct LabeledSet {
    Matrix features;
    std::vector<std::string> labels;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.cols(); }

    /// Subset in the given row order.
    LabeledSet select(const std::vector<std::size_t>& rows) const;
    void append(std::span<const double> x, std::string label);
};

enum class ClassSet { kBase, kNovel, kBackground };

/// Disjoint split of the label space into base, novel and one background label.
struct LabelPartition {
    std::vector<std::string> base_ids;
    std::vector<std::string> novel_ids;
    std::string background_id = "background";

    /// Throws DataError if the sets overlap or contain duplicates.
    void validate() const;

    /// Throws DataError for labels outside all three sets.
    ClassSet set_of(std::string_view label) const;
    bool contains(std::string_view label) const;

    /// Joint label order: base..., novel..., background.
    std::vector<std::string> all_labels() const;
    std::size_t num_classes() const { return base_ids.size() + novel_ids.size() + 1; }
    std::size_t index_of(std::string_view label) const;
};

}  // namespace fadi
