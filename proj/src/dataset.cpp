#include "fadi/dataset.hpp"

#include <algorithm>
#include <set>

#include "fadi/error.hpp"

namespace fadi {

LabeledSet LabeledSet::select(const std::vector<std::size_t>& rows) const {
    LabeledSet out;
    out.features = Matrix(rows.size(), dim());
    out.labels.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto src = features.row(rows[r]);
        std::copy(src.begin(), src.end(), out.features.row(r).begin());
        out.labels.push_back(labels[rows[r]]);
    }
    return out;
}

void LabeledSet::append(std::span<const double> x, std::string label) {
    features.append_row(x);
    labels.push_back(std::move(label));
}

void LabelPartition::validate() const {
    std::set<std::string> seen;
    auto add = [&seen](const std::string& l) {
        if (!seen.insert(l).second) throw DataError("label partition: '" + l + "' listed twice");
    };
    for (const auto& l : base_ids) add(l);
    for (const auto& l : novel_ids) add(l);
    add(background_id);
}

ClassSet LabelPartition::set_of(std::string_view label) const {
    if (label == background_id) return ClassSet::kBackground;
    if (std::find(base_ids.begin(), base_ids.end(), label) != base_ids.end()) return ClassSet::kBase;
    if (std::find(novel_ids.begin(), novel_ids.end(), label) != novel_ids.end()) {
        return ClassSet::kNovel;
    }
    throw DataError("label '" + std::string(label) + "' is not in the label partition");
}

bool LabelPartition::contains(std::string_view label) const {
    return label == background_id ||
           std::find(base_ids.begin(), base_ids.end(), label) != base_ids.end() ||
           std::find(novel_ids.begin(), novel_ids.end(), label) != novel_ids.end();
}

std::vector<std::string> LabelPartition::all_labels() const {
    std::vector<std::string> out(base_ids);
    out.insert(out.end(), novel_ids.begin(), novel_ids.end());
    out.push_back(background_id);
    return out;
}

std::size_t LabelPartition::index_of(std::string_view label) const {
    if (auto it = std::find(base_ids.begin(), base_ids.end(), label); it != base_ids.end()) {
        return static_cast<std::size_t>(it - base_ids.begin());
    }
    if (auto it = std::find(novel_ids.begin(), novel_ids.end(), label); it != novel_ids.end()) {
        return base_ids.size() + static_cast<std::size_t>(it - novel_ids.begin());
    }
    if (label == background_id) return base_ids.size() + novel_ids.size();
    throw DataError("label '" + std::string(label) + "' is not in the label partition");
}

}  // namespace fadi
