#include "fadi/taxonomy.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <iterator>
#include <set>
#include <sstream>

#include "fadi/error.hpp"
#include "text_util.hpp"

namespace fadi {

Taxonomy Taxonomy::from_nodes(std::vector<SynsetNode> nodes) {
    Taxonomy tax;
    tax.nodes_ = std::move(nodes);
    const std::size_t n = tax.nodes_.size();
    if (n == 0) throw DataError("taxonomy: no nodes");

    for (std::size_t i = 0; i < n; ++i) {
        if (!tax.index_.emplace(tax.nodes_[i].id, i).second) {
            throw DataError("taxonomy: duplicate id '" + tax.nodes_[i].id + "'");
        }
    }

    std::vector<std::vector<std::size_t>> parents(n);
    std::vector<std::vector<std::size_t>> children(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& p : tax.nodes_[i].parent_ids) {
            auto it = tax.index_.find(p);
            if (it == tax.index_.end()) {
                throw DataError("taxonomy: unknown parent '" + p + "' of '" + tax.nodes_[i].id +
                                "'");
            }
            parents[i].push_back(it->second);
            children[it->second].push_back(i);
        }
    }

    // Kahn's algorithm, parents before children.
    std::vector<std::size_t> pending(n);
    std::deque<std::size_t> ready;
    for (std::size_t i = 0; i < n; ++i) {
        pending[i] = parents[i].size();
        if (pending[i] == 0) ready.push_back(i);
    }
    std::vector<std::size_t> order;
    order.reserve(n);
    while (!ready.empty()) {
        const std::size_t v = ready.front();
        ready.pop_front();
        order.push_back(v);
        for (std::size_t c : children[v]) {
            if (--pending[c] == 0) ready.push_back(c);
        }
    }
    if (order.size() != n) {
        for (std::size_t i = 0; i < n; ++i) {
            if (pending[i] != 0) {
                throw DataError("taxonomy: cycle detected through '" + tax.nodes_[i].id + "'");
            }
        }
    }

    std::vector<std::size_t> roots;
    for (std::size_t i = 0; i < n; ++i) {
        if (parents[i].empty()) roots.push_back(i);
    }
    if (roots.size() != 1) {
        throw DataError("taxonomy: expected exactly one root, found " +
                        std::to_string(roots.size()));
    }
    tax.root_ = roots.front();

    tax.ancestors_.assign(n, {});
    for (std::size_t v : order) {
        std::vector<std::size_t> acc{v};
        for (std::size_t p : parents[v]) {
            std::vector<std::size_t> merged;
            std::set_union(acc.begin(), acc.end(), tax.ancestors_[p].begin(),
                           tax.ancestors_[p].end(), std::back_inserter(merged));
            acc.swap(merged);
        }
        tax.ancestors_[v] = std::move(acc);
    }

    tax.cumulative_.assign(n, 0);
    for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t a : tax.ancestors_[v]) tax.cumulative_[a] += tax.nodes_[v].own_count;
    }
    if (tax.cumulative_[tax.root_] == 0) throw DataError("taxonomy: root count is zero");
    return tax;
}

std::size_t Taxonomy::index_of(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) throw DataError("taxonomy: unknown id '" + std::string(id) + "'");
    return it->second;
}

bool Taxonomy::contains(std::string_view id) const { return index_.contains(std::string(id)); }

const SynsetNode& Taxonomy::node(std::string_view id) const { return nodes_[index_of(id)]; }

std::uint64_t Taxonomy::cumulative_count(std::string_view id) const {
    return cumulative_[index_of(id)];
}

std::vector<std::string> Taxonomy::ancestors(std::string_view id) const {
    std::vector<std::string> out;
    for (std::size_t a : ancestors_[index_of(id)]) out.push_back(nodes_[a].id);
    std::sort(out.begin(), out.end());
    return out;
}

Taxonomy parse_taxonomy(std::string_view text) {
    std::vector<SynsetNode> nodes;
    std::size_t line_no = 0;
    for (std::string_view line : detail::split_lines(text)) {
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        const auto fields = detail::split(line, '\t');
        if (fields.size() != 3) {
            throw DataError("taxonomy line " + std::to_string(line_no) + ": expected 3 tab-separated fields");
        }
        SynsetNode node;
        node.id = std::string(detail::trim(fields[0]));
        if (node.id.empty()) throw DataError("taxonomy line " + std::to_string(line_no) + ": empty id");
        const auto parent_field = detail::trim(fields[1]);
        if (!parent_field.empty()) {
            for (auto p : detail::split(parent_field, ',')) {
                p = detail::trim(p);
                if (p.empty()) {
                    throw DataError("taxonomy line " + std::to_string(line_no) + ": empty parent id");
                }
                node.parent_ids.emplace_back(p);
            }
        }
        const auto count = detail::trim(fields[2]);
        auto [ptr, ec] = std::from_chars(count.data(), count.data() + count.size(), node.own_count);
        if (ec != std::errc{} || ptr != count.data() + count.size()) {
            throw DataError("taxonomy line " + std::to_string(line_no) + ": bad count '" +
                            std::string(count) + "'");
        }
        nodes.push_back(std::move(node));
    }
    return Taxonomy::from_nodes(std::move(nodes));
}

std::string to_text(const Taxonomy& tax) {
    std::ostringstream out;
    for (const auto& n : tax.nodes()) {
        out << n.id << '\t';
        for (std::size_t i = 0; i < n.parent_ids.size(); ++i) {
            if (i) out << ',';
            out << n.parent_ids[i];
        }
        out << '\t' << n.own_count << '\n';
    }
    return out.str();
}

double information_content(const Taxonomy& tax, std::string_view id) {
    const std::uint64_t c = tax.cumulative_count(id);
    if (c == 0) {
        throw DataError("taxonomy: concept '" + std::string(id) + "' has zero count");
    }
    return std::log(static_cast<double>(tax.total()) / static_cast<double>(c));
}

std::string lcs(const Taxonomy& tax, std::string_view a, std::string_view b) {
    const auto& anc_a = tax.ancestors_[tax.index_of(a)];
    const auto& anc_b = tax.ancestors_[tax.index_of(b)];
    std::vector<std::size_t> common;
    std::set_intersection(anc_a.begin(), anc_a.end(), anc_b.begin(), anc_b.end(),
                          std::back_inserter(common));
    // Maximal IC is minimal cumulative count; a zero count means infinite IC.
    std::size_t best = common.front();
    for (std::size_t c : common) {
        const auto cc = tax.cumulative_[c];
        const auto cb = tax.cumulative_[best];
        const bool more_specific = (cc == 0 && cb != 0) || (cc != 0 && cb != 0 && cc < cb);
        const bool tie = cc == cb;
        if (more_specific || (tie && tax.nodes_[c].id < tax.nodes_[best].id)) best = c;
    }
    return tax.nodes_[best].id;
}

double lin_similarity(const Taxonomy& tax, std::string_view a, std::string_view b) {
    const double ic_a = information_content(tax, a);
    const double ic_b = information_content(tax, b);
    const double denom = ic_a + ic_b;
    if (denom == 0.0) return a == b ? 1.0 : 0.0;
    return 2.0 * information_content(tax, lcs(tax, a, b)) / denom;
}

SimilarityMatrix build_similarity_matrix(const Taxonomy& tax, const std::vector<std::string>& novel,
                                         const std::vector<std::string>& base) {
    // Validate up front so the parallel loop cannot throw.
    for (const auto* names : {&novel, &base}) {
        for (const auto& name : *names) information_content(tax, name);
    }
    SimilarityMatrix sim{novel, base, Matrix(novel.size(), base.size())};
    const auto rows = static_cast<std::ptrdiff_t>(novel.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < base.size(); ++j) {
            sim.values(static_cast<std::size_t>(i), j) =
                lin_similarity(tax, novel[static_cast<std::size_t>(i)], base[j]);
        }
    }
    return sim;
}

namespace {

void require_unique(const std::vector<std::string>& names, const char* axis) {
    std::set<std::string> seen;
    for (const auto& n : names) {
        if (n.empty()) throw DataError(std::string("similarity CSV: empty ") + axis + " name");
        if (!seen.insert(n).second) {
            throw DataError(std::string("similarity CSV: duplicate ") + axis + " name '" + n + "'");
        }
    }
}

}  // namespace

SimilarityMatrix load_similarity_matrix(std::string_view text) {
    std::vector<std::string_view> lines;
    for (auto line : detail::split_lines(text)) {
        if (!detail::trim(line).empty()) lines.push_back(line);
    }
    if (lines.empty()) throw DataError("similarity CSV: missing header row");

    SimilarityMatrix sim;
    const auto header = detail::split(lines.front(), ',');
    for (std::size_t j = 1; j < header.size(); ++j) {
        sim.base_names.emplace_back(detail::trim(header[j]));
    }
    require_unique(sim.base_names, "base");

    const std::size_t cols = sim.base_names.size();
    std::vector<double> values;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cells = detail::split(lines[r], ',');
        if (cells.size() != cols + 1) {
            throw DataError("similarity CSV row " + std::to_string(r + 1) + ": ragged row (" +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(cols + 1) + ")");
        }
        sim.novel_names.emplace_back(detail::trim(cells[0]));
        for (std::size_t j = 1; j < cells.size(); ++j) {
            const double v = detail::parse_double(cells[j], "similarity CSV");
            if (!(v >= 0.0 && v <= 1.0)) {
                throw DataError("similarity CSV: value " + std::string(detail::trim(cells[j])) +
                                " out of range [0, 1]");
            }
            values.push_back(v);
        }
    }
    require_unique(sim.novel_names, "novel");
    sim.values = Matrix(sim.novel_names.size(), cols, std::move(values));
    return sim;
}

std::string to_csv(const SimilarityMatrix& sim) {
    std::string out;
    for (const auto& b : sim.base_names) out += "," + b;
    out += '\n';
    for (std::size_t i = 0; i < sim.novel_names.size(); ++i) {
        out += sim.novel_names[i];
        for (std::size_t j = 0; j < sim.base_names.size(); ++j) {
            out += ',';
            out += detail::format_double(sim.at(i, j));
        }
        out += '\n';
    }
    return out;
}

}  // namespace fadi
