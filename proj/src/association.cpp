#include "fadi/association.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <set>
#include <tuple>

#include "fadi/error.hpp"
#include "fadi/random.hpp"

namespace fadi {

AssignPolicy AssignPolicy::top_k(std::size_t k) {
    if (k < 1) throw DataError("assign policy: k must be >= 1");
    AssignPolicy p;
    p.kind = Kind::kTopK;
    p.k = k;
    return p;
}

AssignPolicy AssignPolicy::top1_nodup() {
    AssignPolicy p;
    p.kind = Kind::kTop1NoDup;
    return p;
}

AssignPolicy AssignPolicy::random(std::uint64_t seed) {
    AssignPolicy p;
    p.kind = Kind::kRandom;
    p.seed = seed;
    return p;
}

AssignPolicy AssignPolicy::manual_pairs(std::vector<std::pair<std::string, std::string>> pairs) {
    AssignPolicy p;
    p.kind = Kind::kManual;
    p.manual = std::move(pairs);
    return p;
}

std::string AssignPolicy::describe() const {
    switch (kind) {
        case Kind::kTopK:
            return k == 1 ? "top1" : "topk:" + std::to_string(k);
        case Kind::kTop1NoDup:
            return "top1-nodup";
        case Kind::kRandom:
            return "random:" + std::to_string(seed);
        case Kind::kManual:
            return "manual";
    }
    return "unknown";
}

namespace {

std::uint64_t parse_uint(std::string_view s, const char* what) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
        throw UsageError(std::string("policy: bad ") + what + " '" + std::string(s) + "'");
    }
    return v;
}

}  // namespace

AssignPolicy parse_policy(std::string_view text) {
    if (text == "top1") return AssignPolicy::top_k(1);
    if (text == "top1-nodup") return AssignPolicy::top1_nodup();
    if (text.starts_with("topk:")) {
        const auto k = parse_uint(text.substr(5), "rank");
        if (k < 1) throw UsageError("policy: topk rank must be >= 1");
        return AssignPolicy::top_k(k);
    }
    if (text.starts_with("random:")) return AssignPolicy::random(parse_uint(text.substr(7), "seed"));
    if (text.starts_with("manual:")) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text.substr(7));
        } catch (const nlohmann::json::parse_error& e) {
            throw UsageError(std::string("policy: manual map is not valid JSON: ") + e.what());
        }
        std::vector<std::pair<std::string, std::string>> pairs;
        if (j.is_object() && j.contains("pairs")) {
            for (const auto& p : AssociationMap::from_json(j).pairs) pairs.emplace_back(p.novel, p.base);
        } else if (j.is_object()) {
            for (const auto& [novel, base] : j.items()) {
                if (!base.is_string()) throw UsageError("policy: manual map values must be strings");
                pairs.emplace_back(novel, base.get<std::string>());
            }
        } else {
            throw UsageError("policy: manual map must be a JSON object");
        }
        return AssignPolicy::manual_pairs(std::move(pairs));
    }
    throw UsageError("unknown policy '" + std::string(text) +
                     "' (expected top1, topk:K, top1-nodup, random:SEED or manual:<json>)");
}

const std::string& AssociationMap::base_for(std::string_view novel) const {
    for (const auto& p : pairs) {
        if (p.novel == novel) return p.base;
    }
    throw DataError("association map has no entry for novel class '" + std::string(novel) + "'");
}

bool AssociationMap::has_novel(std::string_view novel) const {
    return std::any_of(pairs.begin(), pairs.end(), [&](const auto& p) { return p.novel == novel; });
}

bool AssociationMap::is_associated_base(std::string_view base) const {
    return std::any_of(pairs.begin(), pairs.end(), [&](const auto& p) { return p.base == base; });
}

nlohmann::json AssociationMap::to_json() const {
    nlohmann::json j;
    j["policy"] = policy;
    j["pairs"] = nlohmann::json::array();
    for (const auto& p : pairs) {
        j["pairs"].push_back({{"novel", p.novel}, {"base", p.base}, {"sim", p.sim}});
    }
    return j;
}

AssociationMap AssociationMap::from_json(const nlohmann::json& j) {
    try {
        AssociationMap map;
        map.policy = j.at("policy").get<std::string>();
        for (const auto& p : j.at("pairs")) {
            map.pairs.push_back({p.at("novel").get<std::string>(), p.at("base").get<std::string>(),
                                 p.value("sim", 0.0)});
        }
        return map;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("association map JSON: ") + e.what());
    }
}

namespace {

// Base indices of one row, most similar first; equal similarities by base name.
std::vector<std::size_t> ranked_bases(const SimilarityMatrix& sim, std::size_t row) {
    std::vector<std::size_t> order(sim.base_names.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double sa = sim.at(row, a);
        const double sb = sim.at(row, b);
        if (sa != sb) return sa > sb;
        return sim.base_names[a] < sim.base_names[b];
    });
    return order;
}

std::size_t find_name(const std::vector<std::string>& names, const std::string& name,
                      const char* axis) {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
        throw DataError(std::string("manual association: unknown ") + axis + " class '" + name + "'");
    }
    return static_cast<std::size_t>(it - names.begin());
}

}  // namespace

AssociationMap assign(const SimilarityMatrix& sim, const AssignPolicy& policy) {
    const std::size_t n_novel = sim.novel_names.size();
    const std::size_t n_base = sim.base_names.size();
    if (n_base == 0) throw DataError("assign: no base classes");

    AssociationMap map;
    map.policy = policy.describe();
    std::vector<std::size_t> chosen(n_novel);

    switch (policy.kind) {
        case AssignPolicy::Kind::kTopK: {
            if (policy.k < 1 || policy.k > n_base) {
                throw DataError("assign: rank " + std::to_string(policy.k) + " exceeds " +
                                std::to_string(n_base) + " base classes");
            }
            for (std::size_t i = 0; i < n_novel; ++i) chosen[i] = ranked_bases(sim, i)[policy.k - 1];
            break;
        }
        case AssignPolicy::Kind::kTop1NoDup: {
            if (n_base < n_novel) {
                throw DataError("assign: top1-nodup needs at least as many base classes (" +
                                std::to_string(n_base) + ") as novel classes (" +
                                std::to_string(n_novel) + ")");
            }
            // Iterated global argmax over the remaining (novel, base) pairs.
            std::vector<std::tuple<double, std::size_t, std::size_t>> cells;
            cells.reserve(n_novel * n_base);
            for (std::size_t i = 0; i < n_novel; ++i) {
                for (std::size_t j = 0; j < n_base; ++j) cells.emplace_back(sim.at(i, j), i, j);
            }
            std::stable_sort(cells.begin(), cells.end(), [&](const auto& a, const auto& b) {
                const auto& [sa, ia, ja] = a;
                const auto& [sb, ib, jb] = b;
                if (sa != sb) return sa > sb;
                if (ja != jb) return sim.base_names[ja] < sim.base_names[jb];
                return sim.novel_names[ia] < sim.novel_names[ib];
            });
            std::vector<bool> novel_done(n_novel, false);
            std::vector<bool> base_used(n_base, false);
            std::size_t remaining = n_novel;
            for (const auto& [s, i, j] : cells) {
                if (remaining == 0) break;
                if (novel_done[i] || base_used[j]) continue;
                chosen[i] = j;
                novel_done[i] = true;
                base_used[j] = true;
                --remaining;
            }
            break;
        }
        case AssignPolicy::Kind::kRandom: {
            Rng rng = make_rng(policy.seed, 0xa55);
            for (std::size_t i = 0; i < n_novel; ++i) chosen[i] = uniform_index(rng, n_base);
            break;
        }
        case AssignPolicy::Kind::kManual: {
            std::vector<bool> seen(n_novel, false);
            for (const auto& [novel, base] : policy.manual) {
                const std::size_t i = find_name(sim.novel_names, novel, "novel");
                const std::size_t j = find_name(sim.base_names, base, "base");
                if (seen[i]) throw DataError("manual association: '" + novel + "' assigned twice");
                seen[i] = true;
                chosen[i] = j;
            }
            for (std::size_t i = 0; i < n_novel; ++i) {
                if (!seen[i]) {
                    throw DataError("manual association: no base given for '" + sim.novel_names[i] +
                                    "'");
                }
            }
            break;
        }
    }

    for (std::size_t i = 0; i < n_novel; ++i) {
        map.pairs.push_back({sim.novel_names[i], sim.base_names[chosen[i]], sim.at(i, chosen[i])});
    }
    return map;
}

LabeledSet pseudo_relabel(const LabeledSet& data, const AssociationMap& map,
                          const LabelPartition& partition) {
    LabeledSet out;
    out.features = Matrix(0, data.dim());
    for (std::size_t r = 0; r < data.size(); ++r) {
        const auto& label = data.labels[r];
        switch (partition.set_of(label)) {
            case ClassSet::kNovel:
                out.append(data.features.row(r), map.base_for(label));
                break;
            case ClassSet::kBase:
                if (!map.is_associated_base(label)) out.append(data.features.row(r), label);
                break;
            case ClassSet::kBackground:
                out.append(data.features.row(r), label);
                break;
        }
    }
    return out;
}

}  // namespace fadi
