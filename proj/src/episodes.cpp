#include "fadi/episodes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>

#include "fadi/error.hpp"
#include "fadi/random.hpp"
#include "text_util.hpp"

namespace fadi {

namespace {

constexpr std::uint64_t kWorldStream = 0x5eed0001;

std::string base_name(std::size_t j) { return "base" + std::to_string(j); }
std::string novel_name(std::size_t i) { return "novel" + std::to_string(i); }

std::vector<double> random_unit(Rng& rng, std::size_t dim) {
    std::vector<double> v(dim);
    double n = 0.0;
    do {
        for (double& x : v) x = standard_normal(rng);
        n = norm(v);
    } while (n == 0.0);
    for (double& x : v) x /= n;
    return v;
}

double distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

void draw_samples(Rng& rng, std::span<const double> mean, double spread, int count,
                  const std::string& label, LabeledSet& out) {
    const double sigma = spread / std::sqrt(static_cast<double>(mean.size()));
    std::vector<double> x(mean.size());
    for (int n = 0; n < count; ++n) {
        for (std::size_t i = 0; i < mean.size(); ++i) x[i] = mean[i] + sigma * standard_normal(rng);
        out.append(x, label);
    }
}

// Sum independent of input order, so reports do not depend on sample order.
double sorted_sum(std::vector<double>& values) {
    std::sort(values.begin(), values.end());
    double s = 0.0;
    for (double v : values) s += v;
    return s;
}

std::string build_taxonomy(const Matrix& base_means, const std::vector<std::size_t>& anchor,
                           const WorldConfig& cfg) {
    const std::size_t nb = base_means.rows();
    // Pair each base with its nearest still-unpaired neighbour.
    std::vector<int> group(nb, -1);
    int groups = 0;
    for (std::size_t j = 0; j < nb; ++j) {
        if (group[j] >= 0) continue;
        group[j] = groups;
        std::size_t best = nb;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t k = j + 1; k < nb; ++k) {
            if (group[k] >= 0) continue;
            const double d = distance(base_means.row(j), base_means.row(k));
            if (d < best_d) {
                best_d = d;
                best = k;
            }
        }
        if (best < nb) group[best] = groups;
        ++groups;
    }
    std::string out = "# synthetic taxonomy: root > group > parent > leaf\nentity\t\t0\n";
    for (int g = 0; g < groups; ++g) out += "group" + std::to_string(g) + "\tentity\t0\n";
    for (std::size_t j = 0; j < nb; ++j) {
        out += "kind_" + base_name(j) + "\tgroup" + std::to_string(group[j]) + "\t0\n";
        out += base_name(j) + "\tkind_" + base_name(j) + "\t" +
               std::to_string(cfg.base_samples_per_class) + "\n";
    }
    for (std::size_t i = 0; i < anchor.size(); ++i) {
        out += novel_name(i) + "\tkind_" + base_name(anchor[i]) + "\t" + std::to_string(cfg.shots) +
               "\n";
    }
    return out;
}

}  // namespace

void WorldConfig::validate() const {
    auto positive = [](int v, const char* name) {
        if (v <= 0) throw DataError(std::string("world config: ") + name + " must be positive");
    };
    positive(num_base, "num_base");
    positive(num_novel, "num_novel");
    positive(dim, "dim");
    positive(base_samples_per_class, "base_samples_per_class");
    positive(test_samples_per_class, "test_samples_per_class");
    positive(shots, "shots");
    positive(regression_dim, "regression_dim");
    if (!(cluster_spread > 0.0)) throw DataError("world config: cluster_spread must be positive");
    if (!(background_spread > 0.0)) throw DataError("world config: background_spread must be positive");
    if (!(novel_mix >= 0.0 && novel_mix <= 1.0)) throw DataError("world config: novel_mix must lie in [0, 1]");
    if (!(novel_offset >= 0.0)) throw DataError("world config: novel_offset must be >= 0");
    if (novel_mix > 0.0 && num_base < 2) throw DataError("world config: novel_mix > 0 needs two base classes");
    if (num_novel > num_base) {
        throw DataError("world config: each novel class anchors on a distinct base class, so num_novel <= num_base");
    }
    if (shots > test_samples_per_class || shots > base_samples_per_class) {
        throw DataError("world config: shots exceed the per-class sample pools");
    }
    if (background_samples < 0 || kshot_background < 0) {
        throw DataError("world config: background counts must be >= 0");
    }
}

nlohmann::json WorldConfig::to_json() const {
    return {{"num_base", num_base},
            {"num_novel", num_novel},
            {"dim", dim},
            {"base_samples_per_class", base_samples_per_class},
            {"test_samples_per_class", test_samples_per_class},
            {"shots", shots},
            {"cluster_spread", cluster_spread},
            {"novel_mix", novel_mix},
            {"novel_offset", novel_offset},
            {"background_spread", background_spread},
            {"background_samples", background_samples},
            {"kshot_background", kshot_background},
            {"regression_dim", regression_dim},
            {"seed", seed}};
}

WorldConfig WorldConfig::from_json(const nlohmann::json& j) {
    WorldConfig c;
    try {
        c.num_base = j.value("num_base", c.num_base);
        c.num_novel = j.value("num_novel", c.num_novel);
        c.dim = j.value("dim", c.dim);
        c.base_samples_per_class = j.value("base_samples_per_class", c.base_samples_per_class);
        c.test_samples_per_class = j.value("test_samples_per_class", c.test_samples_per_class);
        c.shots = j.value("shots", j.value("K", c.shots));
        c.cluster_spread = j.value("cluster_spread", c.cluster_spread);
        c.novel_mix = j.value("novel_mix", c.novel_mix);
        c.novel_offset = j.value("novel_offset", c.novel_offset);
        c.background_spread = j.value("background_spread", c.background_spread);
        c.background_samples = j.value("background_samples", c.background_samples);
        c.kshot_background = j.value("kshot_background", c.kshot_background);
        c.regression_dim = j.value("regression_dim", c.regression_dim);
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("world config JSON: ") + e.what());
    }
    c.validate();
    return c;
}

bool operator==(const Episode& a, const Episode& b) {
    return a.config.to_json() == b.config.to_json() &&
           a.partition.all_labels() == b.partition.all_labels() &&
           a.abundant_base.features == b.abundant_base.features &&
           a.abundant_base.labels == b.abundant_base.labels &&
           a.balanced_kshot.features == b.balanced_kshot.features &&
           a.balanced_kshot.labels == b.balanced_kshot.labels &&
           a.kshot_regression == b.kshot_regression && a.test.features == b.test.features &&
           a.test.labels == b.test.labels &&
           a.ground_truth_affinity.values == b.ground_truth_affinity.values &&
           a.taxonomy_text == b.taxonomy_text && a.base_means == b.base_means &&
           a.novel_means == b.novel_means && a.novel_anchor == b.novel_anchor;
}

Episode generate_world(const WorldConfig& cfg) {
    cfg.validate();
    Rng rng = make_rng(cfg.seed, kWorldStream);
    const auto nb = static_cast<std::size_t>(cfg.num_base);
    const auto nn = static_cast<std::size_t>(cfg.num_novel);
    const auto dim = static_cast<std::size_t>(cfg.dim);

    Episode ep;
    ep.config = cfg;
    for (std::size_t j = 0; j < nb; ++j) ep.partition.base_ids.push_back(base_name(j));
    for (std::size_t i = 0; i < nn; ++i) ep.partition.novel_ids.push_back(novel_name(i));
    ep.partition.background_id = "background";

    ep.base_means = Matrix(nb, dim);
    for (std::size_t j = 0; j < nb; ++j) {
        const auto u = random_unit(rng, dim);
        std::copy(u.begin(), u.end(), ep.base_means.row(j).begin());
    }

    // Each novel class anchors on a distinct base class and leans toward that
    // base's nearest neighbour: mean = mix * anchor + (1 - mix) * neighbour + offset.
    std::vector<std::size_t> perm(nb);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t k = nb; k > 1; --k) std::swap(perm[k - 1], perm[uniform_index(rng, k)]);
    ep.novel_means = Matrix(nn, dim);
    for (std::size_t i = 0; i < nn; ++i) {
        const std::size_t a = perm[i];
        std::size_t second = a;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < nb; ++j) {
            if (j == a) continue;
            const double d = distance(ep.base_means.row(a), ep.base_means.row(j));
            if (d < best) {
                best = d;
                second = j;
            }
        }
        const auto offset = random_unit(rng, dim);
        for (std::size_t d = 0; d < dim; ++d) {
            const double neighbour = second == a ? 0.0 : ep.base_means(second, d);
            ep.novel_means(i, d) = cfg.novel_mix * ep.base_means(a, d) +
                                   (1.0 - cfg.novel_mix) * neighbour + cfg.novel_offset * offset[d];
        }
        ep.novel_anchor.push_back(a);
    }

    const std::vector<double> origin(dim, 0.0);
    const int bg_abundant = cfg.background_samples > 0 ? cfg.background_samples : cfg.base_samples_per_class;
    const int bg_kshot = cfg.kshot_background > 0 ? cfg.kshot_background : cfg.shots * (cfg.num_base + cfg.num_novel);

    ep.abundant_base.features = Matrix(0, dim);
    for (std::size_t j = 0; j < nb; ++j) {
        draw_samples(rng, ep.base_means.row(j), cfg.cluster_spread, cfg.base_samples_per_class,
                     base_name(j), ep.abundant_base);
    }
    draw_samples(rng, origin, cfg.background_spread, bg_abundant, "background", ep.abundant_base);

    ep.balanced_kshot.features = Matrix(0, dim);
    for (std::size_t j = 0; j < nb; ++j) {
        draw_samples(rng, ep.base_means.row(j), cfg.cluster_spread, cfg.shots, base_name(j),
                     ep.balanced_kshot);
    }
    for (std::size_t i = 0; i < nn; ++i) {
        draw_samples(rng, ep.novel_means.row(i), cfg.cluster_spread, cfg.shots, novel_name(i),
                     ep.balanced_kshot);
    }
    draw_samples(rng, origin, cfg.background_spread, bg_kshot, "background", ep.balanced_kshot);

    // Synthetic box offsets: a fixed random linear map of the features.
    const auto rdim = static_cast<std::size_t>(cfg.regression_dim);
    Matrix reg_map(rdim, dim);
    for (double& v : reg_map.flat()) v = standard_normal(rng) / std::sqrt(static_cast<double>(dim));
    ep.kshot_regression = Matrix(ep.balanced_kshot.size(), rdim);
    for (std::size_t r = 0; r < ep.balanced_kshot.size(); ++r) {
        if (ep.balanced_kshot.labels[r] == "background") continue;
        for (std::size_t o = 0; o < rdim; ++o) {
            ep.kshot_regression(r, o) = dot(reg_map.row(o), ep.balanced_kshot.features.row(r));
        }
    }

    ep.test.features = Matrix(0, dim);
    for (std::size_t j = 0; j < nb; ++j) {
        draw_samples(rng, ep.base_means.row(j), cfg.cluster_spread, cfg.test_samples_per_class,
                     base_name(j), ep.test);
    }
    for (std::size_t i = 0; i < nn; ++i) {
        draw_samples(rng, ep.novel_means.row(i), cfg.cluster_spread, cfg.test_samples_per_class,
                     novel_name(i), ep.test);
    }
    draw_samples(rng, origin, cfg.background_spread, cfg.test_samples_per_class, "background", ep.test);

    ep.ground_truth_affinity.novel_names = ep.partition.novel_ids;
    ep.ground_truth_affinity.base_names = ep.partition.base_ids;
    ep.ground_truth_affinity.values = Matrix(nn, nb);
    for (std::size_t i = 0; i < nn; ++i) {
        std::vector<double> neg(nb);
        for (std::size_t j = 0; j < nb; ++j) neg[j] = -distance(ep.novel_means.row(i), ep.base_means.row(j));
        const double mx = *std::max_element(neg.begin(), neg.end());
        double sum = 0.0;
        for (double& v : neg) sum += (v = std::exp(v - mx));
        for (std::size_t j = 0; j < nb; ++j) ep.ground_truth_affinity.values(i, j) = neg[j] / sum;
    }

    ep.taxonomy_text = build_taxonomy(ep.base_means, ep.novel_anchor, cfg);
    return ep;
}

LabeledSet load_embeddings(std::string_view text) {
    LabeledSet out;
    std::size_t dim = 0;
    bool have_dim = false;
    std::vector<bool> skip;  // per column after the label
    bool first = true;
    std::size_t line_no = 0;
    for (auto line : detail::split_lines(text)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split(line, ',');
        if (first) {
            first = false;
            if (detail::trim(cells[0]) == "label") {
                for (std::size_t c = 1; c < cells.size(); ++c) skip.push_back(detail::trim(cells[c]) == "stage");
                continue;
            }
        }
        if (!skip.empty() && cells.size() != skip.size() + 1) {
            throw DataError("embeddings line " + std::to_string(line_no) + ": ragged row");
        }
        std::vector<double> x;
        for (std::size_t c = 1; c < cells.size(); ++c) {
            if (!skip.empty() && skip[c - 1]) continue;
            x.push_back(detail::parse_double(cells[c], "embeddings"));
        }
        if (!have_dim) {
            dim = x.size();
            have_dim = true;
            out.features = Matrix(0, dim);
        } else if (x.size() != dim) {
            throw DataError("embeddings line " + std::to_string(line_no) + ": ragged row (" +
                            std::to_string(x.size()) + " features, expected " + std::to_string(dim) + ")");
        }
        out.append(x, std::string(detail::trim(cells[0])));
    }
    return out;
}

Matrix as_columns(const Matrix& rows) {
    Matrix out(rows.cols(), rows.rows());
    for (std::size_t r = 0; r < rows.rows(); ++r) out.set_col(r, rows.row(r));
    return out;
}

double class_compactness(const Matrix& features, const std::vector<std::string>& labels,
                         std::string_view label) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (labels[r] == label) rows.push_back(r);
    }
    if (rows.empty()) return 0.0;
    std::vector<double> centroid(features.cols());
    for (std::size_t d = 0; d < features.cols(); ++d) {
        std::vector<double> column;
        for (auto r : rows) column.push_back(features(r, d));
        centroid[d] = sorted_sum(column) / static_cast<double>(rows.size());
    }
    std::vector<double> dispersion;
    for (auto r : rows) dispersion.push_back(1.0 - cosine(features.row(r), centroid));
    return sorted_sum(dispersion) / static_cast<double>(rows.size());
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j;
    j["base_accuracy"] = base_accuracy;
    j["novel_accuracy"] = novel_accuracy;
    j["overall_accuracy"] = overall_accuracy;
    j["class_names"] = class_names;
    nlohmann::json conf;
    conf["rows"] = novel_names;
    conf["cols"] = class_names;
    conf["values"] = nlohmann::json::array();
    for (std::size_t i = 0; i < score_confusion.rows(); ++i) {
        const auto row = score_confusion.row(i);
        conf["values"].push_back(std::vector<double>(row.begin(), row.end()));
    }
    j["score_confusion"] = conf;
    nlohmann::json comp = nlohmann::json::object();
    for (std::size_t c = 0; c < class_names.size(); ++c) comp[class_names[c]] = compactness[c];
    j["compactness"] = comp;
    j["novel_compactness"] = novel_compactness;
    j["separability"] = separability;
    return j;
}

EvalReport evaluate(const Model& model, const Episode& episode) {
    const auto& part = episode.partition;
    const std::size_t classes = part.num_classes();
    if (model.num_outputs != classes) {
        throw DataError("evaluate: model has " + std::to_string(model.num_outputs) + " outputs, episode has " +
                        std::to_string(classes) + " classes");
    }
    const auto& test = episode.test;
    const Matrix q = as_columns(test.features);
    const Matrix probs = model.predict(q);
    require_shape(probs, classes, test.size(), "evaluate: model output");

    EvalReport rep;
    rep.class_names = part.all_labels();
    rep.novel_names = part.novel_ids;

    std::size_t hits[3] = {0, 0, 0};
    std::size_t counts[3] = {0, 0, 0};
    std::vector<std::size_t> label_index(test.size());
    std::vector<ClassSet> label_set(test.size());
    for (std::size_t s = 0; s < test.size(); ++s) {
        label_index[s] = part.index_of(test.labels[s]);
        label_set[s] = part.set_of(test.labels[s]);
        std::size_t arg = 0;
        for (std::size_t c = 1; c < classes; ++c) {
            if (probs(c, s) > probs(arg, s)) arg = c;
        }
        const auto k = static_cast<std::size_t>(label_set[s]);
        ++counts[k];
        if (arg == label_index[s]) ++hits[k];
    }
    auto ratio = [](std::size_t h, std::size_t n) { return n ? static_cast<double>(h) / static_cast<double>(n) : 0.0; };
    rep.base_accuracy = ratio(hits[0], counts[0]);
    rep.novel_accuracy = ratio(hits[1], counts[1]);
    rep.overall_accuracy = ratio(hits[0] + hits[1] + hits[2], test.size());

    rep.score_confusion = Matrix(part.novel_ids.size(), classes);
    for (std::size_t i = 0; i < part.novel_ids.size(); ++i) {
        const std::size_t target = part.base_ids.size() + i;
        for (std::size_t c = 0; c < classes; ++c) {
            std::vector<double> vals;
            for (std::size_t s = 0; s < test.size(); ++s) {
                if (label_index[s] == target) vals.push_back(probs(c, s));
            }
            rep.score_confusion(i, c) = vals.empty() ? 0.0 : sorted_sum(vals) / static_cast<double>(vals.size());
        }
    }

    // Post-g features routed per true class set, one row per test sample.
    Matrix feats;
    for (ClassSet set : {ClassSet::kBase, ClassSet::kNovel, ClassSet::kBackground}) {
        std::vector<std::size_t> idx;
        for (std::size_t s = 0; s < test.size(); ++s) {
            if (label_set[s] == set) idx.push_back(s);
        }
        if (idx.empty()) continue;
        Matrix cols(q.rows(), idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) cols.set_col(k, q.col(idx[k]));
        const Matrix z = model.embed(cols, set);
        if (feats.empty()) feats = Matrix(test.size(), z.rows());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            for (std::size_t d = 0; d < z.rows(); ++d) feats(idx[k], d) = z(d, k);
        }
    }

    rep.compactness.resize(classes);
    double novel_sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
        rep.compactness[c] = class_compactness(feats, test.labels, rep.class_names[c]);
        if (c >= part.base_ids.size() && c < part.base_ids.size() + part.novel_ids.size()) {
            novel_sum += rep.compactness[c];
        }
    }
    rep.novel_compactness = part.novel_ids.empty() ? 0.0 : novel_sum / static_cast<double>(part.novel_ids.size());

    // Foreground centroids; minimum pairwise angle.
    const std::size_t fg = part.base_ids.size() + part.novel_ids.size();
    std::vector<std::vector<double>> centroids(fg, std::vector<double>(feats.cols(), 0.0));
    for (std::size_t c = 0; c < fg; ++c) {
        for (std::size_t d = 0; d < feats.cols(); ++d) {
            std::vector<double> vals;
            for (std::size_t s = 0; s < test.size(); ++s) {
                if (label_index[s] == c) vals.push_back(feats(s, d));
            }
            centroids[c][d] = vals.empty() ? 0.0 : sorted_sum(vals) / static_cast<double>(vals.size());
        }
    }
    rep.separability = fg > 1 ? std::numbers::pi : 0.0;
    for (std::size_t a = 0; a < fg; ++a) {
        for (std::size_t b = a + 1; b < fg; ++b) {
            const double angle = std::acos(std::clamp(cosine(centroids[a], centroids[b]), -1.0, 1.0));
            rep.separability = std::min(rep.separability, angle);
        }
    }
    return rep;
}

void export_features(const Model& model, const Episode& episode, std::string_view stage,
                     const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    const auto& test = episode.test;
    const Matrix q = as_columns(test.features);
    std::vector<Matrix> routed(3);
    std::vector<std::vector<std::size_t>> members(3);
    for (std::size_t s = 0; s < test.size(); ++s) {
        members[static_cast<std::size_t>(episode.partition.set_of(test.labels[s]))].push_back(s);
    }
    std::vector<std::vector<double>> rows(test.size());
    for (std::size_t k = 0; k < 3; ++k) {
        if (members[k].empty()) continue;
        Matrix cols(q.rows(), members[k].size());
        for (std::size_t m = 0; m < members[k].size(); ++m) cols.set_col(m, q.col(members[k][m]));
        const Matrix z = model.embed(cols, static_cast<ClassSet>(k));
        for (std::size_t m = 0; m < members[k].size(); ++m) rows[members[k][m]] = z.col(m);
    }
    const std::size_t dim = rows.empty() ? 0 : rows.front().size();
    out << "label,stage";
    for (std::size_t d = 0; d < dim; ++d) out << ",f" << d + 1;
    out << '\n';
    for (std::size_t s = 0; s < test.size(); ++s) {
        out << test.labels[s] << ',' << stage;
        for (double v : rows[s]) out << ',' << detail::format_double(v);
        out << '\n';
    }
    if (!out) throw DataError("failed writing '" + path + "'");
}

}  // namespace fadi
