// Acceptance suite: one PASS/FAIL line per criterion, details indented below it.
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "fadi/association.hpp"
#include "fadi/cli.hpp"
#include "fadi/losses.hpp"
#include "fadi/nethead.hpp"
#include "fadi/taxonomy.hpp"
#include "test_support.hpp"

using namespace fadi;
using namespace fadi::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
    bool pass = true;
    std::vector<std::string> details;
    void note(const std::string& s) { details.push_back(s); }
    void check(bool ok, const std::string& s) {
        pass = pass && ok;
        note(std::string(ok ? "ok   " : "FAIL ") + s);
    }
};

int failures = 0;

void report(int id, const std::string& title, const Verdict& v) {
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << title << '\n';
    for (const auto& d : v.details) std::cout << "    " << d << '\n';
    std::cout.flush();
    failures += v.pass ? 0 : 1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return {};
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

// ---- 1: assignment reproduction -----------------------------------------------------------------

Verdict assignment_reproduction() {
    using Pairs = std::vector<std::pair<std::string, std::string>>;
    struct Case {
        std::string split, policy;
        Pairs want;
    };
    const std::vector<Case> cases{
        {"voc_split1.csv", "top1-nodup",
         {{"bird", "dog"}, {"bus", "train"}, {"cow", "horse"}, {"motorbike", "bicycle"}, {"sofa", "chair"}}},
        {"voc_split2.csv", "top1-nodup",
         {{"aeroplane", "boat"}, {"bottle", "pottedplant"}, {"cow", "sheep"}, {"horse", "dog"}, {"sofa", "chair"}}},
        {"voc_split3.csv", "top1-nodup",
         {{"boat", "aeroplane"}, {"cat", "dog"}, {"motorbike", "bicycle"}, {"sheep", "cow"}, {"sofa", "chair"}}},
        {"voc_split1.csv", "top1",
         {{"bird", "horse"}, {"bus", "train"}, {"cow", "horse"}, {"motorbike", "bicycle"}, {"sofa", "chair"}}},
        {"voc_split1.csv", "topk:2",
         {{"bird", "dog"}, {"bus", "car"}, {"cow", "sheep"}, {"motorbike", "tvmonitor"}, {"sofa", "diningtable"}}},
    };
    Verdict v;
    const auto t0 = Clock::now();
    for (const auto& c : cases) {
        const auto sim = load_similarity_matrix(slurp(fs::path(FADI_FIXTURE_DIR) / c.split));
        const auto map = assign(sim, parse_policy(c.policy));
        for (const auto& [novel, base] : c.want) {
            const auto& got = map.base_for(novel);
            v.check(got == base, c.split + " " + c.policy + " " + novel + " -> " + got + " (expected " + base + ")");
        }
    }
    const double secs = since(t0);
    v.check(secs < 1.0, "runtime " + fmt(secs) + " s < 1 s");
    return v;
}

// ---- 2: gradient correctness ----------------------------------------------------------------------

double probe(const Matrix& g, const Matrix& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += g.flat()[i] * y.flat()[i];
    return s;
}

struct GradStats {
    int cases = 0;
    double worst = 0.0;
    void add(double e) {
        ++cases;
        worst = std::max(worst, e);
    }
};

Verdict gradient_correctness() {
    constexpr int kCases = 100;
    constexpr double kTol = 1e-5;
    std::map<std::string, GradStats> stats;
    const auto t0 = Clock::now();

    for (int seed = 0; stats["linear"].cases < kCases; ++seed) {
        Rng rng = make_rng(static_cast<std::uint64_t>(seed), 0xa1);
        const auto out = uniform_size(rng, 1, 16), in = uniform_size(rng, 1, 16), n = uniform_size(rng, 1, 8);
        LinearLayer l{uniform_matrix(out, in, rng), uniform_matrix(out, 1, rng), false};
        Matrix x = uniform_matrix(in, n, rng);
        const Matrix g = uniform_matrix(out, n, rng);
        const auto an = linear_backward(l, x, g);
        auto f = [&] { return probe(g, linear_forward(l, x)); };
        stats["linear"].add(std::max({relative_error(an.weight, numeric_gradient(f, l.weight)),
                                      relative_error(an.bias, numeric_gradient(f, l.bias)),
                                      relative_error(an.input, numeric_gradient(f, x))}));
    }
    for (int seed = 0; stats["relu"].cases < kCases; ++seed) {
        Rng rng = make_rng(static_cast<std::uint64_t>(seed), 0xa2);
        const auto r = uniform_size(rng, 1, 16), c = uniform_size(rng, 1, 8);
        Matrix x = uniform_matrix(r, c, rng);
        bool near_zero = false;
        for (double v : x.flat()) near_zero |= std::abs(v) < 1e-3;
        if (near_zero) continue;
        const Matrix g = uniform_matrix(r, c, rng);
        auto f = [&] { return probe(g, relu(x)); };
        stats["relu"].add(relative_error(relu_backward(x, g), numeric_gradient(f, x)));
    }
    for (int seed = 0; stats["cosine logits"].cases < kCases; ++seed) {
        Rng rng = make_rng(static_cast<std::uint64_t>(seed), 0xa3);
        const auto classes = uniform_size(rng, 1, 8), dim = uniform_size(rng, 2, 16), n = uniform_size(rng, 1, 6);
        CosineClassifier c{uniform_matrix(classes, dim, rng), 20.0};
        Matrix x = uniform_matrix(dim, n, rng);
        const Matrix g = uniform_matrix(classes, n, rng);
        const auto an = cosine_backward(c, x, g);
        auto f = [&] { return probe(g, cosine_logits(c, x)); };
        stats["cosine logits"].add(std::max(relative_error(an.weight, numeric_gradient(f, c.weight)),
                                             relative_error(an.input, numeric_gradient(f, x))));
    }
    for (int seed = 0; stats["softmax-CE"].cases < kCases; ++seed) {
        Rng rng = make_rng(static_cast<std::uint64_t>(seed), 0xa4);
        const auto classes = uniform_size(rng, 2, 8);
        Matrix z = uniform_matrix(classes, 1, rng, -3, 3);
        const std::size_t y = uniform_index(rng, classes);
        const auto an = cross_entropy(softmax(z.flat()), y);
        auto f = [&] { return cross_entropy(softmax(z.flat()), y).loss; };
        stats["softmax-CE"].add(relative_error(Matrix(classes, 1, an.grad), numeric_gradient(f, z)));
    }
    for (int seed = 0; stats["margin loss"].cases < kCases; ++seed) {
        Rng rng = make_rng(static_cast<std::uint64_t>(seed), 0xa5);
        const auto c = uniform_size(rng, 2, 8);
        Matrix s = uniform_matrix(c, 1, rng, 0.0, 1.0);
        const std::size_t y = uniform_index(rng, c);
        bool near_kink = false;
        for (std::size_t j = 0; j < c; ++j) near_kink |= j != y && std::abs(s(y, 0) - s(j, 0)) < 1e-3;
        if (near_kink) continue;
        const auto an = margin_loss_sample(s.flat(), y);
        auto f = [&] { return margin_loss_sample(s.flat(), y).loss; };
        stats["margin loss"].add(relative_error(Matrix(c, 1, an.grad), numeric_gradient(f, s)));
    }
    for (int seed = 0; stats["smooth-L1"].cases < kCases; ++seed) {
        Rng rng = make_rng(static_cast<std::uint64_t>(seed), 0xa6);
        const auto n = uniform_size(rng, 1, 16);
        Matrix p = uniform_matrix(n, 1, rng, -3, 3);
        const Matrix t = uniform_matrix(n, 1, rng, -1, 1);
        bool near = false;
        for (std::size_t i = 0; i < n; ++i) near |= std::abs(std::abs(p(i, 0) - t(i, 0)) - 1.0) < 1e-3;
        if (near) continue;
        const auto an = smooth_l1(p.flat(), t.flat());
        auto f = [&] { return smooth_l1(p.flat(), t.flat()).loss; };
        stats["smooth-L1"].add(relative_error(Matrix(n, 1, an.grad), numeric_gradient(f, p)));
    }
    for (int seed = 0; stats["cosface"].cases < kCases || stats["arcface"].cases < kCases; ++seed) {
        Rng rng = make_rng(static_cast<std::uint64_t>(seed), 0xa7);
        const auto classes = uniform_size(rng, 2, 8), dim = uniform_size(rng, 2, 16), n = uniform_size(rng, 1, 5);
        CosineClassifier c{uniform_matrix(classes, dim, rng), 10.0};
        Matrix x = uniform_matrix(dim, n, rng);
        std::vector<std::size_t> y(n);
        for (auto& v : y) v = uniform_index(rng, classes);
        const Matrix g = uniform_matrix(classes, n, rng);
        const MarginScope scope{};
        auto fc = [&] { return probe(g, cosface_logits(c, x, y, 0.35, scope)); };
        const auto ac = cosface_backward(c, x, g);
        stats["cosface"].add(std::max(relative_error(ac.weight, numeric_gradient(fc, c.weight)),
                                      relative_error(ac.input, numeric_gradient(fc, x))));
        const Matrix p = cosine_logits(c, x);
        bool near_clamp = false;
        for (std::size_t s = 0; s < n; ++s) {
            const double th = std::acos(std::clamp(p(y[s], s) / c.tau, -1.0, 1.0));
            near_clamp |= std::abs(th - (std::numbers::pi - 0.5)) < 1e-2 || th < 1e-2;
        }
        if (near_clamp) continue;
        auto fa = [&] { return probe(g, arcface_logits(c, x, y, 0.5, scope)); };
        const auto aa = arcface_backward(c, x, y, 0.5, scope, g);
        stats["arcface"].add(std::max(relative_error(aa.weight, numeric_gradient(fa, c.weight)),
                                      relative_error(aa.input, numeric_gradient(fa, x))));
    }

    Verdict v;
    for (const auto& [op, s] : stats) {
        v.check(s.cases >= kCases && s.worst < kTol,
                op + ": " + std::to_string(s.cases) + " cases, worst relative error " + fmt(s.worst));
    }
    const double secs = since(t0);
    v.check(secs < 30.0, "runtime " + fmt(secs) + " s < 30 s");
    return v;
}

// ---- 3: margin identities -------------------------------------------------------------------------

Verdict margin_identities() {
    Verdict v;
    for (std::size_t c : {2u, 3u, 5u, 8u, 21u}) {
        const std::vector<double> s(c, 1.0 / static_cast<double>(c));
        const double l = margin_loss_sample(s, 0, 1e-7).loss;
        const double want = static_cast<double>(c - 1) * 16.1181;
        v.check(std::abs(l - want) <= 1e-3,
                "uniform C=" + std::to_string(c) + ": " + fmt(l) + " vs " + fmt(want));
    }
    std::vector<double> hot(5, 0.0);
    hot[2] = 1.0;
    const double one_hot = margin_loss_sample(hot, 2).loss;
    v.check(one_hot <= 1e-6, "one-hot correct: " + fmt(one_hot));

    LabelPartition part{{"b0"}, {"n0"}, "bg"};
    Rng rng = make_rng(3, 3);
    const Matrix probs = uniform_matrix(3, 6, rng, 0.0, 1.0);
    const auto zero = set_specialized_margin(probs, {"b0", "n0", "bg", "b0", "n0", "bg"}, part, {0, 0, 0, 1e-7});
    v.check(zero.loss == 0.0, "alpha=beta=gamma=0 gives exactly " + fmt(zero.loss));

    bool cos_equal = true, arc_equal = true;
    for (int seed = 0; seed < 50; ++seed) {
        Rng r = make_rng(static_cast<std::uint64_t>(seed), 0xb1);
        const auto classes = uniform_size(r, 2, 8), dim = uniform_size(r, 1, 16), n = uniform_size(r, 1, 8);
        const CosineClassifier c{uniform_matrix(classes, dim, r), 20.0};
        const Matrix x = uniform_matrix(dim, n, r);
        std::vector<std::size_t> y(n);
        for (auto& l : y) l = uniform_index(r, classes);
        const Matrix plain = cosine_logits(c, x);
        cos_equal = cos_equal && bitwise_equal(cosface_logits(c, x, y, 0.0), plain);
        arc_equal = arc_equal && bitwise_equal(arcface_logits(c, x, y, 0.0), plain);
    }
    v.check(cos_equal, "CosFace m=0 bitwise equal to cosine logits (50 cases)");
    v.check(arc_equal, "ArcFace m=0 bitwise equal to cosine logits (50 cases)");
    return v;
}

// ---- 4: similarity axioms -------------------------------------------------------------------------

Verdict similarity_axioms() {
    Verdict v;
    int symmetric = 0, in_range = 0, diagonal = 0, subsumes = 0, pairs = 0, nodes = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng = make_rng(seed, 0xc1);
        const std::size_t n = uniform_size(rng, 2, 30);
        std::map<std::string, std::vector<std::string>> parents;
        std::string text;
        std::vector<std::string> ids;
        for (std::size_t i = 0; i < n; ++i) {
            const std::string id = "t" + std::to_string(i);
            std::set<std::size_t> chosen;
            if (i > 0) {
                const std::size_t k = 1 + uniform_index(rng, std::min<std::size_t>(i, 3));
                while (chosen.size() < k) chosen.insert(uniform_index(rng, i));
            }
            std::string joined;
            for (auto c : chosen) {
                parents[id].push_back("t" + std::to_string(c));
                joined += (joined.empty() ? "" : ",") + ("t" + std::to_string(c));
            }
            text += id + "\t" + joined + "\t" + std::to_string(1 + uniform_index(rng, 30)) + "\n";
            ids.push_back(id);
        }
        auto ancestors = [&](const std::string& id) {
            std::set<std::string> seen{id};
            std::vector<std::string> stack{id};
            while (!stack.empty()) {
                const auto cur = stack.back();
                stack.pop_back();
                for (const auto& p : parents[cur]) {
                    if (seen.insert(p).second) stack.push_back(p);
                }
            }
            return seen;
        };
        const auto tax = parse_taxonomy(text);
        for (const auto& a : ids) {
            ++nodes;
            diagonal += lin_similarity(tax, a, a) == 1.0 ? 1 : 0;
            for (const auto& b : ids) {
                ++pairs;
                const double ab = lin_similarity(tax, a, b), ba = lin_similarity(tax, b, a);
                symmetric += ab == ba ? 1 : 0;
                in_range += ab >= 0.0 && ab <= 1.0 ? 1 : 0;
                const auto l = lcs(tax, a, b);
                subsumes += ancestors(a).count(l) && ancestors(b).count(l) ? 1 : 0;
            }
        }
    }
    v.check(symmetric == pairs, "symmetric: " + std::to_string(symmetric) + "/" + std::to_string(pairs));
    v.check(in_range == pairs, "in [0,1]: " + std::to_string(in_range) + "/" + std::to_string(pairs));
    v.check(diagonal == nodes, "diagonal 1: " + std::to_string(diagonal) + "/" + std::to_string(nodes));
    v.check(subsumes == pairs, "lcs subsumes both: " + std::to_string(subsumes) + "/" + std::to_string(pairs));
    const auto toy = parse_taxonomy("root\t\t50\nanimal\troot\t0\ndog\tanimal\t25\ncat\tanimal\t25\n");
    const double hand = lin_similarity(toy, "dog", "cat");
    v.check(hand == 0.5, "hand case lin(dog, cat) = " + fmt(hand));
    return v;
}

// ---- 5: pipeline behaviour ------------------------------------------------------------------------

Verdict pipeline_behaviour() {
    constexpr int kSeeds = 20;
    const auto t0 = Clock::now();
    const int threads = omp_get_max_threads();
    omp_set_num_threads(1);  // the runtime bound is per core
    int aligned = 0, deconfused = 0;
    double fadi_novel = 0, tfa_novel = 0, fadi_base = 0, pre_base = 0;
    for (int s = 0; s < kSeeds; ++s) {
        RunConfig cfg = load_run_config(std::string(FADI_CONFIG_DIR) + "/default.json");
        cfg.apply_seed(static_cast<std::uint64_t>(s));
        const auto o = run_pipeline(cfg, {true, true});
        aligned += o.alignment_after > o.alignment_before ? 1 : 0;
        deconfused += novel_to_associated_confusion(o.fadi_report, o.map) <
                              novel_to_associated_confusion(*o.association_only_report, o.map)
                          ? 1
                          : 0;
        fadi_novel += o.fadi_report.novel_accuracy / kSeeds;
        tfa_novel += o.tfa_report->novel_accuracy / kSeeds;
        fadi_base += o.fadi_report.base_accuracy / kSeeds;
        pre_base += o.base_report.base_accuracy / kSeeds;
    }
    omp_set_num_threads(threads);
    const double secs = since(t0);
    Verdict v;
    v.check(aligned >= 18, "(a) alignment increased on " + std::to_string(aligned) + "/20 seeds (need 18)");
    v.check(deconfused >= 16,
            "(b) novel->associated confusion below association-only on " + std::to_string(deconfused) + "/20 (need 16)");
    v.check(fadi_novel >= tfa_novel, "(c) mean novel accuracy FADI " + fmt(fadi_novel) + " vs TFA " + fmt(tfa_novel));
    v.check(std::abs(fadi_base - pre_base) <= 0.05,
            "(d) mean base accuracy FADI " + fmt(fadi_base) + " vs base-train " + fmt(pre_base));
    v.check(secs < 300.0, "runtime " + fmt(secs) + " s on one thread < 300 s");
    return v;
}

// ---- 6: schedule and beta sweep -------------------------------------------------------------------

int run_cli(std::vector<std::string> args, std::string* out_text = nullptr) {
    args.insert(args.begin(), "fadi");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
    if (out_text) *out_text = out.str();
    if (code != 0) std::cout << "    cli: " << err.str();
    return code;
}

Verdict schedule_and_sweep(const fs::path& work) {
    Verdict v;
    for (int k : {1, 2, 3, 5, 10}) {
        const auto m = margin_schedule(k);
        const bool exact = m.beta == 1.0 / k && m.alpha == 1.0 / (3.0 * k) && m.gamma == 0.001;
        v.check(exact, "K=" + std::to_string(k) + ": beta " + fmt(m.beta) + " alpha " + fmt(m.alpha) + " gamma " +
                           fmt(m.gamma));
    }
    const auto grid = work / "beta_grid.json";
    std::ofstream(grid) << R"({"K": [1], "beta": [1, 0.5, 0.33, 0.2]})";
    std::string csv;
    const int code = run_cli({"sweep", "--config", std::string(FADI_CONFIG_DIR) + "/default.json", "--grid",
                              grid.string()},
                             &csv);
    v.check(code == 0, "sweep exit code " + std::to_string(code));
    std::istringstream in(csv);
    std::set<std::string> betas;
    int rows = 0, means = 0;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
        if (cells.size() != 11) continue;
        (cells[1] == "mean" ? means : rows) += 1;
        betas.insert(cells[5]);
    }
    v.check(rows == 4 && means == 4 && betas.size() == 4,
            "sweep reported " + std::to_string(rows) + " seed rows and " + std::to_string(means) +
                " aggregates over " + std::to_string(betas.size()) + " beta values");
    return v;
}

// ---- 7: determinism -------------------------------------------------------------------------------

Verdict determinism(const fs::path& work) {
    Verdict v;
    const auto a = work / "run_a", b = work / "run_b";
    const std::string cfg = std::string(FADI_CONFIG_DIR) + "/default.json";
    const int ca = run_cli({"run", "--config", cfg, "--stage", "all", "--output-dir", a.string()});
    const int cb = run_cli({"run", "--config", cfg, "--stage", "all", "--output-dir", b.string()});
    v.check(ca == 0 && cb == 0, "both runs exit 0");
    for (const char* f : {"report.json", "base.ckpt.json", "associate.ckpt.json", "discriminate.ckpt.json"}) {
        const auto x = slurp(a / f), y = slurp(b / f);
        v.check(!x.empty() && x == y, std::string(f) + " byte-identical (" + std::to_string(x.size()) + " bytes)");
    }
    return v;
}

}  // namespace

int main() {
    const auto work = fs::temp_directory_path() / "fadi_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"assignment reproduction on the VOC fixtures", assignment_reproduction},
        {"gradient correctness against finite differences", gradient_correctness},
        {"margin-loss identities", margin_identities},
        {"similarity axioms on random toy taxonomies", similarity_axioms},
        {"pipeline behaviour on 20 default worlds", pipeline_behaviour},
        {"margin schedule and beta sweep", [&] { return schedule_and_sweep(work); }},
        {"determinism of run --stage all", [&] { return determinism(work); }},
    };
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v.check(false, std::string("exception: ") + e.what());
        }
        report(static_cast<int>(i + 1), criteria[i].first, v);
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size()
              << " criteria passed\n";
    fs::remove_all(work);
    return failures == 0 ? 0 : 1;
}
