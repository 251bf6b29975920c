#include "fadi/cli.hpp"

#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "fadi/error.hpp"
#include "text_util.hpp"

namespace fadi {

namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json read_json(const std::string& path) {
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("'" + path + "': " + e.what());
    }
}

void write_json(const nlohmann::json& j, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

std::vector<std::string> split_names(const std::string& csv) {
    std::vector<std::string> out;
    for (auto part : detail::split(csv, ',')) {
        const auto t = detail::trim(part);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

double mean_novel_compactness(const LinearLayer& g, const Episode& ep) {
    const Matrix z = relu(linear_forward(g, as_columns(ep.test.features)));
    Matrix rows(z.cols(), z.rows());
    for (std::size_t s = 0; s < z.cols(); ++s) {
        for (std::size_t d = 0; d < z.rows(); ++d) rows(s, d) = z(d, s);
    }
    double total = 0.0;
    for (const auto& n : ep.partition.novel_ids) total += class_compactness(rows, ep.test.labels, n);
    return ep.partition.novel_ids.empty() ? 0.0 : total / static_cast<double>(ep.partition.novel_ids.size());
}

// ---- run -------------------------------------------------------------------

struct RunPaths {
    fs::path dir;
    fs::path manifest() const { return dir / "manifest.json"; }
    fs::path base_ckpt() const { return dir / "base.ckpt.json"; }
    fs::path association() const { return dir / "association.json"; }
    fs::path associate_ckpt() const { return dir / "associate.ckpt.json"; }
    fs::path discriminate_ckpt() const { return dir / "discriminate.ckpt.json"; }
    fs::path tfa_ckpt() const { return dir / "tfa.ckpt.json"; }
    fs::path report() const { return dir / "report.json"; }
    fs::path tfa_report() const { return dir / "report_tfa.json"; }
    fs::path features() const { return dir / "features.csv"; }
    fs::path loss(const std::string& stage) const { return dir / ("loss_" + stage + ".csv"); }
};

Checkpoint require_checkpoint(const fs::path& p, const std::string& stage) {
    if (!fs::exists(p)) {
        throw DataError("missing upstream checkpoint '" + p.string() + "'; run --stage " + stage + " first");
    }
    return load_checkpoint(p.string());
}

nlohmann::json report_json(const EvalReport& rep, const std::string& stage, const nlohmann::json& extra) {
    nlohmann::json j = rep.to_json();
    j["stage"] = stage;
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    return j;
}

void stage_base(const RunConfig& cfg, const Episode& ep, const RunPaths& paths, std::ostream& err) {
    auto res = base_train(ep, cfg.d_hidden, cfg.tau, cfg.base_sgd);
    save_checkpoint(to_checkpoint(res.params, "fc2"), paths.base_ckpt().string());
    write_loss_trace(res.loss_trace, paths.loss("base").string());
    err << "base: " << res.loss_trace.size() << " iterations\n";
}

void stage_associate(const RunConfig& cfg, const Episode& ep, const RunPaths& paths, std::ostream& err) {
    const auto pre = single_head_from_checkpoint(require_checkpoint(paths.base_ckpt(), "base"), "fc2");
    const auto map = assign(similarity_for(ep, cfg.association_source), parse_policy(cfg.policy));
    write_json(map.to_json(), paths.association());
    auto res = association_step(pre, ep, map, cfg.sgd, cfg.init);
    save_checkpoint(to_checkpoint(res.params), paths.associate_ckpt().string());
    write_loss_trace(res.loss_trace, paths.loss("associate").string());
    err << "associate: alignment " << alignment_cosine(pre.g, pre.cls, ep, map) << " -> "
        << alignment_cosine(res.params, pre.cls, ep, map) << '\n';
}

AssociationMap load_association(const RunPaths& paths) {
    if (!fs::exists(paths.association())) {
        throw DataError("missing upstream association map '" + paths.association().string() +
                        "'; run --stage associate first");
    }
    return AssociationMap::from_json(read_json(paths.association().string()));
}

void stage_evaluate(const RunConfig& cfg, const Episode& ep, const RunPaths& paths, std::ostream& err) {
    const auto d = discriminated_from_checkpoint(require_checkpoint(paths.discriminate_ckpt(), "discriminate"));
    const auto map = load_association(paths);
    const Model model = dual_head_model(d.head);
    const EvalReport rep = evaluate(model, ep);
    write_json(report_json(rep, "discriminate",
                           {{"association", map.to_json()},
                            {"margin", d.margin.to_json()},
                            {"seed", cfg.seed},
                            {"novel_to_associated_confusion", novel_to_associated_confusion(rep, map)}}),
               paths.report());
    export_features(model, ep, "discriminate", paths.features().string());
    err << "evaluate: base " << rep.base_accuracy << " novel " << rep.novel_accuracy << " overall "
        << rep.overall_accuracy << '\n';
}

void stage_discriminate(const RunConfig& cfg, const Episode& ep, const RunPaths& paths, std::ostream& err) {
    const auto pre = single_head_from_checkpoint(require_checkpoint(paths.base_ckpt(), "base"), "fc2");
    const auto w_asso = fc2_prime_from_checkpoint(require_checkpoint(paths.associate_ckpt(), "associate"));
    const auto map = load_association(paths);
    const MarginConfig m = cfg.effective_margin();
    err << "discriminate: margin alpha=" << m.alpha << " beta=" << m.beta << " gamma=" << m.gamma << '\n';
    auto res = discrimination_step(pre, w_asso, map, ep, m, cfg.sgd, cfg.with_regression, cfg.init);
    save_checkpoint(to_checkpoint(res.params), paths.discriminate_ckpt().string());
    write_loss_trace(res.loss_trace, paths.loss("discriminate").string());
    stage_evaluate(cfg, ep, paths, err);
}

void stage_tfa(const RunConfig& cfg, const Episode& ep, const RunPaths& paths, std::ostream& err) {
    const auto pre = single_head_from_checkpoint(require_checkpoint(paths.base_ckpt(), "base"), "fc2");
    auto res = tfa_baseline_finetune(pre, ep, cfg.sgd, cfg.tfa);
    save_checkpoint(to_checkpoint(res.params, "fc2"), paths.tfa_ckpt().string());
    write_loss_trace(res.loss_trace, paths.loss("tfa").string());
    const EvalReport rep = evaluate(single_head_model(res.params, ep.partition), ep);
    write_json(report_json(rep, "tfa", {{"tfa", cfg.tfa.to_json()}, {"seed", cfg.seed}}), paths.tfa_report());
    err << "tfa: base " << rep.base_accuracy << " novel " << rep.novel_accuracy << '\n';
}

std::vector<std::string> output_files(const std::vector<std::string>& stages, const RunPaths& p) {
    std::vector<std::string> out{p.manifest().string()};
    for (const auto& s : stages) {
        if (s == "base") {
            out.push_back(p.base_ckpt().string());
            out.push_back(p.loss("base").string());
        } else if (s == "associate") {
            out.push_back(p.association().string());
            out.push_back(p.associate_ckpt().string());
            out.push_back(p.loss("associate").string());
        } else if (s == "discriminate") {
            out.push_back(p.discriminate_ckpt().string());
            out.push_back(p.loss("discriminate").string());
        } else if (s == "evaluate") {
            out.push_back(p.report().string());
            out.push_back(p.features().string());
        } else if (s == "tfa") {
            out.push_back(p.tfa_ckpt().string());
            out.push_back(p.loss("tfa").string());
            out.push_back(p.tfa_report().string());
        }
    }
    return out;
}

int cmd_run(const std::string& config_path, const std::string& stage, const std::string& output_override,
            std::ostream& err) {
    RunConfig cfg = load_run_config(config_path);
    if (!output_override.empty()) cfg.output_dir = output_override;
    std::vector<std::string> stages;
    if (stage == "all") stages = {"base", "associate", "discriminate", "evaluate"};
    else stages = {stage};

    RunPaths paths{cfg.output_dir};
    fs::create_directories(paths.dir);
    write_json({{"tool", kToolVersion},
                {"config", cfg.to_json()},
                {"seed", cfg.seed},
                {"stages", stages},
                {"outputs", output_files(stages, paths)}},
               paths.manifest());

    const Episode ep = generate_world(cfg.world);
    for (const auto& s : stages) {
        if (s == "base") stage_base(cfg, ep, paths, err);
        else if (s == "associate") stage_associate(cfg, ep, paths, err);
        else if (s == "discriminate") {
            // discriminate already evaluates; `all` lists evaluate separately for the manifest
            stage_discriminate(cfg, ep, paths, err);
            if (stage == "all") break;
        } else if (s == "evaluate") stage_evaluate(cfg, ep, paths, err);
        else if (s == "tfa") stage_tfa(cfg, ep, paths, err);
    }
    return static_cast<int>(ExitCode::kOk);
}

// ---- assign ----------------------------------------------------------------

int cmd_assign(const std::string& sim_path, const std::string& tax_path, const std::string& novel,
               const std::string& base, const std::string& policy, std::ostream& out) {
    if (sim_path.empty() == tax_path.empty()) throw UsageError("give exactly one of --sim or --taxonomy");
    const AssignPolicy pol = parse_policy(policy);
    SimilarityMatrix sim;
    if (!sim_path.empty()) {
        if (!novel.empty() || !base.empty()) throw UsageError("--novel/--base only apply with --taxonomy");
        sim = load_similarity_matrix(read_file(sim_path));
    } else {
        if (novel.empty() || base.empty()) throw UsageError("--taxonomy needs --novel and --base");
        sim = build_similarity_matrix(parse_taxonomy(read_file(tax_path)), split_names(novel), split_names(base));
    }
    out << assign(sim, pol).to_json().dump(2) << '\n';
    return static_cast<int>(ExitCode::kOk);
}

// ---- sweep -----------------------------------------------------------------

struct SweepCell {
    int shots = 1;
    std::string policy;
    MarginConfig margin;
    nlohmann::json label;
};

std::vector<SweepCell> expand_grid(const nlohmann::json& grid, const RunConfig& base) {
    static const std::vector<std::string> keys{"K", "policy", "alpha", "beta", "gamma"};
    if (!grid.is_object() || grid.empty()) throw DataError("sweep: empty grid");
    for (auto it = grid.begin(); it != grid.end(); ++it) {
        if (std::find(keys.begin(), keys.end(), it.key()) == keys.end()) {
            throw DataError("sweep: unknown grid key '" + it.key() + "'");
        }
        if (!it.value().is_array() || it.value().empty()) throw DataError("sweep: empty grid axis '" + it.key() + "'");
    }
    std::vector<nlohmann::json> combos{nlohmann::json::object()};
    for (const auto& k : keys) {
        if (!grid.contains(k)) continue;
        std::vector<nlohmann::json> next;
        for (const auto& c : combos) {
            for (const auto& v : grid[k]) {
                auto n = c;
                n[k] = v;
                next.push_back(n);
            }
        }
        combos = std::move(next);
    }
    std::vector<SweepCell> cells;
    try {
        for (const auto& c : combos) {
            SweepCell cell;
            cell.label = c;
            cell.shots = c.value("K", base.world.shots);
            cell.policy = c.value("policy", base.policy);
            RunConfig tmp = base;
            tmp.world.shots = cell.shots;
            cell.margin = tmp.effective_margin();
            cell.margin.alpha = c.value("alpha", cell.margin.alpha);
            cell.margin.beta = c.value("beta", cell.margin.beta);
            cell.margin.gamma = c.value("gamma", cell.margin.gamma);
            cell.margin.validate();
            parse_policy(cell.policy);
            cells.push_back(std::move(cell));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("sweep grid: ") + e.what());
    }
    return cells;
}

struct SweepRow {
    double base_accuracy = 0.0, novel_accuracy = 0.0, overall_accuracy = 0.0, confusion = 0.0;
};

int cmd_sweep(const std::string& config_path, const std::string& grid_path, int seeds, const std::string& out_path,
              std::ostream& out) {
    if (seeds <= 0) throw UsageError("--seeds must be positive");
    const RunConfig base = load_run_config(config_path);
    const auto cells = expand_grid(read_json(grid_path), base);
    const std::size_t jobs = cells.size() * static_cast<std::size_t>(seeds);
    std::vector<SweepRow> rows(jobs);
    std::vector<std::exception_ptr> errors(jobs);

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(jobs); ++j) {
        try {
            const auto& cell = cells[static_cast<std::size_t>(j) / static_cast<std::size_t>(seeds)];
            const auto s = static_cast<std::uint64_t>(j % seeds);
            RunConfig cfg = base;
            cfg.world.shots = cell.shots;
            cfg.policy = cell.policy;
            cfg.margin = cell.margin;
            cfg.apply_seed(base.seed + s);
            const auto o = run_pipeline(cfg);
            rows[static_cast<std::size_t>(j)] = {o.fadi_report.base_accuracy, o.fadi_report.novel_accuracy,
                                                 o.fadi_report.overall_accuracy,
                                                 novel_to_associated_confusion(o.fadi_report, o.map)};
        } catch (...) {
            errors[static_cast<std::size_t>(j)] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path, std::ios::binary);
        if (!file) throw DataError("cannot open '" + out_path + "' for writing");
    }
    std::ostream& os = out_path.empty() ? out : file;
    auto f = detail::format_double;
    os << "cell,seed,K,policy,alpha,beta,gamma,base_accuracy,novel_accuracy,overall_accuracy,"
          "novel_to_associated_confusion\n";
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto& cell = cells[c];
        SweepRow sum;
        for (int s = 0; s < seeds; ++s) {
            const auto& r = rows[c * static_cast<std::size_t>(seeds) + static_cast<std::size_t>(s)];
            os << c << ',' << base.seed + static_cast<std::uint64_t>(s) << ',' << cell.shots << ',' << cell.policy << ','
               << f(cell.margin.alpha) << ',' << f(cell.margin.beta) << ',' << f(cell.margin.gamma) << ','
               << f(r.base_accuracy) << ',' << f(r.novel_accuracy) << ',' << f(r.overall_accuracy) << ','
               << f(r.confusion) << '\n';
            sum.base_accuracy += r.base_accuracy;
            sum.novel_accuracy += r.novel_accuracy;
            sum.overall_accuracy += r.overall_accuracy;
            sum.confusion += r.confusion;
        }
        const double n = seeds;
        os << c << ",mean," << cell.shots << ',' << cell.policy << ',' << f(cell.margin.alpha) << ','
           << f(cell.margin.beta) << ',' << f(cell.margin.gamma) << ',' << f(sum.base_accuracy / n) << ','
           << f(sum.novel_accuracy / n) << ',' << f(sum.overall_accuracy / n) << ',' << f(sum.confusion / n) << '\n';
    }
    if (!out_path.empty() && !file) throw DataError("failed writing '" + out_path + "'");
    return static_cast<int>(ExitCode::kOk);
}

}  // namespace

// ---- config ------------------------------------------------------------------

MarginConfig RunConfig::effective_margin() const {
    return margin ? *margin : margin_schedule(world.shots);
}

void RunConfig::apply_seed(std::uint64_t s) {
    seed = s;
    world.seed = s;
    base_sgd.seed = s;
    sgd.seed = s;
}

void RunConfig::validate() const {
    world.validate();
    base_sgd.validate();
    sgd.validate();
    if (d_hidden == 0) throw DataError("config: d_hidden must be positive");
    if (!(tau > 0.0)) throw DataError("config: tau must be positive");
    if (margin) margin->validate();
    if (association_source != "taxonomy" && association_source != "affinity") {
        throw DataError("config: association.source must be 'taxonomy' or 'affinity'");
    }
    parse_policy(policy);
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["world"] = world.to_json();
    j["d_hidden"] = d_hidden;
    j["tau"] = tau;
    j["base_sgd"] = base_sgd.to_json();
    j["sgd"] = sgd.to_json();
    j["margin"] = margin ? margin->to_json() : nlohmann::json("schedule");
    j["association"] = {{"source", association_source}, {"policy", policy}};
    j["with_regression"] = with_regression;
    j["init"] = init.to_json();
    j["tfa"] = tfa.to_json();
    j["output_dir"] = output_dir;
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
        if (!j.is_object()) throw DataError("config: expected a JSON object");
        c.seed = j.value("seed", c.seed);
        if (j.contains("world")) c.world = WorldConfig::from_json(j["world"]);
        c.d_hidden = j.value("d_hidden", c.d_hidden);
        c.tau = j.value("tau", c.tau);
        if (j.contains("sgd")) c.sgd = SgdConfig::from_json(j["sgd"]);
        c.base_sgd = j.contains("base_sgd") ? SgdConfig::from_json(j["base_sgd"]) : c.sgd;
        if (j.contains("margin")) {
            const auto& m = j["margin"];
            if (m.is_string()) {
                if (m.get<std::string>() != "schedule") throw DataError("config: margin must be \"schedule\" or an object");
            } else {
                c.margin = MarginConfig::from_json(m);
            }
        }
        if (j.contains("association")) {
            c.association_source = j["association"].value("source", c.association_source);
            c.policy = j["association"].value("policy", c.policy);
        }
        c.with_regression = j.value("with_regression", c.with_regression);
        if (j.contains("init")) c.init = InitOptions::from_json(j["init"]);
        if (j.contains("tfa")) c.tfa = TfaOptions::from_json(j["tfa"]);
        c.output_dir = j.value("output_dir", c.output_dir);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("config JSON: ") + e.what());
    }
    c.apply_seed(c.seed);
    c.validate();
    return c;
}

RunConfig load_run_config(const std::string& path) {
    RunConfig cfg = RunConfig::from_json(read_json(path));
    if (const char* env = std::getenv("FADI_SEED"); env && *env) {
        std::uint64_t s = 0;
        const std::string_view v(env);
        const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), s);
        if (ec != std::errc() || ptr != v.data() + v.size()) throw UsageError("FADI_SEED is not an unsigned integer");
        cfg.apply_seed(s);
    }
    return cfg;
}

SimilarityMatrix similarity_for(const Episode& episode, const std::string& source) {
    if (source == "affinity") return episode.ground_truth_affinity;
    if (source == "taxonomy") {
        return build_similarity_matrix(parse_taxonomy(episode.taxonomy_text), episode.partition.novel_ids,
                                       episode.partition.base_ids);
    }
    throw DataError("unknown similarity source '" + source + "'");
}

double novel_to_associated_confusion(const EvalReport& report, const AssociationMap& map) {
    if (report.novel_names.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < report.novel_names.size(); ++i) {
        const auto& b = map.base_for(report.novel_names[i]);
        const auto it = std::find(report.class_names.begin(), report.class_names.end(), b);
        if (it == report.class_names.end()) throw DataError("report has no column for '" + b + "'");
        total += report.score_confusion(i, static_cast<std::size_t>(it - report.class_names.begin()));
    }
    return total / static_cast<double>(report.novel_names.size());
}

PipelineOutcome run_pipeline(const RunConfig& cfg, const PipelineExtras& extras) {
    cfg.validate();
    PipelineOutcome o;
    o.episode = generate_world(cfg.world);
    const auto& ep = o.episode;
    o.map = assign(similarity_for(ep, cfg.association_source), parse_policy(cfg.policy));
    o.base = base_train(ep, cfg.d_hidden, cfg.tau, cfg.base_sgd);
    const auto& pre = o.base.params;
    o.base_report = evaluate(single_head_model(pre, ep.partition), ep);
    o.alignment_before = alignment_cosine(pre.g, pre.cls, ep, o.map);
    o.compactness_before = mean_novel_compactness(pre.g, ep);
    o.associate = association_step(pre, ep, o.map, cfg.sgd, cfg.init);
    o.alignment_after = alignment_cosine(o.associate.params, pre.cls, ep, o.map);
    o.compactness_after = mean_novel_compactness(o.associate.params, ep);
    o.discriminate = discrimination_step(pre, o.associate.params, o.map, ep, cfg.effective_margin(), cfg.sgd,
                                         cfg.with_regression, cfg.init);
    o.fadi_report = evaluate(dual_head_model(o.discriminate.params.head), ep);
    if (extras.association_only) {
        const auto r = association_only_finetune(pre, o.associate.params, o.map, ep, cfg.sgd);
        o.association_only_report = evaluate(single_head_model(r.params, ep.partition), ep);
    }
    if (extras.tfa) {
        const auto r = tfa_baseline_finetune(pre, ep, cfg.sgd, cfg.tfa);
        o.tfa_report = evaluate(single_head_model(r.params, ep.partition), ep);
    }
    return o;
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Association and discrimination few-shot fine-tuning toolkit"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    std::string sim_path, tax_path, novel, base, policy = "top1";
    auto* assign_cmd = app.add_subcommand("assign", "Assign each novel class a base class");
    assign_cmd->add_option("--sim", sim_path, "Similarity CSV (novel rows, base columns)");
    assign_cmd->add_option("--taxonomy", tax_path, "Taxonomy file (id, parents, count)");
    assign_cmd->add_option("--novel", novel, "Comma-separated novel class ids");
    assign_cmd->add_option("--base", base, "Comma-separated base class ids");
    assign_cmd->add_option("--policy", policy, "top1 | topk:K | top1-nodup | random:SEED | manual:<json>");

    std::string config_path, stage = "all", output_dir;
    auto* run_cmd = app.add_subcommand("run", "Run pipeline stages");
    run_cmd->add_option("--config", config_path, "Run config JSON")->required();
    run_cmd->add_option("--stage", stage, "base | associate | discriminate | evaluate | tfa | all")
        ->check(CLI::IsMember({"base", "associate", "discriminate", "evaluate", "tfa", "all"}));
    run_cmd->add_option("--output-dir", output_dir, "Override the config's output_dir");

    std::string sweep_config, grid_path, sweep_out;
    int seeds = 1;
    auto* sweep_cmd = app.add_subcommand("sweep", "Grid sweep over margin weights, shots and policies");
    sweep_cmd->add_option("--config", sweep_config, "Run config JSON")->required();
    sweep_cmd->add_option("--grid", grid_path, "Grid JSON, e.g. {\"beta\":[1,0.5]}")->required();
    sweep_cmd->add_option("--seeds", seeds, "Seeds per cell");
    sweep_cmd->add_option("--out", sweep_out, "CSV path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? static_cast<int>(ExitCode::kOk) : static_cast<int>(ExitCode::kUsage);
    }

    try {
        if (*assign_cmd) return cmd_assign(sim_path, tax_path, novel, base, policy, out);
        if (*run_cmd) return cmd_run(config_path, stage, output_dir, err);
        if (*sweep_cmd) return cmd_sweep(sweep_config, grid_path, seeds, sweep_out, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::kUsage);
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::kData);
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << '\n';
        return static_cast<int>(ExitCode::kNumeric);
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::kData);
    } catch (const std::exception& e) {
        err << "internal failure: " << e.what() << '\n';
        return static_cast<int>(ExitCode::kNumeric);
    }
    return static_cast<int>(ExitCode::kUsage);
}

}  // namespace fadi
