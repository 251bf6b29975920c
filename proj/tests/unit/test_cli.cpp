#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "fadi/cli.hpp"

using namespace fadi;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out, err;
};

Result cli(std::vector<std::string> args) {
    args.insert(args.begin(), "fadi");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Result r;
    r.code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string fixture(const std::string& name) { return std::string(FADI_FIXTURE_DIR) + "/" + name; }
std::string default_config() { return std::string(FADI_CONFIG_DIR) + "/default.json"; }

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("fadi_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

std::map<std::string, std::string> pairs_of(const std::string& json_text) {
    std::map<std::string, std::string> m;
    const auto j = nlohmann::json::parse(json_text);
    for (const auto& p : j.at("pairs")) m[p.at("novel").get<std::string>()] = p.at("base").get<std::string>();
    return m;
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> v;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) v.push_back(l);
    return v;
}

}  // namespace

TEST(CliAssign, SplitTwoNoDup) {
    const auto r = cli({"assign", "--sim", fixture("voc_split2.csv"), "--policy", "top1-nodup"});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::map<std::string, std::string> want{
        {"aeroplane", "boat"}, {"bottle", "pottedplant"}, {"cow", "sheep"}, {"horse", "dog"}, {"sofa", "chair"}};
    EXPECT_EQ(pairs_of(r.out), want);
}

TEST(CliAssign, TopKTwoRuns) {
    const auto r = cli({"assign", "--sim", fixture("voc_split1.csv"), "--policy", "topk:2"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(pairs_of(r.out).size(), 5u);
    EXPECT_EQ(nlohmann::json::parse(r.out).at("policy"), "topk:2");
}

TEST(CliAssign, TaxonomySource) {
    const auto dir = scratch("tax");
    write(dir / "t.txt", "root\t\t50\nanimal\troot\t0\ndog\tanimal\t25\ncat\tanimal\t25\n");
    const auto r = cli({"assign", "--taxonomy", (dir / "t.txt").string(), "--novel", "cat", "--base", "dog"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(pairs_of(r.out).at("cat"), "dog");
}

TEST(CliAssign, ManualWithUnknownClassIsDataError) {
    const auto r = cli({"assign", "--sim", fixture("voc_split1.csv"), "--policy", R"(manual:{"bird":"zebra"})"});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("zebra"), std::string::npos);
}

TEST(CliAssign, UsageErrors) {
    EXPECT_EQ(cli({"assign", "--policy", "top1"}).code, 2);
    EXPECT_EQ(cli({"assign", "--sim", fixture("voc_split1.csv"), "--taxonomy", "x"}).code, 2);
    EXPECT_EQ(cli({"assign", "--sim", fixture("voc_split1.csv"), "--policy", "best"}).code, 2);
    EXPECT_EQ(cli({"frobnicate"}).code, 2);
    EXPECT_EQ(cli({}).code, 2);
    EXPECT_EQ(cli({"run", "--config", default_config(), "--stage", "bogus"}).code, 2);
    EXPECT_EQ(cli({"assign", "--sim", "/nonexistent.csv"}).code, 3);
}

TEST(CliRun, DiscriminateWithoutUpstreamFails) {
    const auto dir = scratch("noup");
    const auto r = cli({"run", "--config", default_config(), "--stage", "discriminate", "--output-dir", dir.string()});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("missing upstream"), std::string::npos);
    // manifest comes before any stage
    ASSERT_TRUE(fs::exists(dir / "manifest.json"));
    const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(m.at("stages"), nlohmann::json::array({"discriminate"}));
    EXPECT_EQ(m.at("tool"), kToolVersion);
}

TEST(CliRun, AllStagesWriteReportAndAreByteIdentical) {
    const auto a = scratch("run_a"), b = scratch("run_b");
    const auto ra = cli({"run", "--config", default_config(), "--stage", "all", "--output-dir", a.string()});
    const auto rb = cli({"run", "--config", default_config(), "--output-dir", b.string()});
    ASSERT_EQ(ra.code, 0) << ra.err;
    ASSERT_EQ(rb.code, 0) << rb.err;
    for (const char* f : {"report.json", "base.ckpt.json", "associate.ckpt.json", "discriminate.ckpt.json",
                          "association.json", "features.csv", "loss_base.csv", "loss_associate.csv",
                          "loss_discriminate.csv"}) {
        ASSERT_TRUE(fs::exists(a / f)) << f;
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
    const auto rep = nlohmann::json::parse(slurp(a / "report.json"));
    for (const char* k : {"base_accuracy", "novel_accuracy", "overall_accuracy", "score_confusion", "compactness",
                          "separability", "association", "margin", "seed", "novel_to_associated_confusion"}) {
        EXPECT_TRUE(rep.contains(k)) << k;
    }
    EXPECT_NE(ra.err.find("discriminate: margin alpha=0.333333 beta=1 gamma=0.001"), std::string::npos) << ra.err;
    EXPECT_EQ(lines(slurp(a / "loss_base.csv")).size(), 1001u);
    EXPECT_EQ(lines(slurp(a / "loss_base.csv")).front(), "iteration,loss");
}

TEST(CliRun, RerunningDiscriminateReproducesReport) {
    const auto dir = scratch("rerun");
    ASSERT_EQ(cli({"run", "--config", default_config(), "--output-dir", dir.string()}).code, 0);
    const auto first = slurp(dir / "report.json");
    fs::remove(dir / "report.json");
    const auto r = cli({"run", "--config", default_config(), "--stage", "discriminate", "--output-dir", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(slurp(dir / "report.json"), first);
    ASSERT_EQ(cli({"run", "--config", default_config(), "--stage", "evaluate", "--output-dir", dir.string()}).code, 0);
    EXPECT_EQ(slurp(dir / "report.json"), first);
}

TEST(CliRun, TfaStage) {
    const auto dir = scratch("tfa");
    ASSERT_EQ(cli({"run", "--config", default_config(), "--stage", "base", "--output-dir", dir.string()}).code, 0);
    const auto r = cli({"run", "--config", default_config(), "--stage", "tfa", "--output-dir", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "report_tfa.json"));
    EXPECT_EQ(nlohmann::json::parse(slurp(dir / "report_tfa.json")).at("stage"), "tfa");
}

TEST(CliRun, SeedEnvironmentOverride) {
    const auto dir = scratch("env");
    setenv("FADI_SEED", "7", 1);
    const auto r = cli({"run", "--config", default_config(), "--stage", "base", "--output-dir", dir.string()});
    unsetenv("FADI_SEED");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(m.at("seed"), 7);
    EXPECT_EQ(m.at("config").at("world").at("seed"), 7);
    setenv("FADI_SEED", "x7", 1);
    EXPECT_EQ(cli({"run", "--config", default_config(), "--stage", "base", "--output-dir", dir.string()}).code, 2);
    unsetenv("FADI_SEED");
}

TEST(CliRun, BadConfigIsDataError) {
    const auto dir = scratch("badcfg");
    write(dir / "c.json", R"({"world": {"dim": -3}})");
    EXPECT_EQ(cli({"run", "--config", (dir / "c.json").string(), "--output-dir", dir.string()}).code, 3);
    write(dir / "d.json", "{not json");
    EXPECT_EQ(cli({"run", "--config", (dir / "d.json").string(), "--output-dir", dir.string()}).code, 3);
}

TEST(RunConfigJson, RoundTrip) {
    RunConfig c = load_run_config(default_config());
    c.margin = MarginConfig{0.1, 0.2, 0.3, 1e-7};
    EXPECT_EQ(RunConfig::from_json(c.to_json()).to_json(), c.to_json());
    EXPECT_EQ(RunConfig::from_json(c.to_json()).effective_margin().beta, 0.2);
}

TEST(CliSweep, OneCellOneSeed) {
    const auto dir = scratch("sweep1");
    write(dir / "g.json", R"({"beta": [0.5]})");
    const auto r = cli({"sweep", "--config", default_config(), "--grid", (dir / "g.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto l = lines(r.out);
    ASSERT_EQ(l.size(), 3u);
    EXPECT_EQ(l[0].rfind("cell,seed,K,policy,alpha,beta,gamma,", 0), 0u);
    EXPECT_EQ(l[2].rfind("0,mean,", 0), 0u);
}

TEST(CliSweep, SeedsPerCellAndOutFile) {
    const auto dir = scratch("sweep3");
    write(dir / "g.json", R"({"beta": [1, 0.5], "policy": ["top1"]})");
    const auto r = cli({"sweep", "--config", default_config(), "--grid", (dir / "g.json").string(), "--seeds", "3",
                        "--out", (dir / "s.csv").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto l = lines(slurp(dir / "s.csv"));
    ASSERT_EQ(l.size(), 1u + 2 * (3 + 1));
    int cell0 = 0;
    for (const auto& row : l) cell0 += row.rfind("0,", 0) == 0 ? 1 : 0;
    EXPECT_EQ(cell0, 4);
    // Same sweep twice: identical bytes despite parallel cells.
    ASSERT_EQ(cli({"sweep", "--config", default_config(), "--grid", (dir / "g.json").string(), "--seeds", "3",
                   "--out", (dir / "t.csv").string()})
                  .code,
              0);
    EXPECT_EQ(slurp(dir / "s.csv"), slurp(dir / "t.csv"));
}

TEST(CliSweep, EmptyOrUnknownGrid) {
    const auto dir = scratch("sweep_bad");
    write(dir / "e.json", "{}");
    write(dir / "a.json", R"({"beta": []})");
    write(dir / "u.json", R"({"lr": [0.1]})");
    for (const char* g : {"e.json", "a.json", "u.json"}) {
        EXPECT_EQ(cli({"sweep", "--config", default_config(), "--grid", (dir / g).string()}).code, 3) << g;
    }
    write(dir / "g.json", R"({"beta": [1]})");
    EXPECT_EQ(cli({"sweep", "--config", default_config(), "--grid", (dir / "g.json").string(), "--seeds", "0"}).code, 2);
}
