#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>
#include <sys/wait.h>

#include "fixtures.hpp"
#include "priming/cli.hpp"

using namespace priming;
using fixtures::TempDir;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "priming");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(int(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
  return files;
}

// Small enough to run the whole chain in about a second.
std::string small_config(const TempDir& dir, std::uint64_t seed = 11) {
  PipelineConfig c;
  c.catalog_categories = 10;
  c.exemplar_size = 64;
  c.canvas_width = c.canvas_height = 320;
  c.train_scenes = 3;
  c.test_scenes = 5;
  c.level = "easy";
  c.seed = seed;
  c.noise.miss_prob = 0.1;
  c.noise.false_pos_rate = 0.2;
  c.noise.count_noise_std = 0.3;
  const auto path = dir.file("config_" + std::to_string(seed) + ".json");
  std::ofstream(path) << to_json(c).dump(2);
  return path;
}

int exit_status(const std::string& command) {
  const int status = std::system((command + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class EnvGuard {
public:
  explicit EnvGuard(const std::string& value) { ::setenv(kConfigEnvVar, value.c_str(), 1); }
  ~EnvGuard() { ::unsetenv(kConfigEnvVar); }
};

}  // namespace

TEST(Cli, HelpExitsZero) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  for (const char* sub : {"extract-masks", "prune", "synthesize", "density", "select", "evaluate", "simulate-e2e",
                          "pipeline"})
    EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
  EXPECT_EQ(run({"pipeline", "--help"}).code, 0);
  EXPECT_EQ(run({"evaluate", "--help"}).code, 0);
}

TEST(Cli, UnknownFlagPrintsUsage) {
  const auto r = run({"pipeline", "--out", "x", "--bogus"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--bogus"), std::string::npos);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"evaluate", "--pred", "p.json"}).code, 1);
}

TEST(Cli, BinaryExitCodes) {
  const std::string bin = PRIMING_CLI_PATH;
  EXPECT_EQ(exit_status(bin + " --help"), 0);
  EXPECT_EQ(exit_status(bin + " select --help"), 0);
  EXPECT_EQ(exit_status(bin + " prune --masks m --report r --nope"), 1);
  TempDir dir;
  EXPECT_EQ(exit_status(bin + " prune --masks " + dir.file("absent") + " --report " + dir.file("r.json")), 1);
}

TEST(Cli, ValidationErrorsExitOne) {
  TempDir dir;
  std::ofstream(dir.file("bad.json")) << R"({"theta_p": 2})";
  auto r = run({"--config", dir.file("bad.json"), "pipeline", "--out", dir.file("o")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("theta_p"), std::string::npos);

  std::ofstream(dir.file("typo.json")) << R"({"seeed": 1})";
  EXPECT_EQ(run({"--config", dir.file("typo.json"), "pipeline", "--out", dir.file("o")}).code, 1);
  EXPECT_EQ(run({"--config", dir.file("absent.json"), "pipeline", "--out", dir.file("o")}).code, 1);
  EXPECT_EQ(run({"synthesize", "--catalog", dir.file("nope"), "--out", dir.file("o"), "--level", "extreme"}).code, 1);
  EXPECT_EQ(run({"evaluate", "--pred", dir.file("p.json"), "--gt", dir.file("g.json"), "--report", dir.file("r.json")}).code,
            1);
  r = run({"density", "--annotations", dir.file("absent.json"), "--out", dir.file("d")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("absent.json"), std::string::npos);
}

TEST(Cli, RuntimeFailuresExitTwo) {
  TempDir dir;
  std::ofstream(dir.file("blocker")) << "a file, not a folder";
  const auto r = run({"--config", small_config(dir), "make-catalog", "--out", dir.file("blocker/catalog")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("runtime failure"), std::string::npos);
}

TEST(Cli, EchoesConfigAndSeed) {
  TempDir dir;
  const auto r = run({"--config", small_config(dir), "--seed", "99", "make-catalog", "--out", dir.file("c")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("config: {"), std::string::npos);
  EXPECT_NE(r.out.find("\"seed\":99"), std::string::npos);
  EXPECT_NE(r.out.find("seed: 99\n"), std::string::npos);
  EXPECT_NE(r.out.find("\"catalog_categories\":10"), std::string::npos);
}

TEST(Cli, EnvironmentSuppliesDefaultConfig) {
  TempDir dir;
  const EnvGuard env(small_config(dir, 4242));
  auto r = run({"make-catalog", "--out", dir.file("c")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("seed: 4242\n"), std::string::npos);
  r = run({"--config", small_config(dir, 7), "make-catalog", "--out", dir.file("c")});
  EXPECT_NE(r.out.find("seed: 7\n"), std::string::npos);
}

TEST(Cli, EvaluatePredictionsEqualToTruth) {
  TempDir dir;
  const auto cfg = small_config(dir);
  ASSERT_EQ(run({"--config", cfg, "make-catalog", "--out", dir.file("cat")}).code, 0);
  ASSERT_EQ(run({"--config", cfg, "synthesize", "--catalog", dir.file("cat"), "--count", "4", "--out", dir.file("s")}).code,
            0);
  const auto gt = dir.file("s/annotations.json");
  const auto r = run({"evaluate", "--pred", gt, "--gt", gt, "--report", dir.file("eval.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = metrics_report_from_json(Json::parse(slurp(dir.file("eval.json"))));
  EXPECT_EQ(report.overall.cacc, 1.0);
  EXPECT_EQ(report.overall.acd, 0.0);
  EXPECT_EQ(report.overall.mciou, 1.0);
  EXPECT_EQ(report.overall.map50, 1.0);
  EXPECT_EQ(report.overall.images, 4u);
}

TEST(Cli, SubcommandChain) {
  TempDir dir;
  const auto cfg = small_config(dir);
  auto ok = [&](std::vector<std::string> args) {
    args.insert(args.begin(), {"--config", cfg});
    const auto r = run(args);
    EXPECT_EQ(r.code, 0) << r.err;
    return r;
  };
  ok({"make-catalog", "--out", dir.file("cat")});
  ok({"extract-masks", "--input", dir.file("cat/images"), "--output", dir.file("masks")});
  ok({"prune", "--masks", dir.file("masks"), "--report", dir.file("prune.json")});
  const auto prune = Json::parse(slurp(dir.file("prune.json")));
  ASSERT_TRUE(prune.is_array());
  EXPECT_FALSE(prune.empty());
  ok({"synthesize", "--catalog", dir.file("cat"), "--level", "medium", "--count", "3", "--out", dir.file("scenes")});
  EXPECT_EQ(load_annotations(dir.file("scenes/annotations.json")).images.size(), 3u);
  ok({"density", "--annotations", dir.file("scenes/annotations.json"), "--sigma", "1.5", "--out", dir.file("dens")});
  std::size_t maps = 0;
  for (const auto& e : fs::directory_iterator(dir.file("dens"))) maps += e.path().extension() == ".dmap";
  EXPECT_EQ(maps, 3u);
  std::ofstream(dir.file("noise.json")) << R"({"miss_prob": 0.3})";
  const auto r = ok({"select", "--dataset", dir.file("scenes"), "--model-sim", dir.file("noise.json"), "--report",
                     dir.file("select.json")});
  EXPECT_NE(r.out.find("\"miss_prob\":0.3"), std::string::npos);
  const auto sel = priming_report_from_json(Json::parse(slurp(dir.file("select.json"))));
  EXPECT_EQ(sel.test_images, 3u);
  ok({"simulate-e2e", "--scenes", "4", "--report", dir.file("e2e.json")});
  EXPECT_EQ(priming_report_from_json(Json::parse(slurp(dir.file("e2e.json")))).test_images, 4u);
}

TEST(Cli, PipelineIsByteIdenticalAcrossRuns) {
  TempDir dir;
  const auto cfg = small_config(dir);
  const auto a = run({"--config", cfg, "pipeline", "--out", dir.file("a")});
  const auto b = run({"--config", cfg, "pipeline", "--out", dir.file("b")});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  const auto ta = tree(dir.file("a")), tb = tree(dir.file("b"));
  EXPECT_GT(ta.size(), 20u);
  EXPECT_TRUE(ta.count("report.json"));
  EXPECT_TRUE(ta.count("prune.json"));
  EXPECT_TRUE(ta.count("test/annotations.json"));
  EXPECT_EQ(ta, tb);

  const auto c = run({"--config", cfg, "--seed", "12", "pipeline", "--out", dir.file("c")});
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_NE(tree(dir.file("c")).at("test/annotations.json"), ta.at("test/annotations.json"));
}
