#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include <gtest/gtest.h>

#include "cli.hpp"

namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "cobp");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = qcs::cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cobp_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// trials.csv without the wall-clock column.
std::string strip_wall_time(const std::string& csv) {
  std::stringstream in(csv), out;
  for (std::string line; std::getline(in, line);) out << line.substr(0, line.rfind(',')) << '\n';
  return out.str();
}

const std::vector<std::string> kQuickExperiment = {"experiment", "--preset", "sparse-gaussian", "--scale", "desk",
                                                   "--seed", "7", "--trials", "1", "--max-iters", "300"};

TEST(Cli, ExperimentWritesThreeFilesDeterministically) {
  const fs::path a = scratch("exp_a"), b = scratch("exp_b");
  auto args = kQuickExperiment;
  args.insert(args.end(), {"--out", a.string()});
  const CliRun r1 = run(args);
  ASSERT_EQ(r1.code, 0) << r1.err;
  for (const char* f : {"trials.csv", "summary.json", "curves.csv"}) EXPECT_TRUE(fs::exists(a / f)) << f;

  args.back() = b.string();
  args.insert(args.end(), {"--jobs", "3"});
  ASSERT_EQ(run(args).code, 0);
  EXPECT_EQ(slurp(a / "summary.json"), slurp(b / "summary.json"));
  EXPECT_EQ(slurp(a / "curves.csv"), slurp(b / "curves.csv"));
  EXPECT_EQ(strip_wall_time(slurp(a / "trials.csv")), strip_wall_time(slurp(b / "trials.csv")));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, ExperimentHonoursOutputRootVariable) {
  const fs::path root = scratch("root");
  ::setenv(qcs::cli::kOutputRootEnv, root.c_str(), 1);
  const CliRun r = run(kQuickExperiment);
  ::unsetenv(qcs::cli::kOutputRootEnv);
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_TRUE(fs::exists(root));
  int dirs = 0;
  for (const auto& e : fs::directory_iterator(root)) {
    ++dirs;
    EXPECT_TRUE(fs::exists(e.path() / "summary.json"));
  }
  EXPECT_EQ(dirs, 1);
  fs::remove_all(root);
}

TEST(Cli, BoundsPrintsGaussianBound) {
  const CliRun r = run({"bounds", "--M", "16", "--delta", "2", "--w", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::smatch m;
  const std::regex row(R"(\n\s+16\s+([0-9.eE+-]+)\s+([0-9.eE+-]+))");
  ASSERT_TRUE(std::regex_search(r.out, m, row)) << r.out;
  EXPECT_NEAR(std::stod(m[1].str()), std::sqrt(2.0), 1e-9);
}

TEST(Cli, BoundsAcceptsAListOfM) {
  const CliRun r = run({"bounds", "--M", "16,256,4096", "--eps", "0.5", "--K", "4", "--N", "256"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("4096"), std::string::npos);
  EXPECT_NE(r.out.find("min_measurements_sparse"), std::string::npos);
}

TEST(Cli, WidthSparseCheck) {
  const CliRun r = run({"width", "--model", "sparse", "--N", "1024", "--K", "16", "--samples", "10000", "--seed", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::smatch m;
  ASSERT_TRUE(std::regex_search(r.out, m, std::regex(R"(mean_squared ([0-9.eE+-]+))")));
  EXPECT_LE(std::stod(m[1].str()), 2.0 * 16 * std::log(2.0 * 1024 / 16) + 80.0);
}

TEST(Cli, SolveReadsAnInstance) {
  const fs::path dir = scratch("solve");
  fs::create_directories(dir);
  const auto cfg = qcs::QuantizerConfig::from_bits(3);
  qcs::Instance inst;
  inst.ensemble = qcs::draw_ensemble(48, 24, qcs::Distribution::Gaussian, cfg.delta, 4);
  const qcs::Vector x0 = qcs::gen_sparse_signal(24, 3, 4);
  inst.measurements = qcs::sense(x0, inst.ensemble, cfg);
  qcs::save_instance(dir / "inst.txt", inst);

  for (const std::string method : {"cobp", "bpdn", "bpdq4"}) {
    const CliRun r = run({"solve", "--instance", (dir / "inst.txt").string(), "--method", method});
    ASSERT_EQ(r.code, 0) << method << r.err;
    EXPECT_NE(r.out.find("converged"), std::string::npos);
    std::smatch m;
    ASSERT_TRUE(std::regex_search(r.out, m, std::regex(R"(x_star((?: \S+)+))")));
    std::stringstream xs(m[1].str());
    qcs::Vector x(24);
    for (auto& v : x) xs >> v;
    EXPECT_LT((x - x0).norm(), 0.8) << method;
  }
  const CliRun lam = run({"solve", "--instance", (dir / "inst.txt").string(), "--method", "cobp-lambda", "--lambda",
                       "0.9"});
  EXPECT_EQ(lam.code, 0) << lam.err;
  const CliRun missing = run({"solve", "--instance", (dir / "inst.txt").string(), "--method", "cobp-lambda"});
  EXPECT_EQ(missing.code, 2);
  const CliRun nofile = run({"solve", "--instance", (dir / "absent.txt").string()});
  EXPECT_EQ(nofile.code, 2);
  fs::remove_all(dir);
}

TEST(Cli, ValidationErrorsExitTwo) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"experiment", "--bogus"}).code, 2);
  EXPECT_EQ(run({"experiment", "--preset", "dense"}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"bounds", "--eps", "1.5"}).code, 2);
  EXPECT_EQ(run({"width", "--model", "sparse", "--N", "4", "--K", "8"}).code, 2);
  const CliRun r = run({"bounds", "--nope"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST(Cli, HelpDocumentsPresetDefaults) {
  const CliRun r = run({"experiment", "--help"});
  EXPECT_EQ(r.code, 0);
  for (const char* s : {"--preset", "--scale", "--seed", "--out", "--jobs", "--trials", "--bits", "--max-iters",
                        "N=2048 K=16", "N=1024", "32x32 P=64"})
    EXPECT_NE(r.out.find(s), std::string::npos) << s;
}

TEST(Cli, BinaryExitCodes) {
  const std::string bin = COBP_CLI_PATH;
  EXPECT_EQ(std::system((bin + " bounds --M 16 > /dev/null").c_str()), 0);
  const int bad = std::system((bin + " bounds --unknown > /dev/null 2>&1").c_str());
  ASSERT_TRUE(WIFEXITED(bad));
  EXPECT_EQ(WEXITSTATUS(bad), 2);
}

}  // namespace
