#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hjbk/config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("hjbk_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Runs the CLI with stdout/stderr redirected into the scratch directory; returns the exit code.
  int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + std::string(HJBK_CLI) + " " + args + " > " + (dir_ / "stdout.txt").string() +
                            " 2> " + (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  json read_json(const fs::path& p) { return json::parse(slurp(p)); }

  fs::path write_config(const std::string& name, const json& j) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << j.dump(2);
    return p;
  }

  std::string out(const std::string& sub) { return (dir_ / sub).string(); }

  fs::path dir_;
};

int csv_rows(const std::string& text) {
  int lines = 0;
  for (char c : text) lines += (c == '\n');
  return lines - 1;
}

}  // namespace

TEST_F(Cli, MissingConfigIsInputError) {
  EXPECT_EQ(run("synthesize --config /no/such/file.json"), 2);
  const json err = json::parse(slurp(dir_ / "stderr.txt"));
  EXPECT_EQ(err.at("error"), "input");
  EXPECT_NE(err.at("message").get<std::string>().find("config not found"), std::string::npos);
  EXPECT_EQ(run("synthesize not_an_experiment"), 2);
}

TEST_F(Cli, InvalidKernelDegree) {
  json j = hjbk::serialize_config(hjbk::builtin_experiment("poly1d"));
  j["kernel"]["degree"] = 1;
  EXPECT_EQ(run("synthesize --config " + write_config("bad.json", j).string() + " --quiet"), 2);
}

TEST_F(Cli, EmptyInitialConditions) {
  json j = hjbk::serialize_config(hjbk::builtin_experiment("poly1d"));
  j["simulation"]["initial_conditions"]["points"] = json::array();
  EXPECT_EQ(run("reproduce " + write_config("empty.json", j).string() + " --quiet"), 2);
}

TEST_F(Cli, SynthesizeSimulateVerify) {
  ASSERT_EQ(run("synthesize poly1d --out " + out("p") + " --quiet"), 0);
  const json vf = read_json(dir_ / "p" / "vf.json");
  EXPECT_EQ(vf.at("coefficients").size(), 25u);
  EXPECT_EQ(vf.at("dim"), 1);

  ASSERT_EQ(run("simulate poly1d --vf " + out("p/vf.json") + " --out " + out("p") + " --quiet"), 0);
  const json summary = read_json(dir_ / "p" / "batch_summary.json");
  EXPECT_EQ(summary.at("trajectories").size(), 6u);
  EXPECT_EQ(csv_rows(slurp(dir_ / "p" / "trajectories.csv")), 6 * 1000);

  ASSERT_EQ(run("verify poly1d --vf " + out("p/vf.json") + " --out " + out("p") + " --quiet"), 0);
  const json report = read_json(dir_ / "p" / "report.json");
  EXPECT_LT(report.at("equilibrium").at("hessian_residual").get<double>(), 1e-4);
  EXPECT_TRUE(report.contains("assumptions"));
  EXPECT_TRUE(fs::exists(dir_ / "p" / "report.txt"));

  // A 1D value function cannot drive the 2D system.
  EXPECT_EQ(run("simulate radial2d --vf " + out("p/vf.json") + " --out " + out("q") + " --quiet"), 2);
}

TEST_F(Cli, CircleBatchAndEnvironmentOutputDir) {
  ASSERT_EQ(run("synthesize radial2d --quiet", "HJBK_OUT_DIR=" + dir_.string()), 0);
  ASSERT_TRUE(fs::exists(dir_ / "radial2d" / "vf.json"));
  ASSERT_EQ(run("simulate radial2d --vf " + out("radial2d/vf.json") + " --quiet", "HJBK_OUT_DIR=" + dir_.string()), 0);
  const json summary = read_json(dir_ / "radial2d" / "batch_summary.json");
  EXPECT_EQ(summary.at("trajectories").size(), 8u);
  EXPECT_EQ(summary.at("trajectories")[0].at("label"), "theta=0");
}

TEST_F(Cli, ReproduceIsDeterministic) {
  ASSERT_EQ(run("reproduce poly1d --out " + out("a") + " --quiet"), 0);
  ASSERT_EQ(run("reproduce " + std::string(HJBK_SOURCE_DIR) + "/configs/poly1d.json --out " + out("b") + " --quiet"), 0);
  json a = read_json(dir_ / "a" / "summary.json"), b = read_json(dir_ / "b" / "summary.json");
  a.erase("timing");
  b.erase("timing");
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.at("passed"), true);
  EXPECT_EQ(slurp(dir_ / "a" / "vf.json"), slurp(dir_ / "b" / "vf.json"));
  EXPECT_EQ(slurp(dir_ / "a" / "trajectories.csv"), slurp(dir_ / "b" / "trajectories.csv"));
  for (const char* f : {"report.json", "report.txt", "batch_summary.json", "config.json"}) EXPECT_TRUE(fs::exists(dir_ / "a" / f));
  for (const auto& e : fs::directory_iterator(dir_ / "a")) EXPECT_NE(e.path().extension(), ".tmp");
}

TEST_F(Cli, DumpConicAndSolverOverride) {
  ASSERT_EQ(run("synthesize poly1d --out " + out("c") + " --dump-conic --solver-tol 1e-6 --quiet"), 0);
  const json conic = read_json(dir_ / "c" / "conic.json");
  EXPECT_EQ(conic.at("num_vars"), 25);
  EXPECT_EQ(run("synthesize poly1d --out " + out("c") + " --solver-tol -1 --quiet"), 2);
  EXPECT_EQ(run("frobnicate"), 2);
}
