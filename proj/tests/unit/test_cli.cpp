#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace {

struct Run {
  int status = -1;
  std::string output;  ///< stdout and stderr interleaved
};

Run run_cli(const std::string& args) {
  const std::string cmd = std::string(HOMOGLAB_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) r.output += buf;
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("homoglab_cli_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Cli, UsageErrorsExitWithOne) {
  EXPECT_EQ(run_cli("").status, 1);
  EXPECT_EQ(run_cli("frobnicate").status, 1);
  EXPECT_EQ(run_cli("cell --seed nothex").status, 1);
}

TEST(Cli, MissingConfigNamesThePath) {
  const auto r = run_cli("cell --config /nonexistent/exp.toml");
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.output.find("/nonexistent/exp.toml"), std::string::npos);
}

TEST(Cli, InvalidConfigExitsWithOne) {
  const auto dir = scratch("invalid");
  std::ofstream(dir / "bad.toml") << "[discretization]\nsubcells = 6\n";
  EXPECT_EQ(run_cli("cell --config " + (dir / "bad.toml").string()).status, 1);
}

TEST(Cli, CellWritesTensorWithHeader) {
  const auto dir = scratch("cell");
  std::ofstream(dir / "c.toml") << "[discretization]\ncell_resolution = 8\n";
  const auto r = run_cli("cell --config " + (dir / "c.toml").string() + " --out " + (dir / "out").string());
  ASSERT_EQ(r.status, 0) << r.output;
  std::ifstream in(dir / "out" / "tensor.json");
  ASSERT_TRUE(in.good());
  const auto j = nlohmann::json::parse(in);
  EXPECT_TRUE(j.contains("header"));
  EXPECT_EQ(j["header"]["command"], "cell");
}

TEST(Cli, SweepWithUnpairableEpsilonStillWritesAndExitsWithTwo) {
  const auto dir = scratch("sweep");
  std::ofstream(dir / "s.toml") << "[contrast]\nlaw = \"power\"\np = 2\n[discretization]\nn = [1, 2]\n"
                                   "subcells = 8\n[eigen]\ncount = 60\nmethod = \"dense\"\n";
  const auto r = run_cli("sweep --config " + (dir / "s.toml").string() + " --out " + (dir / "out").string());
  EXPECT_EQ(r.status, 2) << r.output;
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "rates.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "slopes.json"));
}
