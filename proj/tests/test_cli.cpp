#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "hybridplan/cli.hpp"

using namespace hybridplan;

namespace {

const std::filesystem::path kScenarios = HYBRIDPLAN_SCENARIO_DIR;

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "hybridplan");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto d = std::filesystem::temp_directory_path() / ("hybridplan_cli_" + name);
  std::filesystem::remove_all(d);
  return d;
}

std::string scn(const char* name) { return (kScenarios / name).string(); }

}  // namespace

TEST(Cli, PlanThenSimulateFig7) {
  const auto d = fresh_dir("fig7");
  auto r = run({"plan", scn("fig7.scn"), "--algo", "ndd", "--out-dir", d.string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_TRUE(std::filesystem::exists(d / "policy.json"));
  EXPECT_TRUE(std::filesystem::exists(d / "stats.json"));
  r = run({"simulate", scn("fig7.scn"), "--out-dir", d.string(), "--samples", "25"});
  ASSERT_EQ(r.code, cli::kOk) << r.out << r.err;
  const auto v = json::parse(read_file(d / "verdicts.json"));
  EXPECT_EQ(v["runs"], 25);
  EXPECT_EQ(v["passed"], 25);
  EXPECT_TRUE(std::filesystem::exists(d / "traces" / "trace_0024.csv"));
}

TEST(Cli, GreedyChannelHasNoSolution) {
  const auto d = fresh_dir("greedy");
  const auto r = run({"plan", scn("channel.scn"), "--algo", "greedy", "--out-dir", d.string()});
  EXPECT_EQ(r.code, cli::kNoSolution);
  EXPECT_FALSE(std::filesystem::exists(d / "policy.json"));
  const auto s = json::parse(read_file(d / "stats.json"));
  EXPECT_EQ(s["success"], false);
}

TEST(Cli, CheckDoubleIntegrator) {
  const auto d = fresh_dir("check");
  const auto r = run({"check", scn("di.ma"), "--out-dir", d.string()});
  EXPECT_EQ(r.code, cli::kOk) << r.out;
  EXPECT_NE(r.out.find("all conditions hold"), std::string::npos);
  EXPECT_EQ(json::parse(read_file(d / "check.json"))["ok"], true);
}

TEST(Cli, ComposeWritesReadableAutomaton) {
  const auto d = fresh_dir("compose");
  auto r = run({"compose", scn("di.ma"), "--copies", "3", "--out-dir", d.string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto ma = parse_ma(read_file(d / "composed.ma.json"));
  EXPECT_EQ(ma.num_primitives(), 27u);
  EXPECT_EQ(ma.enumerate_edges().size(), 604u);
}

TEST(Cli, ErrorCodes) {
  const auto d = fresh_dir("errors");
  std::filesystem::create_directories(d);
  write_file_atomic(d / "nogoal.scn", R"({"version":1,"seed":1,"grid":{"counts":[3],"d":[1]}})");
  auto r = run({"plan", (d / "nogoal.scn").string(), "--out-dir", d.string()});
  EXPECT_EQ(r.code, cli::kInvalidDocument);
  EXPECT_NE(r.err.find("scenario.grid.goals"), std::string::npos) << r.err;
  r = run({"plan", (d / "missing.scn").string(), "--out-dir", d.string()});
  EXPECT_EQ(r.code, cli::kIoError);
  r = run({"plan", scn("fig7.scn"), "--algo", "dfs"});
  EXPECT_EQ(r.code, cli::kIoError);
  r = run({"frobnicate"});
  EXPECT_EQ(r.code, cli::kIoError);
}

TEST(Cli, EnvironmentMirrorsFlags) {
  const auto d = fresh_dir("env");
  ::setenv("HYBRIDPLAN_ALGO", "greedy", 1);
  const auto r = run({"plan", scn("channel.scn"), "--out-dir", d.string()});
  ::unsetenv("HYBRIDPLAN_ALGO");
  EXPECT_EQ(r.code, cli::kNoSolution);
  // A flag beats the environment.
  ::setenv("HYBRIDPLAN_ALGO", "greedy", 1);
  const auto r2 = run({"plan", scn("fig7.scn"), "--algo", "ndd", "--out-dir", d.string()});
  ::unsetenv("HYBRIDPLAN_ALGO");
  EXPECT_EQ(r2.code, cli::kOk);
}

TEST(Cli, SameSeedSameBytes) {
  std::vector<std::filesystem::path> dirs{fresh_dir("det_a"), fresh_dir("det_b")};
  for (const auto& d : dirs) {
    ASSERT_EQ(run({"plan", scn("fig3.scn"), "--out-dir", d.string()}).code, cli::kOk);
    ASSERT_EQ(run({"simulate", scn("fig3.scn"), "--out-dir", d.string(), "--samples", "12", "--workers", "3"}).code,
              cli::kOk);
  }
  EXPECT_EQ(read_file(dirs[0] / "policy.json"), read_file(dirs[1] / "policy.json"));
  EXPECT_EQ(read_file(dirs[0] / "verdicts.json"), read_file(dirs[1] / "verdicts.json"));
  for (int i = 0; i < 12; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "trace_%04d.csv", i);
    EXPECT_EQ(read_file(dirs[0] / "traces" / name), read_file(dirs[1] / "traces" / name));
  }
}
