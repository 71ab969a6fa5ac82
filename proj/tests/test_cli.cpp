#include "dwa3d/flight_log.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dwa3d_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Result run(const std::string& args) const {
    const fs::path out = dir_ / "stdout.txt";
    const std::string cmd = std::string(DWA3D_CLI) + " " + args + " > " + out.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream f(out);
    std::stringstream ss;
    ss << f.rdbuf();
    r.out = ss.str();
    return r;
  }

  fs::path write(const std::string& name, const std::string& text) const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  fs::path dir_;
};

const char* kOpen = R"({
  "schema_version": 1,
  "name": "open",
  "bounds": {"min": [-2.5, -2, 0], "max": [2.5, 2, 3]},
  "start": {"position": [-1.5, 0, 1]},
  "goal": [1.5, 0, 1],
  "planners": ["naive"]
})";

// A fast cylinder coming from behind catches the drone.
const char* kRammer = R"({
  "schema_version": 1,
  "name": "rammer",
  "bounds": {"min": [-3, -2, 0], "max": [3, 2, 3]},
  "start": {"position": [-2, 0, 1]},
  "goal": [2, 0, 1],
  "planners": ["naive"],
  "primitives": [{"kind": "cylinder", "center": [-2.8, 0, 1], "radius": 0.2, "height": 2,
                  "motion": {"velocity": [2, 0, 0]}}]
})";

}  // namespace

TEST_F(Cli, HelpExitsZero) {
  const Result r = run("--help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("check-config"), std::string::npos);
}

TEST_F(Cli, UsageErrorsExitWith64) {
  EXPECT_EQ(run("").code, 64);
  EXPECT_EQ(run("run --scenario wall --bogus").code, 64);
  EXPECT_EQ(run("run --scenario nowhere").code, 64);
  EXPECT_EQ(run("run --scenario wall --planner astar").code, 64);
  const Result bad = run("run --scenario " + write("bad.json", R"({"schema_version": 1})").string());
  EXPECT_EQ(bad.code, 64);
  EXPECT_NE(bad.out.find("name"), std::string::npos);
}

TEST_F(Cli, CheckConfigReportsViolations) {
  const Result ok = run("check-config " + write("ok.json", "{}").string());
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_NE(ok.out.find("all constraints satisfied"), std::string::npos);

  const Result bad = run("check-config " + write("bad.json", R"({"weights": {"alpha": 0.9, "beta": 0.05, "gamma": 0.05}})").string());
  EXPECT_EQ(bad.code, 1) << bad.out;
  EXPECT_NE(bad.out.find("constraint violations found"), std::string::npos);

  EXPECT_EQ(run("check-config " + write("typo.json", R"({"weight": {}})").string()).code, 1);
  EXPECT_EQ(run("check-config " + write("broken.json", "{").string()).code, 1);
}

TEST_F(Cli, RunWritesAReadableLogAndScores) {
  const fs::path scenario = write("open.json", kOpen);
  const Result r = run("run --scenario " + scenario.string() + " --out " + dir_.string() + " --seed 9 --dump-scores");
  ASSERT_EQ(r.code, 0) << r.out;

  const dwa3d::FlightLog log = dwa3d::read_log((dir_ / "open-9.log").string());
  EXPECT_EQ(log.outcome, dwa3d::Outcome::Success);
  EXPECT_EQ(log.header.planner, "naive");
  EXPECT_EQ(log.header.seed, 9u);
  EXPECT_TRUE(log.header.config.contains("planner"));

  std::ifstream scores(dir_ / "open-9.scores.jsonl");
  std::string line;
  std::map<std::size_t, int> chosen;
  std::size_t rows = 0;
  while (std::getline(scores, line)) {
    const json j = json::parse(line);
    ++rows;
    if (j.at("chosen").get<bool>()) ++chosen[j.at("iteration").get<std::size_t>()];
  }
  std::size_t planned = 0;
  for (const auto& rec : log.records) planned += rec.planned ? 1 : 0;
  EXPECT_GT(rows, planned);
  EXPECT_EQ(chosen.size(), planned);
  for (const auto& [it, n] : chosen) EXPECT_EQ(n, 1) << "iteration " << it;
}

TEST_F(Cli, CollisionExitsWithTwo) {
  const Result r = run("run --scenario " + write("rammer.json", kRammer).string() + " --out " + dir_.string());
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_NE(r.out.find("outcome=collision"), std::string::npos);
}

TEST_F(Cli, BenchWritesOneRowPerFlightPlusPooled) {
  const Result r = run("bench --scenario " + write("open.json", kOpen).string() + " --repeat 2 --out " + dir_.string());
  ASSERT_EQ(r.code, 0) << r.out;
  std::ifstream csv(dir_ / "bench-summary.csv");
  std::vector<std::string> lines;
  for (std::string l; std::getline(csv, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0], "flight_id,mean_ms,median_ms,p95_ms,max_ms");
  EXPECT_EQ(lines[1].rfind("open-1,", 0), 0u);
  EXPECT_EQ(lines[2].rfind("open-2,", 0), 0u);
  EXPECT_EQ(lines[3].rfind("pooled,", 0), 0u);
}

TEST_F(Cli, ShowScenarioRoundTrips) {
  const Result r = run("show-scenario wall");
  ASSERT_EQ(r.code, 0);
  const fs::path copy = write("wall.json", r.out);
  const Result again = run("show-scenario " + copy.string());
  EXPECT_EQ(again.code, 0);
  EXPECT_EQ(again.out, r.out);
}
