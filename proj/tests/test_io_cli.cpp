#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "isacsim/io.hpp"

using namespace isacsim;
namespace fs = std::filesystem;

namespace {

std::string scenario_path() {
  return std::string(ISACSIM_SOURCE_DIR) + "/scenarios/baseline_3km.json";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST(RunManifest, WritesAllOutputsWithExpectedRowCounts) {
  RunManifest m;
  m.scenario_path = scenario_path();
  m.strategies = {Strategy::StaticDeployment};
  m.runs = 1;
  m.seed = 11;
  m.out_dir = (fs::temp_directory_path() / "isacsim_io_test").string();
  fs::remove_all(m.out_dir);
  const auto aggs = run_manifest(m);
  ASSERT_EQ(aggs.size(), 1u);

  const fs::path dir(m.out_dir);
  ASSERT_TRUE(fs::exists(dir / "trajectories.csv"));
  ASSERT_TRUE(fs::exists(dir / "bandwidth.csv"));
  ASSERT_TRUE(fs::exists(dir / "pcrb.csv"));
  ASSERT_TRUE(fs::exists(dir / "summary.json"));

  // 60 intervals x 3 UAVs + schema comment + header
  EXPECT_EQ(count_lines(slurp(dir / "trajectories.csv")), 60 * 3 + 2);
  EXPECT_EQ(count_lines(slurp(dir / "bandwidth.csv")), 60 * 3 + 2);
  EXPECT_EQ(count_lines(slurp(dir / "pcrb.csv")), 60 + 2);

  nlohmann::json summary;
  std::ifstream(dir / "summary.json") >> summary;
  EXPECT_EQ(summary["schema_version"], 1);
  EXPECT_TRUE(summary.contains("scenario"));
  EXPECT_EQ(summary["scenario"]["total_bandwidth_hz"], 2e7);
  EXPECT_EQ(summary["strategies"].size(), 1u);
  EXPECT_EQ(summary["strategies"][0]["strategy"], "sd");
  fs::remove_all(m.out_dir);
}

TEST(RunManifest, IdenticalManifestsAreByteIdentical) {
  RunManifest m;
  m.scenario_path = scenario_path();
  m.strategies = {Strategy::StaticDeployment, Strategy::EqualBandwidth};
  m.runs = 2;
  m.seed = 5;
  m.out_dir = (fs::temp_directory_path() / "isacsim_det_a").string();
  fs::remove_all(m.out_dir);
  run_manifest(m);
  RunManifest m2 = m;
  m2.out_dir = (fs::temp_directory_path() / "isacsim_det_b").string();
  fs::remove_all(m2.out_dir);
  run_manifest(m2);

  for (const char* f : {"trajectories.csv", "bandwidth.csv", "pcrb.csv"}) {
    EXPECT_EQ(slurp(fs::path(m.out_dir) / f), slurp(fs::path(m2.out_dir) / f)) << f;
  }
  fs::remove_all(m.out_dir);
  fs::remove_all(m2.out_dir);
}

TEST(RunManifest, SeedOverrideChangesOutputs) {
  RunManifest m;
  m.scenario_path = scenario_path();
  m.strategies = {Strategy::StaticDeployment};
  m.runs = 1;
  m.seed = 1;
  m.out_dir = (fs::temp_directory_path() / "isacsim_seed_a").string();
  fs::remove_all(m.out_dir);
  run_manifest(m);
  RunManifest m2 = m;
  m2.seed = 2;
  m2.out_dir = (fs::temp_directory_path() / "isacsim_seed_b").string();
  fs::remove_all(m2.out_dir);
  run_manifest(m2);
  EXPECT_NE(slurp(fs::path(m.out_dir) / "pcrb.csv"), slurp(fs::path(m2.out_dir) / "pcrb.csv"));
  fs::remove_all(m.out_dir);
  fs::remove_all(m2.out_dir);
}

TEST(RunManifest, MissingScenarioThrowsScenarioError) {
  RunManifest m;
  m.scenario_path = "/no/such/file.json";
  EXPECT_THROW(run_manifest(m), ScenarioError);
}

TEST(RunManifest, TraceDumpsJsonl) {
  RunManifest m;
  m.scenario_path = scenario_path();
  m.strategies = {Strategy::StaticDeployment};
  m.runs = 1;
  m.seed = 9;
  m.trace = true;
  m.out_dir = (fs::temp_directory_path() / "isacsim_trace").string();
  fs::remove_all(m.out_dir);
  run_manifest(m);
  const std::string trace = slurp(fs::path(m.out_dir) / "trace.jsonl");
  EXPECT_EQ(count_lines(trace), 60);
  std::istringstream is(trace);
  std::string line;
  std::getline(is, line);
  const auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j["interval"], 1);
  EXPECT_TRUE(j.contains("ao_objective_trace"));
  fs::remove_all(m.out_dir);
}
