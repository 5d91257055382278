#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string output;
};

Result esmeta(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + ESMETA_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1,
          std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>())};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("esmeta_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    const json cfg = {{"oracle", {{"type", "synthetic"}}},
                      {"dataset", {{"n", 120}}},
                      {"ensemble", {{"members", 2}}},
                      {"train", {{"epochs", 3}}},
                      {"maximizer", {{"starts", 3}, {"steps", 40}}},
                      {"scheme", {{"iterations_max", 2}}},
                      {"seed", 7}};
    std::ofstream(dir / "run.json") << cfg.dump(2);
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string config() const { return "--config \"" + (dir / "run.json").string() + "\""; }
  fs::path dir;
};

// Line of a CSV whose first two fields are `a,b`, minus that prefix.
std::string row_after(const std::string& csv, const std::string& prefix) {
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line))
    if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
  return "";
}

}  // namespace

TEST_F(Cli, MissingOracleExitsOneNamingField) {
  std::ofstream(dir / "bad.json") << R"({"storage": {"horizon": 24}})";
  const Result r = esmeta("run --config \"" + (dir / "bad.json").string() + "\"", dir / "log");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("oracle"), std::string::npos) << r.output;
}

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(esmeta("run", dir / "log").code, 1);
  EXPECT_EQ(esmeta("frobnicate", dir / "log").code, 1);
  EXPECT_EQ(esmeta("--help", dir / "log").code, 0);
}

TEST_F(Cli, RuntimeErrorsExitTwo) {
  std::ofstream(dir / "short.csv") << "0.1,0.2\n";
  const Result r = esmeta("verify " + config() + " --schedule \"" + (dir / "short.csv").string() + "\"", dir / "log");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("expected 24 values"), std::string::npos) << r.output;
}

TEST_F(Cli, VerifyZeroScheduleTotalsZero) {
  std::ofstream zero(dir / "zero.csv");
  for (int t = 0; t < 24; ++t) zero << (t ? "," : "") << 0;
  zero << '\n';
  zero.close();
  const Result r = esmeta("verify " + config() + " --schedule \"" + (dir / "zero.csv").string() + "\"", dir / "log");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("\ntotal 0\n"), std::string::npos) << r.output;
}

TEST_F(Cli, RunWritesArtifactsAndIsReproducible) {
  ASSERT_EQ(esmeta("run " + config() + " --out \"" + (dir / "a").string() + "\"", dir / "log_a").code, 0);
  ASSERT_EQ(esmeta("run " + config() + " --out \"" + (dir / "b").string() + "\"", dir / "log_b").code, 0);
  for (const char* f : {"iterations.csv", "radius.csv", "members.csv", "timings.csv", "schedules.csv", "summary.json",
                        "manifest.json", "config.json", "checkpoints/iter_01_member_00.json", "train/iter_01_member_01.csv"})
    EXPECT_TRUE(fs::exists(dir / "a" / f)) << f;
  EXPECT_EQ(slurp(dir / "a" / "iterations.csv"), slurp(dir / "b" / "iterations.csv"));
  EXPECT_EQ(slurp(dir / "a" / "members.csv"), slurp(dir / "b" / "members.csv"));

  const json manifest = json::parse(slurp(dir / "a" / "manifest.json"));
  EXPECT_EQ(manifest.at("seed").get<std::uint64_t>(), 7u);
  EXPECT_EQ(manifest.at("config_hash"), json::parse(slurp(dir / "b" / "manifest.json")).at("config_hash"));
  const json summary = json::parse(slurp(dir / "a" / "summary.json"));
  EXPECT_EQ(summary.at("best_schedule").size(), 24u);
  EXPECT_TRUE(summary.at("baseline").contains("margin"));

  ASSERT_EQ(esmeta("run " + config() + " --seed 8 --out \"" + (dir / "c").string() + "\"", dir / "log_c").code, 0);
  EXPECT_NE(slurp(dir / "a" / "members.csv"), slurp(dir / "c" / "members.csv"));

  const Result rep = esmeta("report --out \"" + (dir / "a").string() + "\"", dir / "log_r");
  EXPECT_EQ(rep.code, 0);
  EXPECT_NE(rep.output.find("best verified profit"), std::string::npos);
}

TEST_F(Cli, StandaloneStepsReproduceFirstIterationMember) {
  ASSERT_EQ(esmeta("run " + config() + " --iterations-max 1 --out \"" + (dir / "run").string() + "\"", dir / "log").code, 0);
  const fs::path ds = dir / "ds.csv";
  ASSERT_EQ(esmeta("gen-dataset " + config() + " --out \"" + ds.string() + "\"", dir / "log_g").code, 0);
  const Result train = esmeta("train-one " + config() + " --dataset \"" + ds.string() + "\" --member 1 --out \"" +
                                  (dir / "one").string() + "\"",
                              dir / "log_t");
  ASSERT_EQ(train.code, 0) << train.output;

  // members.csv: iteration,member,computed_profit,actual_profit,gap,best_valid_mse
  const std::string member = row_after(slurp(dir / "run" / "members.csv"), "1,1,");
  ASSERT_FALSE(member.empty());
  const std::string computed = member.substr(0, member.find(','));
  const std::string mse = member.substr(member.rfind(',') + 1);
  EXPECT_NE(train.output.find("best_valid_mse " + mse + " "), std::string::npos) << train.output << mse;
  EXPECT_NE(train.output.find("computed_profit " + computed + "\n"), std::string::npos) << train.output << computed;

  const std::string from_run = row_after(slurp(dir / "run" / "schedules.csv"), "1,1,");
  std::istringstream one(slurp(dir / "one" / "iter_01_member_01_schedule.csv"));
  std::string header, values;
  std::getline(one, header);
  std::getline(one, values);
  EXPECT_EQ(values, from_run);
}
