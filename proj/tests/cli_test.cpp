#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mfgelec/mfgelec.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
};

Result cli(const std::string& args) {
  const std::string cmd = std::string(MFGELEC_CLI) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, ""};
  std::string out;
  char buf[4096];
  while (const auto n = fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mfgelec_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    small_ = write("small.yaml", support::small_config());
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name) << text;
    return (dir_ / name).string();
  }

  fs::path dir_;
  std::string small_;
};

}  // namespace

TEST_F(Cli, ValidateAcceptsShippedScenario) {
  const auto r = cli("validate " + support::source_path("scenarios/illustration.yaml"));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("valid"), std::string::npos);
  EXPECT_NE(r.out.find(mfgelec::load_validate(support::source_path("scenarios/illustration.yaml")).hash),
            std::string::npos);
}

TEST_F(Cli, BadConfigExitsWithOne) {
  const auto bad = write("bad.yaml", support::small_config() + "surprise: 1\n");
  const auto r = cli("validate " + bad);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("surprise"), std::string::npos) << r.out;
  EXPECT_EQ(cli("validate " + (dir_ / "missing.yaml").string()).code, 1);
  EXPECT_EQ(cli("run " + bad + " --out " + (dir_ / "x").string()).code, 1);
  EXPECT_EQ(cli("frobnicate").code, 1);
}

TEST_F(Cli, RunWritesBundleAndFlagsNonConvergence) {
  const auto out = dir_ / "run";
  auto r = cli("run " + small_ + " --out " + out.string());
  EXPECT_EQ(r.code, 0) << r.out;
  for (const char* f : {"prices.csv", "capacity.csv", "supply.csv", "flows.csv", "diagnostics.csv", "manifest.json"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  const auto m = nlohmann::json::parse(slurp(out / "manifest.json"));
  EXPECT_TRUE(m.at("converged").get<bool>());
  EXPECT_EQ(m.at("config_sha256").get<std::string>(), support::small_loaded().hash);
  EXPECT_EQ(slurp(out / "prices.csv").rfind("t,P_peak,P_offpeak,P_fuel_1,loss_of_load_peak,loss_of_load_offpeak\n", 0),
            0u);

  r = cli("run " + small_ + " --max-iter 1 --out " + (dir_ / "short").string());
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_NE(r.out.find("NOT converged"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "short" / "prices.csv"));
}

TEST_F(Cli, ZeroMassRunSucceeds) {
  std::string text = support::small_config();
  for (const char* from : {"mass_gw: 15", "mass_gw: 10", "mass_gw: 40", "mass_gw: 3"})
    text.replace(text.find(from), std::string(from).size(), "mass_gw: 0");
  const auto path = write("empty.yaml", text);
  const auto r = cli("run " + path + " --out " + (dir_ / "empty").string());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("converged after 1 iterations"), std::string::npos) << r.out;
}

TEST_F(Cli, ClearOnceAndBestResponse) {
  auto r = cli("clear-once " + small_ + " --t 0");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("P_peak="), std::string::npos);
  EXPECT_NE(r.out.find("P_gas="), std::string::npos);
  EXPECT_EQ(cli("clear-once " + small_ + " --t 999").code, 1);

  const auto out = dir_ / "run";
  ASSERT_EQ(cli("run " + small_ + " --out " + out.string()).code, 0);
  r = cli("best-response " + small_ + " --prices " + (out / "prices.csv").string() + " --tech wind");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("wind objective"), std::string::npos);
  EXPECT_EQ(cli("best-response " + small_ + " --prices " + (out / "prices.csv").string() + " --tech solar").code, 1);
  const auto broken = write("broken.csv", "t,P_peak\n0,1\n");
  EXPECT_EQ(cli("best-response " + small_ + " --prices " + broken + " --tech 0").code, 1);
}

TEST_F(Cli, CompareJoinsTwoRuns) {
  std::string other = support::small_config();
  other.replace(other.find("build_time_years: 1"), 19, "build_time_years: 0");
  const auto b = write("other.yaml", other);
  const auto out = dir_ / "cmp";
  const auto r = cli("compare " + small_ + " " + b + " --out " + out.string());
  EXPECT_EQ(r.code, 0) << r.out;
  const auto csv = slurp(out / "comparison.csv");
  EXPECT_EQ(csv.rfind("t,year,P_peak_a,P_peak_b,P_offpeak_a,P_offpeak_b,installed_gas_a,installed_gas_b,"
                      "installed_wind_a,installed_wind_b\n",
                      0),
            0u)
      << csv.substr(0, 200);
  EXPECT_TRUE(fs::exists(out / "a" / "manifest.json"));
  EXPECT_TRUE(fs::exists(out / "b" / "manifest.json"));
}
