#include "fixtures.hpp"
#include "gmy/config.hpp"
#include "gmy/pipeline.hpp"

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;
using gmy::testing::kPhi;

namespace {

struct Run {
  int code = -1;
  std::string err;
};

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("gmy_cli_" + name);
  fs::remove_all(p);
  return p;
}

Run run_cli(const std::string& args, const fs::path& dir) {
  fs::create_directories(dir);
  auto err = dir / "stderr.txt";
  std::string cmd = std::string(GMY_CLI) + " " + args + " --out " + (dir / "out").string() + " > " +
                    (dir / "stdout.txt").string() + " 2> " + err.string();
  int st = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  r.err = ss.str();
  return r;
}

nlohmann::json report(const fs::path& dir) {
  std::ifstream in(dir / "out" / "report.json");
  return nlohmann::json::parse(in);
}

}  // namespace

TEST(Cli, CertifyCat) {
  auto dir = scratch("certify");
  auto r = run_cli("certify --system cat", dir);
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = report(dir);
  // lambda_- / lambda_+ for the cat map
  EXPECT_NEAR(j["certificates"]["lambda_hat"].get<double>(), std::pow(kPhi, -4.0), 1e-9);
  EXPECT_TRUE(j["all_pass"].get<bool>());
  EXPECT_FALSE(j.contains("timings"));
  EXPECT_TRUE(fs::exists(dir / "out" / "timings.json"));
}

TEST(Cli, Delta0AboveBoundIsConfigError) {
  auto dir = scratch("delta0");
  auto r = run_cli("certify --system cat --delta0 0.01", dir);
  EXPECT_EQ(r.code, 2);
  // delta1 sigma / (2 K0^2) with K0 = phi^2
  double bound = 0.05 * 0.4 / (2.0 * std::pow(kPhi, 4.0));
  char want[32];
  std::snprintf(want, sizeof want, "%.6g", bound);
  EXPECT_NE(r.err.find("bound"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find(want), std::string::npos) << r.err;
}

TEST(Cli, UnknownSystemIsConfigError) {
  auto dir = scratch("unknown");
  auto r = run_cli("certify --system henon", dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("henon"), std::string::npos);
}

TEST(Cli, BadParameterIsConfigError) {
  auto dir = scratch("badparam");
  EXPECT_EQ(run_cli("certify --system mp_skew --param alpha=7", dir).code, 2);
  EXPECT_EQ(run_cli("certify --system mp_skew --param alpha", dir).code, 2);
}

TEST(Cli, UnknownIniKeyIsConfigError) {
  auto dir = scratch("badini");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.ini") << "[constants]\nsigmaa = 0.5\n";
  auto r = run_cli("certify --config " + (dir / "bad.ini").string(), dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("sigmaa"), std::string::npos);
}

TEST(Cli, IniThenFlags) {
  auto dir = scratch("ini");
  fs::create_directories(dir);
  std::ofstream(dir / "run.ini") << "[system]\nname = mp_skew\n[params]\nalpha = 0.3\n"
                                    "[constants]\nsigma = 0.85\ndelta1 = 0.04\n";
  auto r = run_cli("certify --config " + (dir / "run.ini").string() + " --delta1 0.03", dir);
  ASSERT_EQ(r.code, 0) << r.err;
  auto c = report(dir)["config"];
  EXPECT_EQ(c["system"]["name"], "mp_skew");
  EXPECT_DOUBLE_EQ(c["system"]["params"]["alpha"].get<double>(), 0.3);
  EXPECT_DOUBLE_EQ(c["constants"]["sigma"].get<double>(), 0.85);
  EXPECT_DOUBLE_EQ(c["constants"]["delta1"].get<double>(), 0.03);
}

TEST(Cli, SystemsListsAll) {
  auto dir = scratch("systems");
  auto r = run_cli("systems", dir);
  ASSERT_EQ(r.code, 0) << r.err;
  auto s = report(dir).dump();
  for (const char* n : {"cat", "mp_skew", "perturbed_cat"}) EXPECT_NE(s.find(n), std::string::npos) << n;
}

TEST(Cli, HyptimesWritesCsv) {
  auto dir = scratch("hyptimes");
  auto r = run_cli("hyptimes --system cat --horizon 2000", dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "out" / "hyptimes.csv"));
}

TEST(Config, CountsAcceptWholeScientific) {
  gmy::RunConfig c;
  gmy::set_value(c, "srb.steps", "1e6");
  EXPECT_EQ(c.birkhoff_steps, 1000000u);
  EXPECT_THROW(gmy::set_value(c, "srb.steps", "1.5"), gmy::ConfigError);
  EXPECT_THROW(gmy::set_value(c, "srb.steps", "-3"), gmy::ConfigError);
  EXPECT_THROW(gmy::set_value(c, "constants.sigma", "abc"), gmy::ConfigError);
  EXPECT_THROW(gmy::set_value(c, "nosuch.key", "1"), gmy::ConfigError);
}

TEST(Config, PerSystemDefaults) {
  gmy::RunConfig c;
  c.system = "mp_skew";
  auto r = gmy::resolve(c);
  EXPECT_DOUBLE_EQ(*r.sigma, 0.8);
  EXPECT_EQ(*r.N0_cap, 2u);
  c.system = "cat";
  r = gmy::resolve(c);
  EXPECT_DOUBLE_EQ(*r.sigma, 0.4);
  EXPECT_EQ(*r.N0_cap, 1u);
}

TEST(Config, RangeChecks) {
  gmy::RunConfig c;
  c.sigma = 1.2;
  EXPECT_THROW(gmy::resolve(c), gmy::ConfigError);
  c = {};
  c.census_burn_in = c.census_horizon;
  EXPECT_THROW(gmy::resolve(c), gmy::ConfigError);
  c = {};
  c.delta_s = c.delta1;
  EXPECT_THROW(gmy::resolve(c), gmy::ConfigError);
}

TEST(Pipeline, ExitCodeOnConfigError) {
  gmy::RunConfig c;
  c.system = "nope";
  std::ostringstream out, err;
  EXPECT_EQ(gmy::run_command("certify", c, out, err), gmy::kExitConfig);
}
