#pragma once

#include "gmy/config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace gmy {

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitConfig = 2, kExitBudget = 3 };

struct Check {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double tol = 0.0;
  std::string relation;  // how value is compared with tol, e.g. "<", "<=", ">="
  std::size_t samples = 0;
  std::string note;
};

struct RunReport {
  std::string verb;
  nlohmann::json config;
  nlohmann::json sections = nlohmann::json::object();
  std::vector<Check> checks;
  std::vector<std::pair<std::string, double>> timings;  // seconds per stage, kept out of report.json

  bool all_pass() const;
  nlohmann::json to_json() const;
  nlohmann::json timings_json() const;
};

const std::vector<std::string>& verbs();

/// Runs a verb on a resolved config. Artifacts other than report.json and
/// timings.json are returned by name in `files`. Throws ConfigError,
/// ParameterError and BudgetExceeded.
RunReport run_pipeline(const std::string& verb, const RunConfig& resolved,
                       std::vector<std::pair<std::string, std::string>>& files, std::ostream* progress = nullptr);

/// Resolves cfg, runs the verb, writes every artifact into cfg.out and maps
/// failures to exit codes. Messages go to err, a one-line summary to out.
int run_command(const std::string& verb, const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace gmy
