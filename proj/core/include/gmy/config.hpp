#pragma once

#include "gmy/system.hpp"

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"

namespace gmy {

/// Raised for anything the user can fix in the configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string system = "cat";
  ParamMap params;

  // constants; unset ones take per-system defaults in resolve()
  std::optional<double> sigma;
  double cone_a = 1.0;
  double delta1 = 0.05;
  std::optional<double> delta0;
  double delta_s = 0.0;  // 0: delta1 / 4
  std::optional<std::size_t> n0;
  std::size_t n_max = 40;
  std::optional<std::size_t> N0_cap;

  // partition and tower
  std::size_t grid = 4096;
  std::size_t density_cells = 4096;
  std::size_t density_iterations = 500;
  double density_tol = 1e-6;

  // orbit statistics
  std::size_t horizon = 100000;  // hyperbolic-time orbits
  std::size_t orbits = 10;
  double nue_epsilon = 0.05;
  std::size_t frame_samples = 1000;
  std::size_t birkhoff_starts = 100;
  std::size_t birkhoff_steps = 1000000;
  std::size_t hsr_orbits = 10;
  std::size_t hsr_steps = 100000;

  // census
  std::size_t census_starts = 50;
  std::size_t census_grid = 64;
  std::size_t census_burn_in = 1000;
  std::size_t census_horizon = 200000;
  double census_threshold = 0.2;
  std::size_t expanding_N_max = 10;

  std::uint64_t seed = 1;
  std::size_t budget = 1u << 22;
  std::string out = "out";
};

/// Reads an INI file into cfg. Unknown sections or keys are errors.
void load_ini(RunConfig& cfg, const std::string& path);

/// Sets one value by its dotted INI name ("constants.sigma", "params.alpha", ...).
void set_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Fills per-system defaults and checks ranges. Unknown systems and bad
/// parameters surface as ConfigError.
RunConfig resolve(const RunConfig& cfg);

nlohmann::json config_json(const RunConfig& resolved);

}  // namespace gmy
