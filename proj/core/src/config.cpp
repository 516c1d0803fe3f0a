#include "gmy/config.hpp"
#include "gmy/partition.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdio>
#include <cmath>
#include <functional>
#include <map>

namespace gmy {

namespace {

double parse_real(const std::string& key, const std::string& s) {
  double v = 0.0;
  auto first = s.data(), last = s.data() + s.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && last[-1] == ' ') --last;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v))
    throw ConfigError(key + ": not a number: '" + s + "'");
  return v;
}

// accepts 1e6 style counts as long as they are whole
std::size_t parse_count(const std::string& key, const std::string& s) {
  double v = parse_real(key, s);
  if (v < 0.0 || v != std::floor(v) || v > 9.0e15) throw ConfigError(key + ": not a count: '" + s + "'");
  return std::size_t(v);
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

template <class T>
Setter real(T RunConfig::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) { c.*field = parse_real(k, v); };
}
template <class T>
Setter count(T RunConfig::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) { c.*field = parse_count(k, v); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"system.name", [](RunConfig& c, const std::string&, const std::string& v) { c.system = v; }},
      {"constants.sigma", real(&RunConfig::sigma)},
      {"constants.a", real(&RunConfig::cone_a)},
      {"constants.delta1", real(&RunConfig::delta1)},
      {"constants.delta0", real(&RunConfig::delta0)},
      {"constants.delta_s", real(&RunConfig::delta_s)},
      {"constants.n0", count(&RunConfig::n0)},
      {"constants.n_max", count(&RunConfig::n_max)},
      {"constants.N0_cap", count(&RunConfig::N0_cap)},
      {"partition.grid", count(&RunConfig::grid)},
      {"partition.budget", count(&RunConfig::budget)},
      {"tower.cells", count(&RunConfig::density_cells)},
      {"tower.iterations", count(&RunConfig::density_iterations)},
      {"tower.tol", real(&RunConfig::density_tol)},
      {"orbits.horizon", count(&RunConfig::horizon)},
      {"orbits.count", count(&RunConfig::orbits)},
      {"orbits.epsilon", real(&RunConfig::nue_epsilon)},
      {"orbits.frame_samples", count(&RunConfig::frame_samples)},
      {"srb.starts", count(&RunConfig::birkhoff_starts)},
      {"srb.steps", count(&RunConfig::birkhoff_steps)},
      {"hsr.orbits", count(&RunConfig::hsr_orbits)},
      {"hsr.steps", count(&RunConfig::hsr_steps)},
      {"census.starts", count(&RunConfig::census_starts)},
      {"census.grid", count(&RunConfig::census_grid)},
      {"census.burn_in", count(&RunConfig::census_burn_in)},
      {"census.horizon", count(&RunConfig::census_horizon)},
      {"census.threshold", real(&RunConfig::census_threshold)},
      {"census.N_max", count(&RunConfig::expanding_N_max)},
      {"run.seed", count(&RunConfig::seed)},
      {"run.out", [](RunConfig& c, const std::string&, const std::string& v) { c.out = v; }},
  };
  return table;
}

struct Defaults {
  double sigma;
  std::size_t N0, n0;
};

Defaults defaults_for(const std::string& system) {
  if (system == "mp_skew") return {0.8, 2, 3};
  return {0.4, 1, 3};
}

}  // namespace

void set_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key.rfind("params.", 0) == 0) {
    std::string name = key.substr(7);
    if (name.empty()) throw ConfigError("empty parameter name");
    cfg.params[name] = parse_real(key, value);
    return;
  }
  auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(cfg, key, value);
}

void load_ini(RunConfig& cfg, const std::string& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("key '" + section + "' outside a section");
    for (const auto& [key, leaf] : body) set_value(cfg, section + "." + key, leaf.data());
  }
}

RunConfig resolve(const RunConfig& in) {
  RunConfig c = in;
  SystemPtr sys;
  try {
    sys = make_system(c.system, c.params);
    c.params = sys->parameters();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  Defaults d = defaults_for(c.system);
  if (!c.sigma) c.sigma = d.sigma;
  if (!c.N0_cap) c.N0_cap = d.N0;
  if (!c.n0) c.n0 = d.n0;

  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ConfigError(std::string(name) + " must be positive");
  };
  if (!(*c.sigma > 0.0 && *c.sigma < 1.0)) throw ConfigError("sigma must lie in (0,1)");
  positive(c.cone_a, "a");
  positive(c.delta1, "delta1");
  if (c.delta0) {
    positive(*c.delta0, "delta0");
    // checked here too so that every verb refuses it, not only the ones that build
    double bound = delta0_bound(c.delta1, *c.sigma, *c.N0_cap, max_derivative_norm(*sys));
    if (*c.delta0 > bound) {
      char msg[160];
      std::snprintf(msg, sizeof msg, "delta0 = %.6g exceeds its bound delta1 sigma^N0 / (2 K0^(2 N0)) = %.6g",
                    *c.delta0, bound);
      throw ConfigError(msg);
    }
  }
  if (c.delta_s < 0.0) throw ConfigError("delta_s must be >= 0");
  if (c.delta_s > 0.0 && !(c.delta_s < c.delta1 / 2.0)) throw ConfigError("delta_s must be below delta1/2");
  positive(c.density_tol, "tower.tol");
  positive(c.nue_epsilon, "orbits.epsilon");
  positive(c.census_threshold, "census.threshold");
  if (*c.N0_cap < 1) throw ConfigError("N0_cap must be >= 1");
  if (*c.n0 < 1 || *c.n0 > c.n_max) throw ConfigError("need 1 <= n0 <= n_max");
  if (c.grid < 16) throw ConfigError("partition.grid must be >= 16");
  if (c.density_cells < 16) throw ConfigError("tower.cells must be >= 16");
  if (c.census_starts < 2) throw ConfigError("census.starts must be >= 2");
  if (c.census_grid < 1) throw ConfigError("census.grid must be >= 1");
  if (c.census_burn_in >= c.census_horizon) throw ConfigError("census.burn_in must be below census.horizon");
  if (c.horizon < 2 || c.orbits < 1) throw ConfigError("orbits.horizon >= 2 and orbits.count >= 1 required");
  if (c.expanding_N_max < 1) throw ConfigError("census.N_max must be >= 1");
  if (c.out.empty()) throw ConfigError("run.out must not be empty");
  return c;
}

nlohmann::json config_json(const RunConfig& c) {
  using nlohmann::json;
  json params = json::object();
  for (const auto& [k, v] : c.params) params[k] = v;
  json j;
  j["system"] = {{"name", c.system}, {"params", params}};
  j["constants"] = {{"sigma", c.sigma.value_or(0.0)},
                    {"a", c.cone_a},
                    {"delta1", c.delta1},
                    {"delta0", c.delta0 ? json(*c.delta0) : json(nullptr)},
                    {"delta_s", c.delta_s > 0.0 ? c.delta_s : c.delta1 / 4.0},
                    {"n0", c.n0.value_or(0)},
                    {"n_max", c.n_max},
                    {"N0_cap", c.N0_cap.value_or(0)}};
  j["partition"] = {{"grid", c.grid}, {"budget", c.budget}};
  j["tower"] = {{"cells", c.density_cells}, {"iterations", c.density_iterations}, {"tol", c.density_tol}};
  j["orbits"] = {{"horizon", c.horizon},
                 {"count", c.orbits},
                 {"epsilon", c.nue_epsilon},
                 {"frame_samples", c.frame_samples}};
  j["srb"] = {{"starts", c.birkhoff_starts}, {"steps", c.birkhoff_steps}};
  j["hsr"] = {{"orbits", c.hsr_orbits}, {"steps", c.hsr_steps}};
  j["census"] = {{"starts", c.census_starts},       {"grid", c.census_grid},
                 {"burn_in", c.census_burn_in},     {"horizon", c.census_horizon},
                 {"threshold", c.census_threshold}, {"N_max", c.expanding_N_max}};
  j["run"] = {{"seed", c.seed}, {"out", c.out}};
  return j;
}

}  // namespace gmy
