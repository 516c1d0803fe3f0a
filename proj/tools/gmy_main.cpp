#include "gmy/pipeline.hpp"

#include <tbb/global_control.h>

#include <iostream>
#include <memory>

#include "CLI11.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Inducing-scheme toolkit for partially hyperbolic maps on the torus"};
  app.require_subcommand(1, 1);

  std::string config_path, system, sigma, delta1, delta0, n0, nmax, grid, seed, out, horizon;
  std::vector<std::string> params;
  std::size_t threads = 0;

  // every verb takes the same flags
  for (const auto& verb : gmy::verbs()) {
    auto* sub = app.add_subcommand(verb);
    sub->add_option("--config", config_path, "INI file, applied before the flags");
    sub->add_option("--system", system, "cat, mp_skew or perturbed_cat");
    sub->add_option("--param", params, "system parameter k=v (repeatable)");
    sub->add_option("--sigma", sigma);
    sub->add_option("--delta1", delta1);
    sub->add_option("--delta0", delta0, "override; must not exceed its bound");
    sub->add_option("--n0", n0);
    sub->add_option("--nmax", nmax);
    sub->add_option("--grid", grid);
    sub->add_option("--seed", seed);
    sub->add_option("--out", out, "output directory");
    sub->add_option("--horizon", horizon, "orbit horizon for hyperbolic-time statistics");
    sub->add_option("--threads", threads, "worker threads (0: all)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : gmy::kExitConfig;
  }
  const std::string verb = app.get_subcommands().front()->get_name();

  gmy::RunConfig cfg;
  try {
    if (!config_path.empty()) gmy::load_ini(cfg, config_path);
    auto set = [&](const char* key, const std::string& v) {
      if (!v.empty()) gmy::set_value(cfg, key, v);
    };
    set("system.name", system);
    set("constants.sigma", sigma);
    set("constants.delta1", delta1);
    set("constants.delta0", delta0);
    set("constants.n0", n0);
    set("constants.n_max", nmax);
    set("partition.grid", grid);
    set("run.seed", seed);
    set("run.out", out);
    set("orbits.horizon", horizon);
    for (const auto& kv : params) {
      auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) throw gmy::ConfigError("--param expects k=v, got '" + kv + "'");
      gmy::set_value(cfg, "params." + kv.substr(0, eq), kv.substr(eq + 1));
    }
  } catch (const gmy::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return gmy::kExitConfig;
  }

  std::unique_ptr<tbb::global_control> limit;
  if (threads > 0)
    limit = std::make_unique<tbb::global_control>(tbb::global_control::max_allowed_parallelism, threads);
  return gmy::run_command(verb, cfg, std::cout, std::cerr);
}
