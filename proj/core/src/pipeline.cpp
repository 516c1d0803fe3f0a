#include "gmy/pipeline.hpp"

#include "gmy/census.hpp"
#include "gmy/hyperbolic_times.hpp"
#include "gmy/random.hpp"
#include "gmy/tower.hpp"

#include <tbb/parallel_for.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

namespace gmy {

using nlohmann::json;

bool RunReport::all_pass() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

json RunReport::to_json() const {
  json checks_j = json::array();
  for (const auto& c : checks)
    checks_j.push_back({{"name", c.name},
                        {"pass", c.pass},
                        {"value", c.value},
                        {"tol", c.tol},
                        {"relation", c.relation},
                        {"samples", c.samples},
                        {"note", c.note}});
  json j;
  j["verb"] = verb;
  j["config"] = config;
  for (const auto& [k, v] : sections.items()) j[k] = v;
  j["checks"] = checks_j;
  j["all_pass"] = all_pass();
  return j;
}

json RunReport::timings_json() const {
  json j = json::object();
  for (const auto& [k, v] : timings) j[k] = v;
  return j;
}

const std::vector<std::string>& verbs() {
  static const std::vector<std::string> v = {"systems", "certify", "hyptimes", "partition",
                                             "tower",   "census",  "verify",   "report"};
  return v;
}

namespace {

// distinct RNG streams per purpose so stages never share draws
enum Stream : std::uint64_t { kHyptimes = 1, kCensus = 2, kHsr = 3, kBirkhoff = 4, kExpanding = 5 };

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Check make_check(std::string name, double value, double tol, std::string rel, std::size_t samples,
                 std::string note = {}) {
  Check c{std::move(name), false, value, tol, rel, samples, std::move(note)};
  if (rel == "<")
    c.pass = value < tol;
  else if (rel == "<=")
    c.pass = value <= tol;
  else if (rel == ">")
    c.pass = value > tol;
  else
    c.pass = value >= tol;
  if (!std::isfinite(value)) c.pass = false;
  return c;
}

class Pipeline {
 public:
  Pipeline(const RunConfig& cfg, std::ostream* progress)
      : cfg_(cfg), progress_(progress), system_(make_system(cfg.system, cfg.params)) {}

  RunReport report;
  std::vector<std::pair<std::string, std::string>> files;

  void systems();
  void certify();
  void hyptimes();
  void partition();
  void tower();
  void census();
  void verify();

 private:
  const RunConfig& cfg_;
  std::ostream* progress_;
  SystemPtr system_;
  std::unique_ptr<PartitionState> state_;
  std::unique_ptr<InvariantDensity> density_;
  std::unique_ptr<TowerMeasure> mu_;
  bool tower_failed_ = false;

  template <class F>
  void timed(const std::string& stage, F&& f) {
    if (progress_) *progress_ << "[" << stage << "] start\n" << std::flush;
    auto t0 = std::chrono::steady_clock::now();
    f();
    double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.timings.emplace_back(stage, s);
    if (progress_) *progress_ << "[" << stage << "] " << s << " s\n" << std::flush;
  }

  void add(Check c) { report.checks.push_back(std::move(c)); }
  void ensure_partition();
  void ensure_tower();
};

void Pipeline::systems() {
  json list = json::array();
  for (const auto& name : builtin_system_names()) {
    auto s = make_system(name);
    json p = json::object();
    for (const auto& [k, v] : s->parameters()) p[k] = v;
    list.push_back({{"name", name}, {"default_params", p}, {"invertible", s->invertible()}});
  }
  report.sections["systems"] = list;
}

void Pipeline::certify() {
  timed("certify", [&] {
    auto frames = sample_frames(*system_, cfg_.frame_samples);
    auto cert = check_domination(*system_, frames);
    std::size_t failed = 0;
    double worst_residual = 0.0;
    for (const auto& f : frames) {
      if (!f.converged) ++failed;
      worst_residual = std::max(worst_residual, f.residual);
    }
    report.sections["certificates"] = {{"lambda_hat", cert.lambda_hat},
                                       {"lambda_s_hat", cert.lambda_s_hat},
                                       {"samples", cert.sample_count},
                                       {"tol", cert.tol},
                                       {"frames_failed", failed},
                                       {"worst_frame_residual", worst_residual},
                                       {"valid", cert.valid}};
    add(make_check("domination", cert.lambda_hat, 1.0, "<", cert.sample_count,
                   cert.valid ? "" : "some frames did not converge"));
    if (!cert.valid) report.checks.back().pass = false;
  });
}

void Pipeline::hyptimes() {
  timed("hyptimes", [&] {
    auto starts = random_points(stream_seed(cfg_.seed, kHyptimes), cfg_.orbits);
    std::vector<std::optional<OrbitTimeSummary>> rows(starts.size());
    std::vector<std::string> errors(starts.size());
    tbb::parallel_for(std::size_t(0), starts.size(), [&](std::size_t i) {
      try {
        rows[i] = summarize_orbit(*system_, starts[i], cfg_.horizon, *cfg_.sigma, cfg_.nue_epsilon);
      } catch (const NumericalError& e) {
        errors[i] = e.what();
      }
    });
    std::ostringstream csv;
    csv << "orbit,x,y,horizon,frequency,theta_bound,mode,lyapunov\n";
    double worst_slack = std::numeric_limits<double>::infinity();
    std::size_t ok = 0;
    json orbits = json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!rows[i]) {
        orbits.push_back({{"orbit", i}, {"error", errors[i]}});
        continue;
      }
      const auto& r = *rows[i];
      ++ok;
      worst_slack = std::min(worst_slack, r.frequency - r.theta_bound);
      csv << i << ',' << num(r.start.x) << ',' << num(r.start.y) << ',' << r.horizon << ',' << num(r.frequency)
          << ',' << num(r.theta_bound) << ',' << to_string(r.mode) << ',' << num(r.lyapunov) << '\n';
      orbits.push_back({{"orbit", i},
                        {"frequency", r.frequency},
                        {"theta_bound", r.theta_bound},
                        {"mode", to_string(r.mode)},
                        {"lyapunov", r.lyapunov}});
    }
    files.emplace_back("hyptimes.csv", csv.str());
    report.sections["hyptimes"] = {{"sigma", *cfg_.sigma},
                                   {"horizon", cfg_.horizon},
                                   {"epsilon", cfg_.nue_epsilon},
                                   {"note", "tail statistics use the last half of the horizon"},
                                   {"orbits", orbits}};
    // frequency and bound coincide when every time is hyperbolic; allow rounding
    add(make_check("pliss_frequency_slack", ok ? worst_slack : -1.0, -1e-9, ">=", ok,
                   ok == rows.size() ? "" : "orbits with frame failures are excluded"));
  });
}

// Rebuilds the hyperbolic pre-disk an element was selected from.
PreDisk element_predisk(const System& system, const ReferenceStructure& ref, const PartitionElement& el) {
  return hyperbolic_predisk(system, ref.leaf, -ref.leaf_radius, ref.leaf_radius, el.anchor_t, el.generation,
                            ref.delta1);
}

void Pipeline::ensure_partition() {
  if (state_) return;
  ReferenceParams rp;
  rp.sigma = *cfg_.sigma;
  rp.delta1 = cfg_.delta1;
  rp.delta_s = cfg_.delta_s;
  rp.delta0 = cfg_.delta0.value_or(0.0);
  rp.N0 = *cfg_.N0_cap;
  rp.leaf_center = default_leaf_center(*system_);
  ReferenceStructure ref;
  timed("reference", [&] { ref = choose_reference(*system_, rp); });
  PartitionOptions po;
  po.grid = cfg_.grid;
  po.budget = cfg_.budget;
  timed("partition", [&] {
    state_ = std::make_unique<PartitionState>(build_partition(*system_, ref, *cfg_.n0, cfg_.n_max, po));
  });
  files.emplace_back("elements.csv", elements_csv(*state_));
}

void Pipeline::partition() {
  ensure_partition();
  const auto& st = *state_;
  const auto& ref = st.ref;
  timed("partition_checks", [&] {
    report.sections["partition"] = partition_json(st);

    add(make_check("residual_fraction", st.final_residual(), 1e-2, "<", st.grid));

    // pairwise disjointness after sorting by left end
    auto els = st.elements;
    std::sort(els.begin(), els.end(), [](auto& a, auto& b) { return a.t_lo < b.t_lo; });
    double worst_overlap = 0.0;
    for (std::size_t i = 1; i < els.size(); ++i)
      worst_overlap = std::max(worst_overlap, els[i - 1].t_hi - els[i].t_lo);
    add(make_check("elements_disjoint_overlap", worst_overlap, 0.0, "<=", els.size()));

    auto markov = verify_markov(*system_, st, 1e-3);
    json mk = json::array();
    for (const auto& c : markov.checks)
      mk.push_back({{"element", c.element},
                    {"coverage_defect", c.coverage_defect},
                    {"stable_height", c.stable_height},
                    {"pass", c.pass}});
    report.sections["markov"] = {{"checks", mk},
                                 {"worst_defect", markov.worst_defect},
                                 {"worst_height_ratio", markov.worst_height_ratio}};
    auto mc = make_check("markov_coverage_defect", markov.worst_defect, 1e-3, "<", markov.checks.size());
    mc.pass = mc.pass && markov.all_pass && !markov.checks.empty();
    if (markov.checks.empty()) mc.note = "no elements";
    add(mc);

    double worst_ratio = 0.0, worst_c1 = 0.0;
    bool p3 = !st.elements.empty(), p4 = !st.elements.empty();
    std::size_t cone_viol = 0, cone_checked = 0;
    json per = json::array();
    for (std::size_t i = 0; i < st.elements.size(); ++i) {
      const auto& el = st.elements[i];
      PreDisk pd = element_predisk(*system_, ref, el);
      auto cr = backward_contraction_report(*system_, pd, ref.sigma);
      auto dr = distortion_report(*system_, pd);
      worst_ratio = std::max(worst_ratio, cr.worst_ratio);
      worst_c1 = std::max(worst_c1, dr.c1);
      p3 = p3 && cr.pass;
      p4 = p4 && dr.pass;
      auto img = make_disk(*system_, ref.leaf.advanced(el.R), el.t_lo, el.t_hi, ref.delta0 / 16.0, cfg_.budget);
      auto cc = disk_cone_check(*system_, img, ConeParams{cfg_.cone_a});
      cone_viol += cc.violations;
      cone_checked += cc.checked;
      per.push_back({{"element", i},
                     {"contraction_worst_ratio", cr.worst_ratio},
                     {"contraction_pairs", cr.pairs},
                     {"distortion_c1", dr.c1},
                     {"distortion_pairs", dr.pairs},
                     {"cone_violations", cc.violations},
                     {"cone_checked", cc.checked}});
    }
    report.sections["element_reports"] = per;
    auto c3 = make_check("backward_contraction_ratio", worst_ratio, 1.0 + 1e-9, "<=", st.elements.size());
    c3.pass = c3.pass && p3;
    add(c3);
    auto c4 = make_check("distortion_c1", worst_c1, 0.0, ">=", st.elements.size(),
                         "pass means the bound survives doubled sampling on every element");
    c4.pass = p4;
    add(c4);
    add(make_check("cu_cone_violations", double(cone_viol), 0.0, "<=", cone_checked));

    auto sum = satellite_summability(st);
    report.sections["summability"] = summability_json(sum);
    auto cs = make_check("satellite_envelope_rate", sum.envelope_beta, 1.0, "<", sum.envelope_points,
                         sum.converged_at ? "" : "increments did not fall below 1e-6 Leb(Delta_0) before n_max");
    cs.pass = sum.pass();
    add(cs);
  });
}

void Pipeline::ensure_tower() {
  if (density_ || tower_failed_) return;
  ensure_partition();
  if (state_->elements.empty()) {
    tower_failed_ = true;
    return;
  }
  timed("density", [&] {
    InducedMap im(*system_, *state_);
    density_ = std::make_unique<InvariantDensity>(
        invariant_density(im, cfg_.density_iterations, cfg_.density_tol, cfg_.density_cells));
  });
  timed("lift", [&] { mu_ = std::make_unique<TowerMeasure>(lift_measure(*system_, *density_, *state_)); });
}

void Pipeline::tower() {
  ensure_tower();
  if (tower_failed_) {
    report.sections["tower"] = {{"error", "partition has no elements"}};
    add(make_check("tower_built", 0.0, 1.0, ">=", 0, "partition has no elements"));
    return;
  }
  timed("tower_checks", [&] {
    const auto& d = *density_;
    const auto& mu = *mu_;
    auto stats = return_time_stats(d, *state_);
    files.emplace_back("tails.csv", tails_csv(stats));
    files.emplace_back("density.csv", density_csv(mu.mu));

    json inv = json::object();
    double worst_inv = 0.0;
    for (const auto& phi : default_observables()) {
      double v = invariance_defect(*system_, mu.mu, phi);
      inv[phi.name] = {{"integral", integrate(mu.mu, phi)}, {"invariance_defect", v}};
      worst_inv = std::max(worst_inv, v);
    }
    report.sections["tower"] = {{"cells", d.cells},
                                {"iterations", d.iterations},
                                {"tol", d.tol},
                                {"converged", d.converged},
                                {"last_gap", d.last_gap},
                                {"stationarity_gap", d.stationarity_gap},
                                {"leak", d.leak},
                                {"non_monotone_pieces", d.non_monotone_pieces},
                                {"element_weights", d.element_weights},
                                {"mass", mu.mass},
                                {"mean_return_time", stats.mean},
                                {"leb_mean_return_time", stats.leb_mean},
                                {"tail_non_increasing", stats.tail_non_increasing},
                                {"cloud_points", mu.mu.size()},
                                {"observables", inv}};
    add(make_check("mass_identity", std::abs(mu.mass - stats.mean), 1e-10, "<=", d.pieces.size()));
    add(make_check("stationarity_gap", d.stationarity_gap, 2.0 * d.tol, "<", d.pieces.size(),
                   d.converged ? "" : "Cesaro averages did not settle within the iteration cap"));
    add(make_check("invariance_defect", worst_inv, 2e-2, "<=", mu.mu.size()));
    auto ct = make_check("return_time_mean", stats.mean, 0.0, ">", stats.tail.size());
    ct.pass = ct.pass && stats.tail_non_increasing;
    add(ct);
  });
}

void Pipeline::census() {
  timed("census", [&] {
    auto starts = random_points(stream_seed(cfg_.seed, kCensus), cfg_.census_starts);
    auto sigs = omega_signatures(*system_, starts, cfg_.census_burn_in, cfg_.census_horizon, cfg_.census_grid);
    auto cen = cluster_attractors(sigs, cfg_.census_threshold);
    files.emplace_back("census.csv", census_csv(sigs, cen));
    files.emplace_back("distances.csv", distances_csv(cen));

    // weighted samples: the tower measure when one exists, Lebesgue otherwise
    std::vector<WeightedPoint> samples;
    std::string sample_source = "lebesgue";
    if (mu_) {
      samples = mu_->mu;
      sample_source = "tower";
    } else {
      auto pts = random_points(stream_seed(cfg_.seed, kExpanding), cfg_.frame_samples);
      for (const auto& p : pts) samples.push_back({p, 1.0 / double(pts.size())});
    }
    auto ep = find_expanding_power(*system_, samples, cfg_.expanding_N_max);

    json clusters = json::array();
    for (const auto& r : cen.records)
      clusters.push_back({{"id", r.id}, {"members", r.members.size()}, {"support_cells", r.support.size()}});
    json j = {{"starts", sigs.size()},
              {"grid", cfg_.census_grid},
              {"burn_in", cfg_.census_burn_in},
              {"horizon", cfg_.census_horizon},
              {"threshold", cen.threshold},
              {"clusters", cen.records.size()},
              {"records", clusters},
              {"note", "support cells approximate the attractors heuristically"},
              {"expanding_samples", samples.size()},
              {"expanding_sample_source", sample_source},
              {"expanding_dropped", ep.dropped},
              {"expanding_averages", ep.averages}};
    if (ep.result) {
      j["N"] = ep.result->N;
      j["value"] = ep.result->value;
      if (ep.result->N > 1) j["ergodic_note"] = "at most N ergodic components";
    } else {
      j["N"] = nullptr;
      j["value"] = nullptr;
    }
    report.sections["census"] = j;
    add(make_check("expanding_power_value", ep.result ? ep.result->value : 0.0, 0.0, "<", samples.size() - ep.dropped,
                   ep.result ? "" : "no N up to N_max"));
  });
}

void Pipeline::verify() {
  ensure_tower();
  if (tower_failed_) {
    add(make_check("tower_built", 0.0, 1.0, ">=", 0, "partition has no elements"));
    return;
  }
  timed("birkhoff", [&] {
    auto rep = birkhoff_compare(*system_, mu_->mu, default_observables(), cfg_.birkhoff_starts, cfg_.birkhoff_steps,
                                stream_seed(cfg_.seed, kBirkhoff));
    files.emplace_back("birkhoff.csv", birkhoff_csv(rep));
    json rows = json::array();
    for (const auto& r : rep.rows)
      rows.push_back({{"observable", r.name},
                      {"integral", r.integral},
                      {"ensemble_mean", r.ensemble_mean},
                      {"max_discrepancy", r.max_discrepancy}});
    report.sections["birkhoff"] = {{"starts", rep.starts}, {"steps", rep.n}, {"rows", rows}};
    add(make_check("birkhoff_max_discrepancy", rep.max_discrepancy, 5e-2, "<=", rep.starts));
  });
  timed("hsr", [&] {
    auto starts = random_points(stream_seed(cfg_.seed, kHsr), cfg_.hsr_orbits);
    std::vector<HsrCounts> counts(starts.size());
    tbb::parallel_for(std::size_t(0), starts.size(),
                      [&](std::size_t i) { counts[i] = hsr_counts(*system_, *state_, starts[i], cfg_.hsr_steps); });
    auto fit = fit_hsr(counts);
    json orbits = json::array();
    for (const auto& c : counts) {
      json cps = json::array();
      for (const auto& cp : c.checkpoints) cps.push_back({cp.n, cp.H, cp.S, cp.R});
      orbits.push_back({{"H", c.H},
                        {"S", c.S},
                        {"R", c.R_cnt},
                        {"ratio", c.ratio},
                        {"partial", c.partial},
                        {"untracked_steps", c.untracked_steps},
                        {"checkpoints_n_H_S_R", cps}});
    }
    report.sections["hsr"] = {{"steps", cfg_.hsr_steps},
                              {"kappa_prime", fit.kappa_prime},
                              {"kappa", fit.kappa},
                              {"checkpoints", fit.checkpoints},
                              {"violations", fit.violations},
                              {"orbits", orbits}};
    add(make_check("hsr_kappa_prime", fit.kappa_prime, 0.0, ">", counts.size()));
    auto cv = make_check("hsr_checkpoint_violations", double(fit.violations), 0.0, "<=", fit.checkpoints);
    cv.pass = cv.pass && fit.kappa > 0.0;
    add(cv);
  });
}

}  // namespace

RunReport run_pipeline(const std::string& verb, const RunConfig& cfg,
                       std::vector<std::pair<std::string, std::string>>& files, std::ostream* progress) {
  if (std::find(verbs().begin(), verbs().end(), verb) == verbs().end())
    throw ConfigError("unknown verb '" + verb + "'");
  Pipeline p(cfg, progress);
  p.report.verb = verb;
  p.report.config = config_json(cfg);
  if (verb == "systems") p.systems();
  if (verb == "certify" || verb == "report") p.certify();
  if (verb == "hyptimes" || verb == "report") p.hyptimes();
  if (verb == "partition" || verb == "report") p.partition();
  if (verb == "tower" || verb == "report") p.tower();
  if (verb == "verify" || verb == "report") p.verify();
  // after the tower so the expanding-power samples come from mu when available
  if (verb == "census" || verb == "report") p.census();
  files = std::move(p.files);
  return std::move(p.report);
}

int run_command(const std::string& verb, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  RunConfig resolved;
  try {
    resolved = resolve(cfg);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  RunReport rep;
  std::vector<std::pair<std::string, std::string>> files;
  try {
    rep = run_pipeline(verb, resolved, files, &err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParameterError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const BudgetExceeded& e) {
    err << "budget exhausted: " << e.what() << '\n';
    return kExitBudget;
  }

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(resolved.out, ec);
  if (ec) {
    err << "config error: cannot create output directory '" << resolved.out << "': " << ec.message() << '\n';
    return kExitConfig;
  }
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream f(fs::path(resolved.out) / name, std::ios::binary);
    f << body;
    if (!f) throw std::runtime_error("cannot write " + name);
  };
  for (const auto& [name, body] : files) write(name, body);
  write("report.json", rep.to_json().dump(2) + "\n");
  write("timings.json", rep.timings_json().dump(2) + "\n");

  std::size_t failed = 0;
  for (const auto& c : rep.checks)
    if (!c.pass) {
      ++failed;
      err << "FAILED " << c.name << ": " << c.value << " " << c.relation << " " << c.tol
          << (c.note.empty() ? "" : " (" + c.note + ")") << '\n';
    }
  out << verb << ": " << rep.checks.size() - failed << "/" << rep.checks.size() << " checks passed, artifacts in "
      << resolved.out << '\n';
  return failed ? kExitCheckFailed : kExitOk;
}

}  // namespace gmy
