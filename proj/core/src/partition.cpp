#include "gmy/partition.hpp"

#include "gmy/hyperbolic_times.hpp"

#include <tbb/parallel_for.h>

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace gmy {

// ---- interval sets

IntervalSet::IntervalSet(std::vector<std::pair<double, double>> parts) {
  for (auto [a, b] : parts) add(a, b);
}

void IntervalSet::add(double a, double b) {
  if (b < a) std::swap(a, b);
  std::vector<std::pair<double, double>> out;
  bool placed = false;
  for (auto [lo, hi] : parts_) {
    if (hi < a) {
      out.emplace_back(lo, hi);
    } else if (lo > b) {
      if (!placed) out.emplace_back(a, b), placed = true;
      out.emplace_back(lo, hi);
    } else {
      a = std::min(a, lo);
      b = std::max(b, hi);
    }
  }
  if (!placed) out.emplace_back(a, b);
  parts_.swap(out);
}

void IntervalSet::subtract(double a, double b) {
  if (b < a) std::swap(a, b);
  std::vector<std::pair<double, double>> out;
  for (auto [lo, hi] : parts_) {
    if (hi <= a || lo >= b) {
      out.emplace_back(lo, hi);
      continue;
    }
    if (lo < a) out.emplace_back(lo, a);
    if (hi > b) out.emplace_back(b, hi);
  }
  parts_.swap(out);
}

bool IntervalSet::contains(double t) const {
  auto it = std::upper_bound(parts_.begin(), parts_.end(), t,
                             [](double v, const std::pair<double, double>& p) { return v < p.first; });
  return it != parts_.begin() && t <= std::prev(it)->second;
}

bool IntervalSet::contains(double a, double b) const {
  for (auto [lo, hi] : parts_)
    if (a >= lo && b <= hi) return true;
  return false;
}

bool IntervalSet::intersects(double a, double b) const { return overlap(a, b) > 0.0; }

double IntervalSet::measure() const {
  double m = 0.0;
  for (auto [lo, hi] : parts_) m += hi - lo;
  return m;
}

double IntervalSet::overlap(double a, double b) const {
  double m = 0.0;
  for (auto [lo, hi] : parts_) m += std::max(0.0, std::min(hi, b) - std::max(lo, a));
  return m;
}

// ---- reference structure

double delta0_bound(double delta1, double sigma, std::size_t N0, double K0) {
  return delta1 * std::pow(sigma, double(N0)) / (2.0 * std::pow(K0, 2.0 * double(N0)));
}

Point default_leaf_center(const System& system) {
  if (auto mp = dynamic_cast<const MpSkew*>(&system)) return mp->period_two_point();
  return {0.0, 0.0};
}

std::size_t default_recurrence_cap(const System& system) {
  return dynamic_cast<const MpSkew*>(&system) ? 2 : 1;
}

CuDisk reference_leaf(const System& system, const ReferenceParams& params) {
  Vec2 dir = params.leaf_dir ? params.leaf_dir->normalized()
                             : estimate_splitting(system, params.leaf_center).e_cu;
  if (dir(0) < 0) dir = -dir;
  return segment_disk(system, params.leaf_center, dir, params.delta1 / 4.0, params.delta1 / 400.0);
}

ReferenceStructure choose_reference(const System& system, const ReferenceParams& params) {
  return choose_reference(system, reference_leaf(system, params), params);
}

ReferenceStructure choose_reference(const System& system, const CuDisk& leaf, const ReferenceParams& params) {
  if (!(params.sigma > 0.0 && params.sigma < 1.0)) throw ParameterError("sigma must lie in (0,1)");
  if (!(params.delta1 > 0.0)) throw ParameterError("delta1 must be positive");
  if (params.N0 < 1) throw ParameterError("N0 must be >= 1");
  if (leaf.curve.steps != 0) throw ParameterError("reference leaf must be a straight segment");
  const double radius = std::min(-leaf.t_min(), leaf.t_max());
  if (radius < params.delta1 / 4.0 * (1.0 - 1e-12))
    throw ParameterError("reference leaf radius below delta1/4");

  ReferenceStructure ref;
  ref.leaf = leaf.curve;
  ref.leaf_radius = radius;
  ref.N0 = params.N0;
  ref.sigma = params.sigma;
  ref.delta1 = params.delta1;
  ref.delta_s = params.delta_s > 0.0 ? params.delta_s : params.delta1 / 4.0;
  if (!(ref.delta_s < params.delta1 / 2.0)) throw ParameterError("delta_s must be below delta1/2");
  ref.K0 = max_derivative_norm(system, params.k0_grid);
  ref.delta0_bound = delta0_bound(params.delta1, params.sigma, params.N0, ref.K0);
  if (params.delta0 > ref.delta0_bound) {
    char msg[160];
    std::snprintf(msg, sizeof msg, "delta0 = %.6g exceeds its bound delta1 sigma^N0 / (2 K0^(2 N0)) = %.6g",
                  params.delta0, ref.delta0_bound);
    throw ParameterError(msg);
  }
  ref.delta0 = params.delta0 > 0.0 ? params.delta0 : 0.5 * ref.delta0_bound;

  const double res = ref.delta0 / 8.0;
  std::vector<CuDisk> images;
  for (std::size_t m = 1; m <= params.N0; ++m)
    images.push_back(make_disk(system, leaf.curve.advanced(m), -radius, radius, res));

  const double reach = radius - 1.01 * ref.delta0;
  const std::size_t half = std::max<std::size_t>(1, params.scan / 2);
  const double h = reach / double(half);
  for (std::size_t c = 0; c < 2 * half + 1; ++c) {
    // 0, +h, -h, +2h, -2h, ...
    double t = c == 0 ? 0.0 : (c % 2 == 1 ? 1.0 : -1.0) * h * double((c + 1) / 2);
    Cylinder cyl(system, leaf.curve, t - ref.delta0, t + ref.delta0, ref.delta_s);
    for (std::size_t m = 1; m <= params.N0; ++m) {
      const CuDisk& img = images[m - 1];
      for (const auto& cr : find_crossings(system, img, cyl)) {
        // the crossing must meet W^s_{delta_s/2}(p)
        double best = std::numeric_limits<double>::infinity();
        for (auto [param, bt] : cr.projection) {
          auto loc = cyl.locate(img.curve.at(system, param));
          if (loc && std::abs(loc->t - t) <= 0.5 * ref.delta0) best = std::min(best, std::abs(loc->height));
        }
        if (best <= 0.5 * ref.delta_s) {
          ref.p_t = t;
          ref.p = leaf.curve.base_point(t);
          ref.recurrence = m;
          ref.C0 = std::move(cyl);
          return ref;
        }
      }
    }
  }
  throw ReferenceSearchFailed("reference-search-failed: no recurrent candidate within N0 = " +
                              std::to_string(params.N0) + " steps");
}

// ---- construction

std::string to_string(OwnerKind kind) {
  switch (kind) {
    case OwnerKind::element: return "element";
    case OwnerKind::boundary: return "boundary";
    case OwnerKind::unresolved: return "unresolved";
    case OwnerKind::no_crossing: return "no_crossing";
  }
  return "unresolved";
}

double SatelliteLedger::owned_measure(std::size_t n, long owner) const {
  IntervalSet s;
  for (const auto& e : at(n))
    if (e.kind == OwnerKind::element && e.owner == owner) s.add(e.lo, e.hi);
  return s.measure();
}

namespace {

struct AnchorData {
  std::vector<char> hyperbolic;  // index n-1
  std::vector<double> log_j;     // log stretch of f^k along the leaf, k = 0..K
};

struct Candidate {
  double lo, hi;
  std::size_t m;
  std::size_t anchor;
  double pre_lo, pre_hi;
};

}  // namespace

PartitionState build_partition(const System& system, const ReferenceStructure& ref, std::size_t n0,
                               std::size_t n_max, const PartitionOptions& opts) {
  if (n0 < 1 || n_max < n0) throw ParameterError("need 1 <= n0 <= n_max");
  if (opts.grid < 4) throw ParameterError("grid must have at least 4 cells");
  PartitionState st;
  st.ref = ref;
  st.n0 = n0;
  st.n_max = n_max;
  st.grid = opts.grid;
  st.ledger.n0 = n0;

  const double d0_len = ref.d0_length();
  const double h = d0_len / double(opts.grid);
  const double min_width = double(opts.min_cells) * h;
  const double res = opts.crossing_resolution > 0.0 ? opts.crossing_resolution : ref.delta0 / 8.0;
  const std::size_t K = n_max + ref.N0;

  std::vector<double> anchor_t(opts.grid);
  for (std::size_t i = 0; i < opts.grid; ++i) anchor_t[i] = ref.d0_lo() + (double(i) + 0.5) * h;

  // per-anchor hyperbolic times and leaf stretch, each slot written by one task
  std::vector<AnchorData> data(opts.grid);
  tbb::parallel_for(std::size_t(0), opts.grid, [&](std::size_t i) {
    AnchorData& a = data[i];
    Point x = ref.leaf.base_point(anchor_t[i]);
    auto log = contraction_log(system, x, n_max);
    auto rep = hyperbolic_times(log, ref.sigma);
    a.hyperbolic.assign(n_max, 0);
    for (auto n : rep.times) a.hyperbolic[n - 1] = 1;
    a.log_j.resize(K + 1);
    Vec2 v = ref.leaf.dir;
    double acc = 0.0;
    a.log_j[0] = 0.0;
    for (std::size_t k = 1; k <= K; ++k) {
      Vec2 w = system.derivative(x) * v;
      double nw = w.norm();
      acc += std::log(nw);
      v = w / nw;
      x = system.apply(x);
      a.log_j[k] = acc;
    }
  });

  IntervalSet residual({{ref.d0_lo(), ref.d0_hi()}});
  const double leaf_lo = -ref.leaf_radius, leaf_hi = ref.leaf_radius;

  for (std::size_t n = n0; n <= n_max; ++n) {
    std::vector<SatelliteEntry> entries;
    std::vector<Candidate> cands;
    std::vector<std::pair<std::size_t, PreDisk>> covers;  // (anchor, V_n)

    // (i)+(ii): flagged anchors of Delta_{n-1}, covered greedily in arc order
    double covered_hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < opts.grid; ++i) {
      if (!data[i].hyperbolic[n - 1] || !residual.contains(anchor_t[i])) continue;
      if (anchor_t[i] <= covered_hi) continue;
      double j = std::exp(data[i].log_j[n]);
      bool resolvable = false;
      for (std::size_t m = 0; m <= ref.N0; ++m)
        if (d0_len * std::exp(-data[i].log_j[n + m]) >= min_width) resolvable = true;
      if (!resolvable) {
        // every candidate would be narrower than the grid: record the
        // first-order pre-disk, skip the solve and the crossing search
        double w = ref.delta1 / j;
        double lo = std::max(leaf_lo, anchor_t[i] - w), hi = std::min(leaf_hi, anchor_t[i] + w);
        entries.push_back({OwnerKind::unresolved, -1, lo, hi, anchor_t[i]});
        covered_hi = hi;
        ++st.log.grid_resolution_skips;
        continue;
      }
      try {
        PreDisk pd = hyperbolic_predisk(system, ref.leaf, leaf_lo, leaf_hi, anchor_t[i], n, ref.delta1, 1e-3, j);
        covered_hi = pd.hi;
        covers.emplace_back(i, pd);
      } catch (const NumericalError& e) {
        double w = ref.delta1 / j;
        double lo = std::max(leaf_lo, anchor_t[i] - w), hi = std::min(leaf_hi, anchor_t[i] + w);
        entries.push_back({OwnerKind::unresolved, -1, lo, hi, anchor_t[i]});
        covered_hi = hi;
        if (st.log.messages.size() < 50) st.log.messages.push_back("generation " + std::to_string(n) + ": " + e.what());
      }
    }
    st.log.cover_points += covers.size();

    // (iii): smallest m with a u-crossing; crossings are independent per cover point
    std::vector<std::optional<Candidate>> found(covers.size());
    std::vector<int> status(covers.size(), 0);  // 0 ok, 1 grid skip, 2 no crossing, 3 budget
    tbb::parallel_for(std::size_t(0), covers.size(), [&](std::size_t c) {
      const auto& [i, pd] = covers[c];
      for (std::size_t m = 0; m <= ref.N0; ++m) {
        CuDisk img;
        try {
          img = make_disk(system, ref.leaf.advanced(n + m), pd.lo, pd.hi, res, opts.budget);
        } catch (const BudgetExceeded&) {
          status[c] = 3;
          return;
        }
        auto cr = u_cross_project(system, img, ref.C0);
        if (!cr) continue;
        double lo = std::min(cr->first.param_lo, cr->first.param_hi);
        double hi = std::max(cr->first.param_lo, cr->first.param_hi);
        if (hi - lo < min_width) {
          status[c] = 1;
          return;
        }
        found[c] = Candidate{lo, hi, m, i, pd.lo, pd.hi};
        return;
      }
      status[c] = 2;
    });

    for (std::size_t c = 0; c < covers.size(); ++c) {
      const auto& [i, pd] = covers[c];
      if (found[c]) {
        cands.push_back(*found[c]);
        continue;
      }
      OwnerKind k = status[c] == 2 ? OwnerKind::no_crossing : OwnerKind::unresolved;
      if (status[c] == 1) ++st.log.grid_resolution_skips;
      if (status[c] == 2) ++st.log.no_crossing;
      if (status[c] == 3) st.log.messages.push_back("generation " + std::to_string(n) + ": crossing search over budget");
      entries.push_back({k, -1, pd.lo, pd.hi, anchor_t[i]});
    }

    // (iv)+(v): greedy disjoint selection in ascending arc order
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.lo < b.lo; });
    for (const auto& c : cands) {
      if (residual.contains(c.lo, c.hi)) {
        PartitionElement el;
        el.t_lo = c.lo;
        el.t_hi = c.hi;
        el.generation = n;
        el.m = c.m;
        el.R = n + c.m;
        el.anchor_t = anchor_t[c.anchor];
        el.pre_lo = c.pre_lo;
        el.pre_hi = c.pre_hi;
        el.leb = c.hi - c.lo;
        st.elements.push_back(el);
        residual.subtract(c.lo, c.hi);
        entries.push_back({OwnerKind::element, long(st.elements.size() - 1), c.pre_lo, c.pre_hi, el.anchor_t});
        continue;
      }
      long owner = -1;
      if (c.lo >= ref.d0_lo() && c.hi <= ref.d0_hi()) {
        for (std::size_t e = 0; e < st.elements.size(); ++e)
          if (std::min(c.hi, st.elements[e].t_hi) > std::max(c.lo, st.elements[e].t_lo)) {
            owner = long(e);
            break;
          }
      }
      if (owner >= 0) {
        ++st.log.rejected_overlap;
        entries.push_back({OwnerKind::element, owner, c.pre_lo, c.pre_hi, anchor_t[c.anchor]});
      } else {
        ++st.log.rejected_boundary;
        entries.push_back({OwnerKind::boundary, -1, c.pre_lo, c.pre_hi, anchor_t[c.anchor]});
      }
    }

    IntervalSet s_n;
    for (const auto& e : entries) s_n.add(e.lo, e.hi);
    st.ledger.totals.push_back(s_n.measure());
    st.ledger.generations.push_back(std::move(entries));
    st.residuals.push_back(residual.measure() / d0_len);
  }
  st.residual = residual;
  st.log.elements = st.elements.size();
  return st;
}

// ---- verification

MarkovCheck verify_element(const System& system, const ReferenceStructure& ref, const PartitionElement& el,
                           std::size_t index, double tol) {
  MarkovCheck chk;
  chk.element = index;
  const double len = ref.d0_length();
  CuDisk img = make_disk(system, ref.leaf.advanced(el.R), el.t_lo, el.t_hi, ref.delta0 / 16.0);
  double tmin = std::numeric_limits<double>::infinity(), tmax = -tmin;
  bool in_band = true;
  for (const auto& q : img.samples) {
    auto loc = ref.C0.locate(q);
    if (!loc || std::abs(loc->height) > ref.delta_s * (1.0 + 1e-9) || loc->t < ref.d0_lo() - tol * len ||
        loc->t > ref.d0_hi() + tol * len) {
      in_band = false;
      continue;
    }
    tmin = std::min(tmin, loc->t);
    tmax = std::max(tmax, loc->t);
  }
  double covered = tmax > tmin ? std::min(tmax, ref.d0_hi()) - std::max(tmin, ref.d0_lo()) : 0.0;
  chk.coverage_defect = std::max(0.0, 1.0 - covered / len);

  for (double t : {el.t_lo, 0.5 * (el.t_lo + el.t_hi), el.t_hi}) {
    StableLeaf leaf = stable_leaf(system, ref.leaf.base_point(t), ref.delta_s);
    Point c = leaf.base, a = leaf.end_lo(), b = leaf.end_hi();
    for (std::size_t k = 0; k < el.R; ++k) {
      c = system.apply(c);
      a = system.apply(a);
      b = system.apply(b);
    }
    chk.stable_height = std::max({chk.stable_height, torus_distance(c, a), torus_distance(c, b)});
  }
  chk.pass = in_band && chk.coverage_defect < tol && chk.stable_height <= ref.delta_s / 4.0 + 1e-12;
  return chk;
}

MarkovReport verify_markov(const System& system, const PartitionState& state, double tol) {
  MarkovReport rep;
  rep.checks.resize(state.elements.size());
  tbb::parallel_for(std::size_t(0), state.elements.size(), [&](std::size_t i) {
    rep.checks[i] = verify_element(system, state.ref, state.elements[i], i, tol);
  });
  for (const auto& c : rep.checks) {
    rep.worst_defect = std::max(rep.worst_defect, c.coverage_defect);
    rep.worst_height_ratio = std::max(rep.worst_height_ratio, c.stable_height / state.ref.delta_s);
    rep.all_pass = rep.all_pass && c.pass;
  }
  return rep;
}

SummabilityReport satellite_summability(const PartitionState& state) {
  SummabilityReport rep;
  rep.leb = state.ledger.totals;
  double acc = 0.0;
  for (double v : rep.leb) rep.partial_sums.push_back(acc += v);
  const double thr = 1e-6 * state.ref.d0_length();
  // first generation from which every later increment stays below thr
  std::size_t k = rep.leb.size();
  while (k > 0 && rep.leb[k - 1] < thr) --k;
  if (k + 1 < rep.leb.size()) rep.converged_at = state.n0 + k;

  std::vector<double> xs, ys;
  std::vector<std::size_t> owner_of;
  for (std::size_t e = 0; e < state.elements.size(); ++e) {
    const auto& el = state.elements[e];
    for (std::size_t n = el.generation; n <= state.n_max; ++n) {
      double r = state.ledger.owned_measure(n, long(e)) / el.leb;
      if (r > 0.0) {
        xs.push_back(double(n - el.generation));
        ys.push_back(std::log(r));
      }
    }
  }
  rep.envelope_points = xs.size();
  if (xs.size() >= 3) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
    mx /= double(xs.size());
    my /= double(xs.size());
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) sxx += (xs[i] - mx) * (xs[i] - mx), sxy += (xs[i] - mx) * (ys[i] - my);
    if (sxx > 0.0) {
      double slope = sxy / sxx;
      rep.envelope_beta = std::exp(slope);
      double logc = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < xs.size(); ++i) logc = std::max(logc, ys[i] - slope * xs[i]);
      rep.envelope_C = std::exp(logc);
      rep.envelope_valid = true;
    }
  }
  return rep;
}

// ---- serialization

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string elements_csv(const PartitionState& state) {
  std::ostringstream os;
  os << "id,generation,m,R,t_lo,t_hi,leb,anchor_t\n";
  for (std::size_t i = 0; i < state.elements.size(); ++i) {
    const auto& e = state.elements[i];
    os << i << ',' << e.generation << ',' << e.m << ',' << e.R << ',' << num(e.t_lo) << ',' << num(e.t_hi)
       << ',' << num(e.leb) << ',' << num(e.anchor_t) << '\n';
  }
  return os.str();
}

nlohmann::json partition_json(const PartitionState& state) {
  using nlohmann::json;
  const auto& r = state.ref;
  json j;
  j["reference"] = {{"p", {r.p.x, r.p.y}},
                    {"p_t", r.p_t},
                    {"N0", r.N0},
                    {"recurrence", r.recurrence},
                    {"delta0", r.delta0},
                    {"delta0_bound", r.delta0_bound},
                    {"delta_s", r.delta_s},
                    {"delta1", r.delta1},
                    {"K0", r.K0},
                    {"leaf_center", {r.leaf.origin.x, r.leaf.origin.y}},
                    {"leaf_dir", {r.leaf.dir(0), r.leaf.dir(1)}},
                    {"leaf_radius", r.leaf_radius}};
  j["n0"] = state.n0;
  j["n_max"] = state.n_max;
  j["grid"] = state.grid;
  json els = json::array();
  for (const auto& e : state.elements)
    els.push_back({{"t_lo", e.t_lo}, {"t_hi", e.t_hi}, {"generation", e.generation}, {"m", e.m}, {"R", e.R}, {"leb", e.leb}});
  j["elements"] = els;
  j["satellite_totals"] = state.ledger.totals;
  j["residuals"] = state.residuals;
  j["log"] = {{"cover_points", state.log.cover_points},
              {"elements", state.log.elements},
              {"grid_resolution_skips", state.log.grid_resolution_skips},
              {"no_crossing", state.log.no_crossing},
              {"rejected_overlap", state.log.rejected_overlap},
              {"rejected_boundary", state.log.rejected_boundary},
              {"messages", state.log.messages}};
  return j;
}

nlohmann::json summability_json(const SummabilityReport& rep) {
  nlohmann::json j;
  j["leb"] = rep.leb;
  j["partial_sums"] = rep.partial_sums;
  j["converged_at"] = rep.converged_at ? nlohmann::json(*rep.converged_at) : nlohmann::json(nullptr);
  j["envelope"] = {{"C", rep.envelope_C},
                   {"beta", rep.envelope_beta},
                   {"points", rep.envelope_points},
                   {"valid", rep.envelope_valid}};
  j["pass"] = rep.pass();
  return j;
}

}  // namespace gmy
