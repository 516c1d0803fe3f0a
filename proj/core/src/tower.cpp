#include "gmy/tower.hpp"

#include "gmy/hyperbolic_times.hpp"
#include "gmy/random.hpp"

#include <tbb/parallel_for.h>

#include <algorithm>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace gmy {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// ---- induced map

InducedMap::InducedMap(const System& system, const PartitionState& state) : system_(&system), state_(&state) {
  order_.resize(state.elements.size());
  std::iota(order_.begin(), order_.end(), std::size_t(0));
  std::sort(order_.begin(), order_.end(),
            [&](std::size_t a, std::size_t b) { return state.elements[a].t_lo < state.elements[b].t_lo; });
}

std::optional<std::size_t> InducedMap::element_at(double t) const {
  const auto& els = state_->elements;
  auto it = std::upper_bound(order_.begin(), order_.end(), t,
                             [&](double v, std::size_t e) { return v < els[e].t_lo; });
  if (it == order_.begin()) return std::nullopt;
  std::size_t e = *(it - 1);
  if (t <= els[e].t_hi) return e;
  return std::nullopt;
}

double InducedMap::image(double t, std::size_t R) const {
  const auto& ref = state_->ref;
  Point q = ref.leaf.advanced(R).at(*system_, t);
  auto loc = ref.C0.locate(q);
  if (!loc || std::abs(loc->height) > ref.delta_s * (1.0 + 1e-6))
    throw NumericalError("projection failure: induced image escaped the cylinder");
  return loc->t;
}

InducedStep induced_step(const InducedMap& im, double t) {
  auto e = im.element_at(t);
  if (!e) throw ResidualPointError("residual point: leaf parameter lies in no element");
  std::size_t R = im.state().elements[*e].R;
  return {im.image(t, R), R, *e};
}

// ---- invariant density

double total_variation(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

std::vector<double> InvariantDensity::cell_density(const ReferenceStructure& ref) const {
  std::vector<double> d(cells, 0.0);
  const double H = ref.d0_length() / double(cells);
  for (std::size_t p = 0; p < pieces.size(); ++p) d[pieces[p].cell] += mass[p] / H;
  return d;
}

std::vector<double> push_forward(const InvariantDensity& grid, std::span<const double> mass,
                                 const ReferenceStructure& ref) {
  const double lo = ref.d0_lo(), len = ref.d0_length();
  const double H = len / double(grid.cells);
  std::vector<double> cell(grid.cells, 0.0);
  auto cell_of = [&](double x) {
    double k = std::floor((x - lo) / H);
    return std::size_t(std::clamp(k, 0.0, double(grid.cells - 1)));
  };
  for (std::size_t p = 0; p < grid.pieces.size(); ++p) {
    double m = mass[p];
    if (m == 0.0) continue;
    double x0 = std::clamp(std::min(grid.pieces[p].Fa, grid.pieces[p].Fb), lo, lo + len);
    double x1 = std::clamp(std::max(grid.pieces[p].Fa, grid.pieces[p].Fb), lo, lo + len);
    if (!(x1 > x0)) {
      cell[cell_of(x0)] += m;
      continue;
    }
    const double dens = m / (x1 - x0);
    for (std::size_t k = cell_of(x0), k1 = cell_of(x1); k <= k1; ++k) {
      double a = std::max(x0, lo + double(k) * H), b = std::min(x1, lo + double(k + 1) * H);
      if (b > a) cell[k] += dens * (b - a);
    }
  }
  std::vector<double> out(grid.pieces.size());
  for (std::size_t p = 0; p < grid.pieces.size(); ++p)
    out[p] = cell[grid.pieces[p].cell] * (grid.pieces[p].b - grid.pieces[p].a) / H;
  return out;
}

namespace {

double normalize(std::vector<double>& v) {
  double s = std::accumulate(v.begin(), v.end(), 0.0);
  if (s > 0.0)
    for (double& x : v) x /= s;
  return s;
}

}  // namespace

InvariantDensity invariant_density(const InducedMap& im, std::size_t iterations, double tol, std::size_t cells) {
  const auto& st = im.state();
  const auto& ref = st.ref;
  if (st.elements.empty()) throw ParameterError("invariant density needs a nonempty partition");
  if (cells < 1) throw ParameterError("density grid needs at least one cell");
  InvariantDensity nu;
  nu.cells = cells;
  nu.tol = tol;
  const double lo = ref.d0_lo(), H = ref.d0_length() / double(cells);

  for (std::size_t e = 0; e < st.elements.size(); ++e) {
    const auto& el = st.elements[e];
    auto k0 = std::size_t(std::clamp(std::floor((el.t_lo - lo) / H), 0.0, double(cells - 1)));
    auto k1 = std::size_t(std::clamp(std::floor((el.t_hi - lo) / H), 0.0, double(cells - 1)));
    for (std::size_t k = k0; k <= k1; ++k) {
      double a = std::max(el.t_lo, lo + double(k) * H), b = std::min(el.t_hi, lo + double(k + 1) * H);
      if (b > a) nu.pieces.push_back({e, k, a, b, 0.0, 0.0});
    }
  }
  tbb::parallel_for(std::size_t(0), nu.pieces.size(), [&](std::size_t p) {
    auto& pc = nu.pieces[p];
    std::size_t R = st.elements[pc.element].R;
    pc.Fa = im.image(pc.a, R);
    pc.Fb = im.image(pc.b, R);
  });
  for (const auto& pc : nu.pieces) {
    const auto& el = st.elements[pc.element];
    double orient = im.image(el.t_hi, el.R) - im.image(el.t_lo, el.R);
    if ((pc.Fb - pc.Fa) * orient < 0.0) ++nu.non_monotone_pieces;
  }

  std::vector<double> rho(nu.pieces.size());
  for (std::size_t p = 0; p < rho.size(); ++p) rho[p] = nu.pieces[p].b - nu.pieces[p].a;
  normalize(rho);
  // tail-Cesaro: average of iterates floor(k/2)..k, via running prefix sums
  const std::size_t P = rho.size();
  std::vector<std::vector<double>> prefix;
  prefix.reserve(iterations + 2);
  prefix.emplace_back(P, 0.0);
  prefix.push_back(rho);
  auto tail_avg = [&](std::size_t k) {
    std::size_t j0 = k / 2;
    std::vector<double> a(P);
    for (std::size_t p = 0; p < P; ++p) a[p] = (prefix[k + 1][p] - prefix[j0][p]) / double(k + 1 - j0);
    return a;
  };
  std::vector<double> avg = rho;
  for (std::size_t k = 1; k <= iterations; ++k) {
    rho = push_forward(nu, rho, ref);
    normalize(rho);
    std::vector<double> next_prefix(P);
    for (std::size_t p = 0; p < P; ++p) next_prefix[p] = prefix.back()[p] + rho[p];
    prefix.push_back(std::move(next_prefix));
    auto next = tail_avg(k);
    double gap = total_variation(next, avg);
    nu.gaps.push_back(gap);
    avg.swap(next);
    nu.iterations = k;
    nu.last_gap = gap;
    if (gap < tol) {
      nu.converged = true;
      break;
    }
  }
  nu.mass = avg;
  auto pushed = push_forward(nu, nu.mass, ref);
  nu.leak = 1.0 - normalize(pushed);
  nu.stationarity_gap = total_variation(pushed, nu.mass);
  nu.element_weights.assign(st.elements.size(), 0.0);
  for (std::size_t p = 0; p < nu.pieces.size(); ++p) nu.element_weights[nu.pieces[p].element] += nu.mass[p];
  return nu;
}

// ---- lifted measure

TowerMeasure lift_measure(const System& system, std::span<const Point> points, std::span<const double> nu,
                          std::span<const std::size_t> R) {
  TowerMeasure tm;
  std::size_t rmax = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    tm.mass += nu[i] * double(R[i]);
    rmax = std::max(rmax, R[i]);
    Point x = points[i];
    for (std::size_t j = 0; j < R[i]; ++j) {
      tm.mu_hat.push_back({x, nu[i]});
      x = system.apply(x);
    }
  }
  // tail-sum form, accumulated in the other order
  for (std::size_t j = 0; j < rmax; ++j)
    for (std::size_t i = 0; i < points.size(); ++i)
      if (R[i] > j) tm.tail_mass += nu[i];
  tm.mu = tm.mu_hat;
  for (auto& wp : tm.mu) wp.w /= tm.mass;
  return tm;
}

TowerMeasure lift_measure(const System& system, const InvariantDensity& nu, const PartitionState& state) {
  std::vector<Point> pts;
  std::vector<std::size_t> R;
  for (const auto& pc : nu.pieces) {
    pts.push_back(state.ref.leaf.base_point(0.5 * (pc.a + pc.b)));
    R.push_back(state.elements[pc.element].R);
  }
  TowerMeasure tm = lift_measure(system, pts, nu.mass, R);
  tm.nu = nu.element_weights;
  tm.R.clear();
  for (const auto& el : state.elements) tm.R.push_back(el.R);
  return tm;
}

ReturnTimeStats return_time_stats(std::span<const double> nu, std::span<const std::size_t> R,
                                  std::span<const double> leb) {
  ReturnTimeStats s;
  std::size_t rmax = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < nu.size(); ++i) {
    s.mean += nu[i] * double(R[i]);
    total += nu[i];
    rmax = std::max(rmax, R[i]);
  }
  if (total > 0.0) s.mean /= total;
  s.tail.assign(rmax + 1, 0.0);
  for (std::size_t j = 0; j <= rmax; ++j)
    for (std::size_t i = 0; i < nu.size(); ++i)
      if (R[i] > j) s.tail[j] += nu[i];
  for (std::size_t j = 1; j < s.tail.size(); ++j)
    if (s.tail[j] > s.tail[j - 1]) s.tail_non_increasing = false;
  if (!leb.empty()) {
    double lt = 0.0;
    for (std::size_t i = 0; i < leb.size(); ++i) s.leb_mean += leb[i] * double(R[i]), lt += leb[i];
    if (lt > 0.0) s.leb_mean /= lt;
  }
  return s;
}

ReturnTimeStats return_time_stats(const InvariantDensity& nu, const PartitionState& state) {
  std::vector<std::size_t> R;
  std::vector<double> leb;
  for (const auto& el : state.elements) R.push_back(el.R), leb.push_back(el.leb);
  return return_time_stats(nu.element_weights, R, leb);
}

// ---- observables

std::vector<Observable> default_observables() {
  constexpr double tau = 2.0 * std::numbers::pi;
  return {{"cos2pix", [](const Point& p) { return std::cos(tau * p.x); }},
          {"cos2piy", [](const Point& p) { return std::cos(tau * p.y); }},
          {"sin2pix_sin2piy", [](const Point& p) { return std::sin(tau * p.x) * std::sin(tau * p.y); }}};
}

double integrate(std::span<const WeightedPoint> cloud, const Observable& phi) {
  double s = 0.0;
  for (const auto& wp : cloud) s += wp.w * phi.f(wp.x);
  return s;
}

double invariance_defect(const System& system, std::span<const WeightedPoint> cloud, const Observable& phi) {
  double a = 0.0, b = 0.0;
  for (const auto& wp : cloud) {
    a += wp.w * phi.f(system.apply(wp.x));
    b += wp.w * phi.f(wp.x);
  }
  return std::abs(a - b);
}

// ---- counting along orbits

HsrCounts hsr_counts(const System& system, const PartitionState& state, const Point& x, std::size_t n,
                     std::size_t checkpoints) {
  HsrCounts out;
  out.n = n;
  const auto& ref = state.ref;
  InducedMap im(system, state);

  std::vector<char> hyp(n + 1, 0);
  {
    auto log = contraction_log(system, x, n);
    for (auto k : hyperbolic_times(log, ref.sigma).times) hyp[k] = 1;
  }
  std::vector<IntervalSet> sats;
  for (const auto& gen : state.ledger.generations) {
    IntervalSet s;
    for (const auto& e : gen) s.add(e.lo, e.hi);
    sats.push_back(std::move(s));
  }

  std::vector<std::uint32_t> s_events(n + 1, 0), r_events(n + 1, 0);
  Point p = x;
  std::size_t busy_until = 0;  // inside a return cycle until this time
  for (std::size_t k = 0; k <= n; ++k) {
    if (k >= busy_until) {
      auto loc = ref.C0.locate(p);
      bool in_c0 = loc && loc->t >= ref.d0_lo() && loc->t <= ref.d0_hi() && std::abs(loc->height) <= ref.delta_s;
      if (in_c0) {
        auto e = im.element_at(loc->t);
        std::size_t span = e ? state.elements[*e].R : state.n_max;
        for (std::size_t j = state.n0; j <= std::min(span, state.n_max); ++j)
          if (k + j <= n && sats[j - state.n0].contains(loc->t)) ++s_events[k + j];
        if (e) {
          busy_until = k + span;
          if (busy_until <= n) ++r_events[busy_until];
        } else if (k > 0) {
          ++out.untracked_steps;
        }
      } else if (k > 0) {
        ++out.untracked_steps;
      }
    }
    if (k < n) p = system.apply(p);
  }
  out.partial = out.untracked_steps > 0;

  std::size_t H = 0, S = 0, R = 0;
  std::size_t next_cp = 1;
  for (std::size_t k = 1; k <= n; ++k) {
    H += hyp[k];
    S += s_events[k];
    R += r_events[k];
    if (checkpoints > 0 && k * checkpoints >= next_cp * n) {
      out.checkpoints.push_back({k, H, S, R});
      ++next_cp;
    }
  }
  out.H = H;
  out.S = S;
  out.R_cnt = R;
  out.ratio = n > 0 ? double(R) / double(n) : 0.0;
  return out;
}

HsrFit fit_hsr(std::span<const HsrCounts> orbits) {
  HsrFit fit;
  if (orbits.empty()) return fit;
  fit.kappa_prime = std::numeric_limits<double>::infinity();
  double sxy = 0.0, sxx = 0.0;
  for (const auto& o : orbits) {
    fit.kappa_prime = std::min(fit.kappa_prime, o.ratio);
    for (const auto& c : o.checkpoints) {
      sxy += double(c.H) * double(c.R + c.S);
      sxx += double(c.H) * double(c.H);
    }
  }
  fit.kappa = sxx > 0.0 ? 0.5 * sxy / sxx : 0.0;
  for (const auto& o : orbits)
    for (const auto& c : o.checkpoints) {
      ++fit.checkpoints;
      if (double(c.R + c.S) < fit.kappa * double(c.H)) ++fit.violations;
    }
  return fit;
}

// ---- Birkhoff ensembles

BirkhoffReport birkhoff_compare(const System& system, std::span<const WeightedPoint> mu,
                                const std::vector<Observable>& observables, std::size_t starts, std::size_t n,
                                std::uint64_t seed) {
  BirkhoffReport rep;
  rep.starts = starts;
  rep.n = n;
  const std::size_t m = observables.size();
  std::vector<double> avg(starts * m, 0.0);
  tbb::parallel_for(std::size_t(0), starts, [&](std::size_t s) {
    Point x = random_points(seed, 1, s).front();
    std::vector<double> sum(m, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t o = 0; o < m; ++o) sum[o] += observables[o].f(x);
      x = system.apply(x);
    }
    for (std::size_t o = 0; o < m; ++o) avg[s * m + o] = sum[o] / double(n);
  });
  for (std::size_t o = 0; o < m; ++o) {
    BirkhoffRow row;
    row.name = observables[o].name;
    row.integral = integrate(mu, observables[o]);
    for (std::size_t s = 0; s < starts; ++s) {
      row.ensemble_mean += avg[s * m + o] / double(starts);
      row.max_discrepancy = std::max(row.max_discrepancy, std::abs(avg[s * m + o] - row.integral));
    }
    rep.max_discrepancy = std::max(rep.max_discrepancy, row.max_discrepancy);
    rep.rows.push_back(row);
  }
  return rep;
}

// ---- holonomy

HolonomyResult holonomy_jacobian(const System& system, const CuDisk& gamma, const CuDisk& gamma_p,
                                 const Cylinder& cyl, double x_param, std::size_t n_trunc) {
  HolonomyResult res;
  auto lx = cyl.locate(gamma.curve.at(system, x_param));
  if (!lx) throw NumericalError("no intersection: x is not in the cylinder");
  const double tx = lx->t;
  auto offset = [&](double s) -> std::optional<CylinderCoords> { return cyl.locate(gamma_p.curve.at(system, s)); };

  std::optional<double> phi;
  double best_h = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < gamma_p.size(); ++i) {
    auto a = offset(gamma_p.params[i - 1]), b = offset(gamma_p.params[i]);
    if (!a || !b) continue;
    double fa = a->t - tx, fb = b->t - tx;
    if (fa * fb > 0.0) continue;
    double sa = gamma_p.params[i - 1], sb = gamma_p.params[i];
    for (int it = 0; it < 100 && sb - sa > 0.0; ++it) {
      double sm = 0.5 * (sa + sb);
      if (sm == sa || sm == sb) break;
      auto c = offset(sm);
      if (!c) break;
      if ((c->t - tx) * fa > 0.0)
        sa = sm, fa = c->t - tx;
      else
        sb = sm;
    }
    double s = 0.5 * (sa + sb);
    auto c = offset(s);
    if (c && std::abs(c->height - lx->height) <= cyl.delta_s() * 2.0 && std::abs(c->height) < best_h) {
      best_h = std::abs(c->height);
      phi = s;
    }
  }
  if (!phi) throw NumericalError("no intersection: the stable leaf misses gamma_p");
  res.phi_param = *phi;

  auto [px, vx] = gamma.curve.tangent_at(system, x_param);
  auto [py, vy] = gamma_p.curve.tangent_at(system, *phi);
  vx.normalize();
  vy.normalize();
  for (std::size_t k = 0; k < n_trunc; ++k) {
    Vec2 wx = system.derivative(px) * vx, wy = system.derivative(py) * vy;
    double sx = wx.norm(), sy = wy.norm();
    double ratio = sx / sy;
    res.J *= ratio;
    res.increments.push_back(std::abs(ratio - 1.0));
    vx = wx / sx;
    vy = wy / sy;
    px = system.apply(px);
    py = system.apply(py);
  }
  res.last_increment = res.increments.empty() ? 0.0 : res.increments.back();
  return res;
}

double fitted_rate(std::span<const double> seq) {
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < seq.size(); ++k)
    if (seq[k] > 0.0) xs.push_back(double(k)), ys.push_back(std::log(seq[k]));
  if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
  double my = std::accumulate(ys.begin(), ys.end(), 0.0) / double(ys.size());
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) sxx += (xs[i] - mx) * (xs[i] - mx), sxy += (xs[i] - mx) * (ys[i] - my);
  return std::exp(sxy / sxx);
}

// ---- CSV

std::string tails_csv(const ReturnTimeStats& stats) {
  std::ostringstream os;
  os << "j,tail\n";
  for (std::size_t j = 0; j < stats.tail.size(); ++j) os << j << ',' << num(stats.tail[j]) << '\n';
  return os.str();
}

std::string density_csv(std::span<const WeightedPoint> mu, std::size_t g) {
  std::vector<double> h(g * g, 0.0);
  for (const auto& wp : mu) {
    auto ix = std::min(g - 1, std::size_t(wp.x.x * double(g)));
    auto iy = std::min(g - 1, std::size_t(wp.x.y * double(g)));
    h[iy * g + ix] += wp.w;
  }
  std::ostringstream os;
  os << "ix,iy,weight\n";
  for (std::size_t iy = 0; iy < g; ++iy)
    for (std::size_t ix = 0; ix < g; ++ix) os << ix << ',' << iy << ',' << num(h[iy * g + ix]) << '\n';
  return os.str();
}

std::string birkhoff_csv(const BirkhoffReport& rep) {
  std::ostringstream os;
  os << "observable,integral,ensemble_mean,max_discrepancy\n";
  for (const auto& r : rep.rows)
    os << r.name << ',' << num(r.integral) << ',' << num(r.ensemble_mean) << ',' << num(r.max_discrepancy) << '\n';
  return os.str();
}

}  // namespace gmy
