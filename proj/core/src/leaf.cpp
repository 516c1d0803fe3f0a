#include "gmy/leaf.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace gmy {

namespace {

// 5-point Gauss-Legendre on [-1,1]
constexpr std::array<double, 5> kGLx = {0.0, -0.5384693101056831, 0.5384693101056831,
                                        -0.9061798459386640, 0.9061798459386640};
constexpr std::array<double, 5> kGLw = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                        0.2369268850561891, 0.2369268850561891};

double stretch(const System& system, const Curve& curve, double t, std::size_t extra) {
  return curve.advanced(extra).tangent_at(system, t).second.norm();
}

double gauss5(const System& system, const Curve& curve, double a, double b, std::size_t extra) {
  const double h = 0.5 * (b - a), m = 0.5 * (a + b);
  double s = 0.0;
  for (std::size_t i = 0; i < 5; ++i) s += kGLw[i] * stretch(system, curve, m + h * kGLx[i], extra);
  return s * h;
}

double adaptive(const System& system, const Curve& curve, double a, double b, std::size_t extra,
                double whole, int depth) {
  const double m = 0.5 * (a + b);
  double left = gauss5(system, curve, a, m, extra);
  double right = gauss5(system, curve, m, b, extra);
  double both = left + right;
  if (depth >= 30 || std::abs(both - whole) <= 1e-14 + 1e-11 * std::abs(both)) return both;
  return adaptive(system, curve, a, m, extra, left, depth + 1) +
         adaptive(system, curve, m, b, extra, right, depth + 1);
}

double polyline_length(const std::vector<Point>& pts, std::vector<double>& arc) {
  arc.assign(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) arc[i] = arc[i - 1] + torus_distance(pts[i - 1], pts[i]);
  return arc.empty() ? 0.0 : arc.back();
}

void refine(const System& system, CuDisk& disk, std::size_t budget) {
  auto& params = disk.params;
  auto& pts = disk.samples;
  pts.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) pts[i] = disk.curve.at(system, params[i]);
  for (;;) {
    std::vector<double> np;
    std::vector<Point> npts;
    np.reserve(params.size() * 2);
    npts.reserve(params.size() * 2);
    bool changed = false;
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (i > 0 && torus_distance(pts[i - 1], pts[i]) > disk.resolution) {
        double mid = 0.5 * (params[i - 1] + params[i]);
        if (mid > params[i - 1] && mid < params[i]) {
          np.push_back(mid);
          npts.push_back(disk.curve.at(system, mid));
          changed = true;
        }
      }
      np.push_back(params[i]);
      npts.push_back(pts[i]);
    }
    if (np.size() > budget) throw BudgetExceeded("disk refinement exceeded the sample budget");
    params.swap(np);
    pts.swap(npts);
    if (!changed) break;
  }
  polyline_length(pts, disk.arc_params);
  disk.max_gap = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    disk.max_gap = std::max(disk.max_gap, torus_distance(pts[i - 1], pts[i]));
}

std::size_t nearest_index(const std::vector<double>& params, double t) {
  auto it = std::lower_bound(params.begin(), params.end(), t);
  if (it == params.end()) return params.size() - 1;
  std::size_t i = std::size_t(it - params.begin());
  if (i > 0 && t - params[i - 1] < params[i] - t) --i;
  return i;
}

}  // namespace

Point Curve::at(const System& system, double t) const {
  Point p = base_point(t);
  for (std::size_t k = 0; k < steps; ++k) p = system.apply(p);
  return p;
}

std::pair<Point, Vec2> Curve::tangent_at(const System& system, double t) const {
  Point p = base_point(t);
  Vec2 v = dir;
  for (std::size_t k = 0; k < steps; ++k) {
    v = system.derivative(p) * v;
    p = system.apply(p);
  }
  return {p, v};
}

double image_arc_length(const System& system, const Curve& curve, double a, double b, std::size_t extra) {
  if (a == b) return 0.0;
  if (a > b) std::swap(a, b);
  return adaptive(system, curve, a, b, extra, gauss5(system, curve, a, b, extra), 0);
}

std::vector<double> image_arc_lengths(const System& system, const Curve& curve, double a, double b,
                                      std::size_t levels) {
  std::vector<double> out(levels + 1, 0.0);
  if (a == b) return out;
  if (a > b) std::swap(a, b);
  constexpr std::size_t kPanels = 4;
  const double w = (b - a) / kPanels;
  for (std::size_t p = 0; p < kPanels; ++p) {
    const double m = a + (p + 0.5) * w;
    for (std::size_t i = 0; i < 5; ++i) {
      auto [pt, v] = curve.tangent_at(system, m + 0.5 * w * kGLx[i]);
      const double wt = kGLw[i] * 0.5 * w;
      out[0] += wt * v.norm();
      for (std::size_t k = 1; k <= levels; ++k) {
        v = system.derivative(pt) * v;
        pt = system.apply(pt);
        out[k] += wt * v.norm();
      }
    }
  }
  return out;
}

double CuDisk::param_at_arc(double arc) const {
  if (arc <= 0.0) return params.front();
  if (arc >= length()) return params.back();
  auto it = std::upper_bound(arc_params.begin(), arc_params.end(), arc);
  std::size_t i = std::size_t(it - arc_params.begin());
  double a0 = arc_params[i - 1], a1 = arc_params[i];
  double u = a1 > a0 ? (arc - a0) / (a1 - a0) : 0.0;
  return params[i - 1] + u * (params[i] - params[i - 1]);
}

CuDisk make_disk(const System& system, const Curve& curve, double a, double b, double resolution,
                 std::size_t budget) {
  if (!(resolution > 0.0)) throw ParameterError("disk resolution must be positive");
  if (!(b > a)) throw ParameterError("disk parameter interval is empty");
  CuDisk d;
  d.curve = curve;
  d.resolution = resolution;
  double est = image_arc_length(system, curve, a, b);
  double want = std::ceil(est / resolution) + 1.0;
  if (want > double(budget)) throw BudgetExceeded("disk refinement exceeded the sample budget");
  std::size_t n = std::max<std::size_t>(3, std::size_t(want));
  d.params.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.params[i] = a + (b - a) * double(i) / double(n - 1);
  d.params.back() = b;
  refine(system, d, budget);
  d.center_index = nearest_index(d.params, 0.5 * (a + b));
  return d;
}

CuDisk segment_disk(const System& system, const Point& center, const Vec2& dir, double radius,
                    double resolution) {
  if (!(radius > 0.0)) throw ParameterError("disk radius must be positive");
  Curve c{center, dir.normalized(), 0};
  CuDisk d = make_disk(system, c, -radius, radius, resolution);
  d.center_index = nearest_index(d.params, 0.0);
  return d;
}

CuDisk iterate_disk(const System& system, const CuDisk& disk, std::size_t steps, std::size_t budget) {
  CuDisk d;
  d.curve = disk.curve.advanced(steps);
  d.resolution = disk.resolution;
  d.params = disk.params;
  refine(system, d, budget);
  d.center_index = nearest_index(d.params, disk.params[disk.center_index]);
  return d;
}

ConeCheck disk_cone_check(const System& system, const CuDisk& disk, ConeParams cone,
                          const FrameOptions& opts) {
  ConeCheck out;
  if (disk.size() < 3) return out;
  const std::size_t stride = std::max<std::size_t>(1, (disk.size() - 2) / 64);
  for (std::size_t i = 1; i + 1 < disk.size(); i += stride) {
    auto [p, v] = disk.curve.tangent_at(system, disk.params[i]);
    SplittingFrame f = estimate_splitting(system, p, opts);
    Vec2 c = f.decompose(v);
    double r = std::abs(c(0)) / std::abs(c(1));
    out.worst_ratio = std::max(out.worst_ratio, r);
    ++out.checked;
    if (!in_cone({p, v}, f, cone, ConeKind::cu, opts.min_angle)) ++out.violations;
  }
  return out;
}

// ---- pre-disks

namespace {

// Parameter b on the given side of t0 with arc length of f^n(curve[t0,b]) == target.
double solve_side(const System& system, const Curve& curve, double t0, double limit, double target,
                  std::size_t n, double abs_tol, double guess) {
  const double sign = limit > t0 ? 1.0 : -1.0;
  auto len = [&](double b) { return image_arc_length(system, curve, t0, b, n); };
  auto deriv = [&](double b) { return stretch(system, curve, b, n); };

  double lo = t0, hi;  // bracket in "distance from t0" order
  double g = guess;
  if (sign * (g - t0) <= 0.0 || !std::isfinite(g)) g = t0 + sign * std::abs(limit - t0) * 1e-3;
  if (sign * (g - limit) > 0.0) g = limit;
  // expand until the arc length passes the target
  double lg = len(g);
  while (lg < target) {
    lo = g;
    if (g == limit) throw NumericalError("insufficient disk: pre-disk leaves the parent disk");
    double step = 2.0 * (g - t0);
    g = t0 + step;
    if (sign * (g - limit) > 0.0) g = limit;
    lg = len(g);
  }
  hi = g;
  for (int it = 0; it < 200; ++it) {
    if (std::abs(lg - target) <= abs_tol) return g;
    if (lg < target)
      lo = g;
    else
      hi = g;
    double d = deriv(g);
    if (!(d > 0.0) || !std::isfinite(d)) throw NumericalError("degenerate disk: vanishing tangential stretch");
    double next = g - sign * (lg - target) / d;
    bool inside = sign > 0 ? (next > std::min(lo, hi) && next < std::max(lo, hi))
                           : (next < std::max(lo, hi) && next > std::min(lo, hi));
    if (!inside) next = 0.5 * (lo + hi);
    if (next == g) return g;
    g = next;
    lg = len(g);
  }
  return g;
}

}  // namespace

PreDisk hyperbolic_predisk(const System& system, const Curve& curve, double t_min, double t_max,
                           double anchor_t, std::size_t n, double delta1, double tol,
                           double stretch_hint) {
  if (!(delta1 > 0.0)) throw ParameterError("delta1 must be positive");
  if (anchor_t < t_min || anchor_t > t_max) throw ParameterError("anchor outside the disk");
  double j = stretch_hint > 0.0 ? stretch_hint : stretch(system, curve, anchor_t, n);
  if (!(j > 0.0) || !std::isfinite(j)) throw NumericalError("degenerate disk: vanishing tangential stretch");
  const double abs_tol = 0.25 * tol * delta1;
  PreDisk pd;
  pd.curve = curve;
  pd.anchor_t = anchor_t;
  pd.anchor = curve.at(system, anchor_t);
  pd.n = n;
  pd.delta1 = delta1;
  pd.hi = solve_side(system, curve, anchor_t, t_max, delta1, n, abs_tol, anchor_t + delta1 / j);
  pd.lo = solve_side(system, curve, anchor_t, t_min, delta1, n, abs_tol, anchor_t - delta1 / j);
  // V_n^+ may not fit in the parent disk; truncate it there
  try {
    pd.plus_hi = solve_side(system, curve, anchor_t, t_max, 2 * delta1, n, abs_tol,
                            anchor_t + 2.0 * (pd.hi - anchor_t));
  } catch (const NumericalError&) {
    pd.plus_hi = t_max;
    pd.plus_truncated = true;
  }
  try {
    pd.plus_lo = solve_side(system, curve, anchor_t, t_min, 2 * delta1, n, abs_tol,
                            anchor_t - 2.0 * (anchor_t - pd.lo));
  } catch (const NumericalError&) {
    pd.plus_lo = t_min;
    pd.plus_truncated = true;
  }
  return pd;
}

PreDisk hyperbolic_predisk(const System& system, const CuDisk& disk, std::size_t anchor_index,
                           std::size_t n, double delta1, double tol) {
  if (anchor_index >= disk.size()) throw ParameterError("anchor index out of range");
  return hyperbolic_predisk(system, disk.curve, disk.t_min(), disk.t_max(), disk.params[anchor_index], n,
                            delta1, tol);
}

namespace {

// Arc lengths of every level over consecutive sample intervals, prefix-summed.
std::vector<std::vector<double>> level_prefix(const System& system, const Curve& curve,
                                              const std::vector<double>& ts, std::size_t levels) {
  std::vector<std::vector<double>> pre(levels + 1, std::vector<double>(ts.size(), 0.0));
  for (std::size_t i = 1; i < ts.size(); ++i) {
    auto seg = image_arc_lengths(system, curve, ts[i - 1], ts[i], levels);
    for (std::size_t k = 0; k <= levels; ++k) pre[k][i] = pre[k][i - 1] + seg[k];
  }
  return pre;
}

std::vector<double> uniform(double a, double b, std::size_t m) {
  std::vector<double> ts(m);
  for (std::size_t i = 0; i < m; ++i) ts[i] = a + (b - a) * double(i) / double(m - 1);
  return ts;
}

}  // namespace

ContractionReport backward_contraction_report(const System& system, const PreDisk& pd, double sigma,
                                              std::size_t samples) {
  if (!(sigma > 0.0 && sigma < 1.0)) throw ParameterError("sigma must lie in (0,1)");
  ContractionReport rep;
  if (pd.n == 0 || samples < 2) return rep;
  auto ts = uniform(pd.plus_lo, pd.plus_hi, samples);
  auto pre = level_prefix(system, pd.curve, ts, pd.n);
  for (std::size_t i = 0; i < ts.size(); ++i)
    for (std::size_t j = i + 1; j < ts.size(); ++j) {
      ++rep.pairs;
      double dn = pre[pd.n][j] - pre[pd.n][i];
      for (std::size_t k = 1; k <= pd.n; ++k) {
        double dk = pre[pd.n - k][j] - pre[pd.n - k][i];
        rep.worst_ratio = std::max(rep.worst_ratio, dk / (std::pow(sigma, 0.75 * double(k)) * dn));
      }
    }
  rep.pass = rep.worst_ratio <= 1.0 + 1e-9;
  return rep;
}

double unstable_jacobian(const System& system, const CuDisk& disk, double arc_point, std::size_t n) {
  double t = disk.param_at_arc(arc_point);
  auto [p, v] = disk.curve.tangent_at(system, t);
  double j = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    Vec2 w = system.derivative(p) * v;
    j *= w.norm() / v.norm();
    v = w;
    p = system.apply(p);
  }
  return j;
}

namespace {

double distortion_c1(const System& system, const PreDisk& pd, std::size_t samples, std::size_t& pairs) {
  auto ts = uniform(pd.lo, pd.hi, samples);
  auto pre = level_prefix(system, pd.curve, ts, pd.n);
  std::vector<double> logj(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    double base = stretch(system, pd.curve, ts[i], 0);
    logj[i] = std::log(stretch(system, pd.curve, ts[i], pd.n) / base);
  }
  double c1 = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i)
    for (std::size_t j = i + 1; j < ts.size(); ++j) {
      ++pairs;
      double dist = pre[pd.n][j] - pre[pd.n][i];
      if (dist > 0.0) c1 = std::max(c1, std::abs(logj[i] - logj[j]) / dist);
    }
  return c1;
}

}  // namespace

DistortionReport distortion_report(const System& system, const PreDisk& pd, std::size_t samples) {
  DistortionReport rep;
  if (samples < 2) return rep;
  rep.c1 = distortion_c1(system, pd, samples, rep.pairs);
  // a jump in the derivative inside the pre-disk shows up as C1 growing with
  // the sampling density, so the bound must survive doubling
  rep.c1_refined = distortion_c1(system, pd, 2 * samples - 1, rep.pairs);
  rep.pass = std::isfinite(rep.c1) && std::isfinite(rep.c1_refined) &&
             std::abs(rep.c1_refined - rep.c1) <= 0.1 * rep.c1 + 1e-9;
  return rep;
}

// ---- stable leaves

Point StableLeaf::point_at(double s) const {
  if (direction) return translate(base, s * *direction);
  if (arc.empty()) return base;
  if (s <= arc.front()) return translate(base, offsets.front());
  if (s >= arc.back()) return translate(base, offsets.back());
  auto it = std::upper_bound(arc.begin(), arc.end(), s);
  std::size_t i = std::size_t(it - arc.begin());
  double u = (s - arc[i - 1]) / (arc[i] - arc[i - 1]);
  return translate(base, (1.0 - u) * offsets[i - 1] + u * offsets[i]);
}

namespace {

constexpr std::size_t kLeafSamples = 65;

// Pull back the segment through f^N(x) along e_s and trim to arc radius delta_s.
// Returns offsets at the uniform arc grid [-delta_s, delta_s].
std::optional<std::vector<Vec2>> pulled_leaf(const System& system, const Point& x, double delta_s,
                                             std::size_t N, double contraction) {
  auto fwd = orbit(system, x, N);
  const Point y = fwd[N];
  const Vec2 e = estimate_splitting(system, y).e_s;
  const Vec2 e0 = estimate_splitting(system, x).e_s;
  double rho = 1.5 * delta_s * contraction;
  for (int attempt = 0; attempt < 6; ++attempt, rho *= 2.0) {
    auto pull = [&](double r) {
      Point p = translate(y, r * e);
      for (std::size_t k = 0; k < N; ++k) p = *system.inverse(p);
      return torus_delta(x, p);
    };
    std::vector<double> rs;
    std::vector<Vec2> off;
    for (std::size_t i = 0; i < kLeafSamples; ++i) {
      rs.push_back(-rho + 2.0 * rho * double(i) / double(kLeafSamples - 1));
      off.push_back(pull(rs.back()));
    }
    const double gap = delta_s / 64.0;
    for (int pass = 0; pass < 30; ++pass) {
      std::vector<double> nr;
      std::vector<Vec2> no;
      bool changed = false;
      for (std::size_t i = 0; i < rs.size(); ++i) {
        if (i > 0 && (off[i] - off[i - 1]).norm() > gap) {
          double m = 0.5 * (rs[i - 1] + rs[i]);
          nr.push_back(m);
          no.push_back(pull(m));
          changed = true;
        }
        nr.push_back(rs[i]);
        no.push_back(off[i]);
      }
      rs.swap(nr);
      off.swap(no);
      if (!changed || rs.size() > 200000) break;
    }
    // arc positions measured from x (r = 0 is the middle sample)
    std::size_t mid = std::size_t(std::lower_bound(rs.begin(), rs.end(), 0.0) - rs.begin());
    std::vector<double> arc(rs.size(), 0.0);
    for (std::size_t i = mid + 1; i < rs.size(); ++i) arc[i] = arc[i - 1] + (off[i] - off[i - 1]).norm();
    for (std::size_t i = mid; i-- > 0;) arc[i] = arc[i + 1] - (off[i + 1] - off[i]).norm();
    if (arc.front() > -delta_s || arc.back() < delta_s) continue;
    // orient along e_s(x)
    double sgn = off.back().dot(e0) >= 0.0 ? 1.0 : -1.0;
    std::vector<Vec2> out(kLeafSamples);
    for (std::size_t i = 0; i < kLeafSamples; ++i) {
      double s = sgn * (-delta_s + 2.0 * delta_s * double(i) / double(kLeafSamples - 1));
      auto it = std::upper_bound(arc.begin(), arc.end(), s);
      std::size_t j = std::clamp<std::size_t>(std::size_t(it - arc.begin()), 1, arc.size() - 1);
      double u = (s - arc[j - 1]) / (arc[j] - arc[j - 1]);
      out[i] = (1.0 - u) * off[j - 1] + u * off[j];
    }
    return out;
  }
  return std::nullopt;
}

}  // namespace

StableLeaf stable_leaf(const System& system, const Point& x, double delta_s, double max_delta_s, double tol) {
  if (!(delta_s > 0.0) || delta_s > max_delta_s)
    throw ParameterError("stable leaf radius out of range");
  StableLeaf leaf;
  leaf.base = x;
  leaf.radius = delta_s;
  leaf.extent_lo = leaf.extent_hi = delta_s;
  if (auto d = system.exact_stable_direction(x)) {
    Vec2 e = d->normalized();
    leaf.direction = e;
    if (system.stable_fibres_are_intervals()) {
      // the fibre coordinate is an interval; clip at its ends
      double c = e(1) >= 0 ? 1.0 : -1.0;
      leaf.extent_hi = std::min(delta_s, c > 0 ? 1.0 - x.y : x.y);
      leaf.extent_lo = std::min(delta_s, c > 0 ? x.y : 1.0 - x.y);
    }
    leaf.arc = {-leaf.extent_lo, leaf.extent_hi};
    leaf.offsets = {-leaf.extent_lo * e, leaf.extent_hi * e};
    return leaf;
  }
  if (!system.invertible()) throw NumericalError("stable leaf: curved leaves need an invertible system");
  // contraction of f^N along E^s at x, used to size the segment at f^N(x)
  std::optional<std::vector<Vec2>> prev;
  for (std::size_t N : {6u, 9u, 12u, 15u, 18u, 21u, 24u}) {
    Vec2 v = estimate_splitting(system, x).e_s;
    Point p = x;
    for (std::size_t k = 0; k < N; ++k) {
      v = system.derivative(p) * v;
      p = system.apply(p);
    }
    auto cur = pulled_leaf(system, x, delta_s, N, v.norm());
    if (!cur) continue;
    if (prev) {
      double diff = 0.0;
      for (std::size_t i = 0; i < cur->size(); ++i) diff = std::max(diff, ((*cur)[i] - (*prev)[i]).norm());
      if (diff <= tol) {
        leaf.offsets = *cur;
        leaf.arc.resize(kLeafSamples);
        for (std::size_t i = 0; i < kLeafSamples; ++i)
          leaf.arc[i] = -delta_s + 2.0 * delta_s * double(i) / double(kLeafSamples - 1);
        return leaf;
      }
    }
    prev = cur;
  }
  throw NumericalError("stable leaf: backward shooting did not converge");
}

// ---- cylinders

Cylinder::Cylinder(const System& system, Curve base, double t_lo, double t_hi, double delta_s,
                   std::size_t n_leaves)
    : base_(base), t_lo_(t_lo), t_hi_(t_hi), delta_s_(delta_s) {
  if (base.steps != 0) throw ParameterError("cylinder base must be a straight segment");
  if (!(t_hi > t_lo)) throw ParameterError("cylinder base interval is empty");
  if (!(delta_s > 0.0)) throw ParameterError("cylinder height must be positive");
  const double mid = 0.5 * (t_lo + t_hi);
  if (auto d = system.exact_stable_direction(base.base_point(mid))) {
    straight_dir_ = d->normalized();
    return;
  }
  if (n_leaves < 2) n_leaves = 2;
  // leaves slightly beyond the sides so exits can be classified
  const double margin = 0.1 * (t_hi - t_lo);
  for (std::size_t i = 0; i < n_leaves; ++i) {
    double t = t_lo - margin + (t_hi - t_lo + 2 * margin) * double(i) / double(n_leaves - 1);
    leaf_t_.push_back(t);
    leaves_.push_back(stable_leaf(system, base.base_point(t), delta_s));
  }
}

namespace {

// Signed transverse offset and leaf arc of displacement v from a polyline leaf.
// The end segments are extended so points beyond the leaf still get coordinates.
std::pair<double, double> leaf_coords(const StableLeaf& leaf, const Vec2& v, const Vec2& dir) {
  double best = std::numeric_limits<double>::infinity();
  double s_best = 0.0, d_best = 0.0;
  const std::size_t m = leaf.offsets.size();
  for (std::size_t i = 1; i < m; ++i) {
    Vec2 a = leaf.offsets[i - 1], b = leaf.offsets[i];
    Vec2 seg = b - a;
    double len = seg.norm();
    Vec2 tan = seg / len;
    double u = (v - a).dot(tan);
    if (i > 1) u = std::max(u, 0.0);
    if (i + 1 < m) u = std::min(u, len);
    Vec2 c = a + u * tan;
    double dist = (v - c).norm();
    if (dist < best) {
      best = dist;
      s_best = leaf.arc[i - 1] + u;
      Vec2 nrm(-tan(1), tan(0));
      if (nrm.dot(dir) < 0) nrm = -nrm;
      d_best = (v - c).dot(nrm);
    }
  }
  return {d_best, s_best};
}

}  // namespace

std::optional<CylinderCoords> Cylinder::locate(const Point& q) const {
  Vec2 d = torus_delta(base_.origin, q);
  if (straight_dir_) {
    Mat2 m;
    m.col(0) = base_.dir;
    m.col(1) = *straight_dir_;
    Vec2 c = m.partialPivLu().solve(d);
    if (!std::isfinite(c(0)) || !std::isfinite(c(1))) return std::nullopt;
    return CylinderCoords{c(0), c(1)};
  }
  std::vector<double> off(leaves_.size()), arc(leaves_.size());
  for (std::size_t i = 0; i < leaves_.size(); ++i) {
    Vec2 v = torus_delta(leaves_[i].base, q);
    if (v.norm() > 4.0 * (delta_s_ + (t_hi_ - t_lo_))) return std::nullopt;
    auto [o, s] = leaf_coords(leaves_[i], v, base_.dir);
    off[i] = o;
    arc[i] = s;
  }
  // offsets decrease along the base; find the sign change (or extrapolate)
  std::size_t j = 1;
  while (j + 1 < leaves_.size() && off[j] > 0.0) ++j;
  double denom = off[j - 1] - off[j];
  if (denom == 0.0) return std::nullopt;
  double u = off[j - 1] / denom;
  return CylinderCoords{leaf_t_[j - 1] + u * (leaf_t_[j] - leaf_t_[j - 1]), arc[j - 1] + u * (arc[j] - arc[j - 1])};
}

bool Cylinder::contains(const Point& q) const {
  auto c = locate(q);
  return c && c->t >= t_lo_ && c->t <= t_hi_ && std::abs(c->height) <= delta_s_;
}

// ---- crossings

namespace {

struct Loc {
  bool valid = false;
  double t = 0.0, h = 0.0;
};

Loc locate_point(const Cylinder& cyl, const Point& p) {
  Loc l;
  if (auto c = cyl.locate(p)) {
    l.valid = true;
    l.t = c->t;
    l.h = c->height;
  }
  return l;
}

// -1 exit through the low side, +1 through the high side, 0 otherwise.
int side_of(const Cylinder& cyl, const Loc& l) {
  if (!l.valid || std::abs(l.h) > cyl.delta_s() * (1.0 + 1e-9)) return 0;
  if (l.t < cyl.t_lo()) return -1;
  if (l.t > cyl.t_hi()) return 1;
  return 0;
}

bool inside(const Cylinder& cyl, const Loc& l) {
  return l.valid && l.t >= cyl.t_lo() && l.t <= cyl.t_hi() && std::abs(l.h) <= cyl.delta_s();
}

// Disk parameter where the base coordinate meets the given side, between an
// outside parameter and an inside one.
std::pair<double, double> bisect_side(const System& system, const Curve& curve, const Cylinder& cyl,
                                      double p_out, double p_in, int side) {
  const double target = side < 0 ? cyl.t_lo() : cyl.t_hi();
  for (int it = 0; it < 80; ++it) {
    double m = 0.5 * (p_out + p_in);
    if (m == p_out || m == p_in) break;
    Loc l = locate_point(cyl, curve.at(system, m));
    bool beyond = l.valid && (side < 0 ? l.t < target : l.t > target);
    (beyond ? p_out : p_in) = m;
  }
  Loc l = locate_point(cyl, curve.at(system, p_in));
  return {p_in, l.valid ? l.t : target};
}

}  // namespace

std::vector<Crossing> find_crossings(const System& system, const CuDisk& disk, const Cylinder& cyl,
                                     double coverage_tol) {
  std::vector<Crossing> out;
  const std::size_t n = disk.size();
  if (n == 0) return out;
  std::vector<Loc> loc(n);
  for (std::size_t i = 0; i < n; ++i) loc[i] = locate_point(cyl, disk.samples[i]);
  const double len = cyl.base_length();
  auto end_side = [&](const Loc& l) {
    if (!l.valid || std::abs(l.h) > cyl.delta_s()) return 0;
    if (std::abs(l.t - cyl.t_lo()) <= coverage_tol * len) return -1;
    if (std::abs(l.t - cyl.t_hi()) <= coverage_tol * len) return 1;
    return 0;
  };
  auto finish = [&](Crossing c) {
    std::sort(c.projection.begin(), c.projection.end());
    double tmin = c.projection.front().second, tmax = tmin;
    for (auto& pr : c.projection) {
      tmin = std::min(tmin, pr.second);
      tmax = std::max(tmax, pr.second);
    }
    double covered = std::min(tmax, cyl.t_hi()) - std::max(tmin, cyl.t_lo());
    c.coverage_defect = std::max(0.0, 1.0 - covered / len);
    if (c.coverage_defect <= coverage_tol) out.push_back(std::move(c));
  };

  std::size_t i = 0;
  while (i < n) {
    if (!inside(cyl, loc[i])) {
      // a crossing that slips between two samples
      if (i + 1 < n && !inside(cyl, loc[i + 1])) {
        int a = side_of(cyl, loc[i]), b = side_of(cyl, loc[i + 1]);
        if (a != 0 && b != 0 && a != b) {
          double pm = 0.5 * (disk.params[i] + disk.params[i + 1]);
          Loc lm = locate_point(cyl, disk.curve.at(system, pm));
          if (inside(cyl, lm)) {
            Crossing c;
            auto [p0, t0] = bisect_side(system, disk.curve, cyl, disk.params[i], pm, a);
            auto [p1, t1] = bisect_side(system, disk.curve, cyl, disk.params[i + 1], pm, b);
            c.param_lo = p0;
            c.param_hi = p1;
            c.projection = {{p0, t0}, {pm, lm.t}, {p1, t1}};
            finish(std::move(c));
          }
        }
      }
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < n && inside(cyl, loc[j + 1])) ++j;
    int left = i == 0 ? end_side(loc[0]) : side_of(cyl, loc[i - 1]);
    int right = j + 1 == n ? end_side(loc[n - 1]) : side_of(cyl, loc[j + 1]);
    if (left != 0 && right != 0 && left != right) {
      Crossing c;
      if (i == 0) {
        c.param_lo = disk.params[0];
        c.projection.emplace_back(disk.params[0], loc[0].t);
      } else {
        auto [p, t] = bisect_side(system, disk.curve, cyl, disk.params[i - 1], disk.params[i], left);
        c.param_lo = p;
        c.projection.emplace_back(p, t);
      }
      for (std::size_t k = i; k <= j; ++k) c.projection.emplace_back(disk.params[k], loc[k].t);
      if (j + 1 == n) {
        c.param_hi = disk.params[n - 1];
      } else {
        auto [p, t] = bisect_side(system, disk.curve, cyl, disk.params[j + 1], disk.params[j], right);
        c.param_hi = p;
        c.projection.emplace_back(p, t);
      }
      finish(std::move(c));
    }
    i = j + 1;
  }
  return out;
}

std::optional<CrossingResult> u_cross_project(const System& system, const CuDisk& disk, const Cylinder& cyl,
                                              double coverage_tol) {
  auto all = find_crossings(system, disk, cyl, coverage_tol);
  if (all.empty()) return std::nullopt;
  return CrossingResult{all.front(), all.size()};
}

}  // namespace gmy
