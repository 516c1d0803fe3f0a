#pragma once

#include "gmy/cones.hpp"

#include <optional>
#include <vector>

namespace gmy {

/// f^steps of the straight chart segment t -> origin + t*dir (dir unit).
/// Every disk in the toolkit is described this way, so image points are always
/// recomputed from the generating parameter rather than from stored images.
struct Curve {
  Point origin;
  Vec2 dir = Vec2(1.0, 0.0);
  std::size_t steps = 0;

  Point base_point(double t) const { return translate(origin, t * dir); }
  Point at(const System& system, double t) const;
  /// Point and (unnormalized) tangent Df^steps(base(t)) * dir.
  std::pair<Point, Vec2> tangent_at(const System& system, double t) const;
  Curve advanced(std::size_t n) const { return {origin, dir, steps + n}; }
};

/// Arc length of f^extra(curve[a,b]), computed as the integral of the
/// tangential stretch (no point differences, so it stays accurate on tiny arcs).
double image_arc_length(const System& system, const Curve& curve, double a, double b,
                        std::size_t extra = 0);

/// Arc lengths of f^k(curve[a,b]) for every k = 0..levels, from one shared
/// set of quadrature nodes.
std::vector<double> image_arc_lengths(const System& system, const Curve& curve, double a, double b,
                                      std::size_t levels);

/// Refinable centre-unstable curve: samples of `curve` on [params.front(), params.back()].
struct CuDisk {
  Curve curve;
  std::vector<double> params;
  std::vector<Point> samples;
  std::vector<double> arc_params;  // cumulative polyline length
  std::size_t center_index = 0;
  double max_gap = 0.0;
  double resolution = 0.0;

  double t_min() const { return params.front(); }
  double t_max() const { return params.back(); }
  double length() const { return arc_params.empty() ? 0.0 : arc_params.back(); }
  std::size_t size() const { return samples.size(); }
  /// Disk parameter at a given arc position (linear interpolation).
  double param_at_arc(double arc) const;
};

inline constexpr std::size_t kDefaultSampleBudget = std::size_t(1) << 22;

/// Samples of curve on [a,b] refined until consecutive image gaps are <= resolution.
/// Throws BudgetExceeded when more than `budget` samples would be needed.
CuDisk make_disk(const System& system, const Curve& curve, double a, double b, double resolution,
                 std::size_t budget = kDefaultSampleBudget);

/// Straight segment of half-length radius centred at `center`, refined to resolution.
CuDisk segment_disk(const System& system, const Point& center, const Vec2& dir, double radius,
                    double resolution);

/// f^steps(disk), refined on image gaps.
CuDisk iterate_disk(const System& system, const CuDisk& disk, std::size_t steps,
                    std::size_t budget = kDefaultSampleBudget);

struct ConeCheck {
  std::size_t checked = 0;
  std::size_t violations = 0;
  double worst_ratio = 0.0;  // max |v_s| / |v_cu| over interior tangents
};

/// Verifies the exact tangents at interior samples against the cu-cone of width a.
ConeCheck disk_cone_check(const System& system, const CuDisk& disk, ConeParams cone,
                          const FrameOptions& opts = {});

/// Hyperbolic pre-disk V_n(x) and its enlargement V_n^+(x) on a disk.
struct PreDisk {
  Curve curve;  // the parent disk's curve
  double lo = 0.0, hi = 0.0;            // V_n(x) in curve parameters
  double plus_lo = 0.0, plus_hi = 0.0;  // V_n^+(x)
  double anchor_t = 0.0;
  Point anchor;
  std::size_t n = 0;
  double delta1 = 0.0;
  bool plus_truncated = false;  // V_n^+ clipped at the parent disk's ends

  double length() const { return hi - lo; }
};

/// Bisection/Newton search for the parameters whose f^n image has arc radius
/// delta1 (and 2 delta1) on both sides of f^n(anchor), to tolerance tol*delta1.
/// Throws NumericalError("insufficient disk") or ("degenerate disk").
PreDisk hyperbolic_predisk(const System& system, const CuDisk& disk, std::size_t anchor_index,
                           std::size_t n, double delta1, double tol = 1e-3);
PreDisk hyperbolic_predisk(const System& system, const Curve& curve, double t_min, double t_max,
                           double anchor_t, std::size_t n, double delta1, double tol = 1e-3,
                           double stretch_hint = 0.0);

struct ContractionReport {
  double worst_ratio = 0.0;  // max over pairs and k of d_{n-k} / (sigma^{3k/4} d_n)
  std::size_t pairs = 0;
  bool pass = true;
};

/// Backward contraction on V_n^+(x): dist along f^{n-k} <= sigma^{3k/4} dist along f^n.
ContractionReport backward_contraction_report(const System& system, const PreDisk& pd, double sigma,
                                              std::size_t samples = 9);

/// Product of tangential stretch factors of f^n at the disk point with the
/// given arc position.
double unstable_jacobian(const System& system, const CuDisk& disk, double arc_point, std::size_t n);

struct DistortionReport {
  double c1 = 0.0;  // max |log J(y)/J(z)| / dist_{f^n D}(f^n y, f^n z)
  double c1_refined = 0.0;  // same with doubled sampling
  std::size_t pairs = 0;
  bool pass = true;
};

/// Passes when C1 is finite and moves by at most 10% when the sampling is doubled.
DistortionReport distortion_report(const System& system, const PreDisk& pd, std::size_t samples = 17);

/// Local stable leaf W^s_{delta_s}(x): an exact straight segment when the
/// system knows its stable direction, otherwise a polyline obtained by pulling
/// back a short transversal segment from f^N(x).
struct StableLeaf {
  Point base;
  double radius = 0.0;
  double extent_lo = 0.0;  // available length on the negative side (after clipping)
  double extent_hi = 0.0;
  std::optional<Vec2> direction;
  std::vector<double> arc;      // polyline arc positions in [-extent_lo, extent_hi]
  std::vector<Vec2> offsets;    // displacement from base at each arc position

  bool straight() const { return direction.has_value(); }
  Point point_at(double s) const;
  Point end_lo() const { return point_at(-extent_lo); }
  Point end_hi() const { return point_at(extent_hi); }
};

StableLeaf stable_leaf(const System& system, const Point& x, double delta_s, double max_delta_s = 0.25,
                       double tol = 1e-8);

/// Local coordinates of a point near a cylinder: base-curve parameter of the
/// stable leaf through it and signed position along that leaf.
struct CylinderCoords {
  double t = 0.0;
  double height = 0.0;
};

/// Union of stable leaves of radius delta_s over a straight base disk.
class Cylinder {
 public:
  Cylinder() = default;
  Cylinder(const System& system, Curve base, double t_lo, double t_hi, double delta_s,
           std::size_t n_leaves = 17);

  const Curve& base() const { return base_; }
  double t_lo() const { return t_lo_; }
  double t_hi() const { return t_hi_; }
  double delta_s() const { return delta_s_; }
  double base_length() const { return t_hi_ - t_lo_; }

  /// Coordinates of q, or nullopt when q is far from the cylinder.
  std::optional<CylinderCoords> locate(const Point& q) const;
  bool contains(const Point& q) const;

 private:
  Curve base_;
  double t_lo_ = 0.0, t_hi_ = 0.0, delta_s_ = 0.0;
  std::optional<Vec2> straight_dir_;
  std::vector<double> leaf_t_;
  std::vector<StableLeaf> leaves_;
};

/// One u-crossing of a disk through a cylinder.
struct Crossing {
  double param_lo = 0.0, param_hi = 0.0;  // disk parameters bounding the component
  double coverage_defect = 0.0;           // uncovered fraction of the base disk
  std::vector<std::pair<double, double>> projection;  // (disk param, base param)
};

/// All crossing components of the disk, in arc order. Endpoints are refined by
/// bisection onto the cylinder sides.
std::vector<Crossing> find_crossings(const System& system, const CuDisk& disk, const Cylinder& cyl,
                                     double coverage_tol = 1e-3);

struct CrossingResult {
  Crossing first;
  std::size_t count = 0;
};

/// First crossing component by arc order, with the total number found.
std::optional<CrossingResult> u_cross_project(const System& system, const CuDisk& disk,
                                              const Cylinder& cyl, double coverage_tol = 1e-3);

}  // namespace gmy
