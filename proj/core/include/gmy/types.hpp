#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace gmy {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Reduce a real to [0,1). Floor-based, so negative intermediates wrap too.
inline double wrap_unit(double v) {
  double r = v - std::floor(v);
  // v slightly below an integer can round to exactly 1.0
  return r >= 1.0 ? 0.0 : r;
}

/// Point on the flat torus chart [0,1)^2.
struct Point {
  double x = 0.0;
  double y = 0.0;

  Point() = default;
  Point(double x_, double y_) : x(x_), y(y_) {}
  explicit Point(const Vec2& v) : x(v(0)), y(v(1)) {}

  Vec2 vec() const { return {x, y}; }
  Point wrapped() const { return {wrap_unit(x), wrap_unit(y)}; }
  bool operator==(const Point&) const = default;
};

/// Shortest chart displacement from a to b (minimum-image convention).
inline Vec2 torus_delta(const Point& a, const Point& b) {
  auto d = [](double u) { return u - std::round(u); };
  return {d(b.x - a.x), d(b.y - a.y)};
}

inline double torus_distance(const Point& a, const Point& b) {
  return torus_delta(a, b).norm();
}

inline Point translate(const Point& p, const Vec2& v) {
  return Point(p.x + v(0), p.y + v(1)).wrapped();
}

/// Tangent vector attached to a chart point.
struct TangentVector {
  Point base;
  Vec2 components = Vec2::Zero();
};

/// Thrown for constraint violations in numerical routines (degenerate frames,
/// insufficient disks, non-convergence where the caller asked for a hard failure).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a caller-supplied parameter is outside its admissible range.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a refinement or search loop exhausts its budget.
class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gmy
