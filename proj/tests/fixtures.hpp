#pragma once

#include "gmy/system.hpp"

#include <cmath>

namespace gmy::testing {

// (x + 0.3719, y / 2): neutral along x, contracting along y. No expansion at all.
class DriftSystem final : public System {
 public:
  std::string name() const override { return "drift"; }
  ParamMap parameters() const override { return {}; }
  Point apply(const Point& p) const override { return Point(p.x + 0.3719, 0.5 * p.y).wrapped(); }
  Mat2 derivative(const Point&) const override {
    Mat2 d;
    d << 1.0, 0.0, 0.0, 0.5;
    return d;
  }
  std::optional<Point> inverse(const Point& q) const override {
    if (q.y >= 0.5) return std::nullopt;
    return Point(q.x - 0.3719, 2.0 * q.y).wrapped();
  }
  std::optional<Vec2> exact_stable_direction(const Point&) const override { return Vec2(0.0, 1.0); }
  bool invertible() const override { return false; }
  Point backward_step(const Point& q) const override { return Point(q.x - 0.3719, q.y).wrapped(); }
};

inline const double kPhi = (1.0 + std::sqrt(5.0)) / 2.0;
inline const double kLambdaMinus = (3.0 - std::sqrt(5.0)) / 2.0;

}  // namespace gmy::testing
