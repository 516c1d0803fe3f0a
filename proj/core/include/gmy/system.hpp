#pragma once

#include "gmy/types.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace gmy {

using ParamMap = std::map<std::string, double>;

/// A map of the flat 2-torus with an exact analytic derivative.
///
/// Implementations are immutable after construction; every member is safe to
/// call concurrently.
class System {
 public:
  virtual ~System() = default;

  virtual std::string name() const = 0;
  virtual ParamMap parameters() const = 0;
  int dimension() const { return 2; }

  /// f(x), wrapped into [0,1)^2.
  virtual Point apply(const Point& x) const = 0;
  /// Df(x) in chart coordinates.
  virtual Mat2 derivative(const Point& x) const = 0;

  /// Df(x)^{-1}, i.e. the derivative at f(x) of the inverse branch through x.
  /// Defined for every system, invertible or not.
  Mat2 local_inverse_derivative(const Point& x) const { return derivative(x).inverse(); }

  /// f^{-1}(y) for systems that are bijections of the chart.
  virtual std::optional<Point> inverse(const Point& /*y*/) const { return std::nullopt; }

  /// D(f^{-1})(y). Throws ParameterError for systems without a global inverse.
  Mat2 inverse_derivative(const Point& y) const;

  /// A preimage of x used to build backward histories. Invertible systems
  /// return f^{-1}(x); endomorphisms pick a fixed branch.
  virtual Point backward_step(const Point& x) const;

  /// Exact stable direction at x when the stable foliation is known in closed
  /// form and consists of straight chart segments.
  virtual std::optional<Vec2> exact_stable_direction(const Point& /*x*/) const {
    return std::nullopt;
  }

  /// Whether apply is a bijection of the chart.
  virtual bool invertible() const { return inverse(Point(0.25, 0.5)).has_value(); }

  /// True when stable leaves live in a fibre interval (not a circle), so local
  /// leaves are clipped at the chart edge.
  virtual bool stable_fibres_are_intervals() const { return false; }
};

using SystemPtr = std::shared_ptr<const System>;

/// Linear automorphism with rows (2,1),(1,1).
class CatMap final : public System {
 public:
  std::string name() const override { return "cat"; }
  ParamMap parameters() const override { return {}; }
  Point apply(const Point& x) const override;
  Mat2 derivative(const Point& x) const override;
  std::optional<Point> inverse(const Point& y) const override;
  std::optional<Vec2> exact_stable_direction(const Point& x) const override;

  static double unstable_eigenvalue();  // (3+sqrt5)/2
  static double stable_eigenvalue();    // (3-sqrt5)/2
  static Vec2 unstable_direction();
  static Vec2 stable_direction();
};

/// Skew product over an intermittent circle map:
///   g(x) = x(1 + 2^a x^a) on [0,1/2), 2x-1 on [1/2,1)
///   y -> l*y + (1-l)*c(x),  c(x) = (1 + cos 2 pi x)/4
/// The stable direction is exactly vertical; x = 0 is a neutral fixed point of g.
class MpSkew final : public System {
 public:
  MpSkew(double alpha, double lambda_s);

  std::string name() const override { return "mp_skew"; }
  ParamMap parameters() const override { return {{"alpha", alpha_}, {"lambda_s", lambda_s_}}; }
  Point apply(const Point& x) const override;
  Mat2 derivative(const Point& x) const override;
  Point backward_step(const Point& x) const override;
  std::optional<Vec2> exact_stable_direction(const Point& x) const override;
  bool invertible() const override { return false; }
  bool stable_fibres_are_intervals() const override { return true; }

  double alpha() const { return alpha_; }
  double lambda_s() const { return lambda_s_; }
  double base_map(double x) const;
  double base_derivative(double x) const;
  static double coupling(double x);
  static double coupling_derivative(double x);
  /// The left-branch point of the period-2 orbit {x1, g(x1)} with g(x1) >= 1/2.
  Point period_two_point() const;

 private:
  double alpha_;
  double lambda_s_;
  double two_pow_alpha_;
};

/// The cat map composed with the shear (x,y) -> (x + eps sin(2 pi x)/(2 pi), y).
class PerturbedCat final : public System {
 public:
  explicit PerturbedCat(double epsilon);

  std::string name() const override { return "perturbed_cat"; }
  ParamMap parameters() const override { return {{"epsilon", epsilon_}}; }
  Point apply(const Point& x) const override;
  Mat2 derivative(const Point& x) const override;
  std::optional<Point> inverse(const Point& y) const override;
  std::optional<Vec2> exact_stable_direction(const Point& x) const override;

  double epsilon() const { return epsilon_; }

 private:
  double epsilon_;
};

/// Build a built-in system by name. Missing parameters take their defaults
/// (mp_skew: alpha=0.5, lambda_s=0.25; perturbed_cat: epsilon=0.1).
/// Throws ParameterError for unknown names, unknown keys or out-of-range values.
SystemPtr make_system(const std::string& name, const ParamMap& params = {});

/// Names accepted by make_system.
std::vector<std::string> builtin_system_names();

/// [x, f(x), ..., f^n(x)].
std::vector<Point> orbit(const System& system, const Point& x, std::size_t n);

/// Largest of the spectral norms of Df and Df^{-1} over a uniform g x g grid.
double max_derivative_norm(const System& system, std::size_t g = 100);

}  // namespace gmy
