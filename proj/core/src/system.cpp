#include "gmy/system.hpp"

#include <algorithm>
#include <numbers>
#include <sstream>

namespace gmy {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Mat2 cat_matrix() {
  Mat2 a;
  a << 2.0, 1.0, 1.0, 1.0;
  return a;
}

Point apply_cat(double x, double y) { return Point(2.0 * x + y, x + y).wrapped(); }

double spectral_norm(const Mat2& m) {
  Eigen::JacobiSVD<Mat2> svd(m);
  return svd.singularValues()(0);
}

}  // namespace

Mat2 System::inverse_derivative(const Point& y) const {
  auto pre = inverse(y);
  if (!pre) throw ParameterError(name() + " has no global inverse; use local_inverse_derivative");
  return derivative(*pre).inverse();
}

Point System::backward_step(const Point& x) const {
  auto pre = inverse(x);
  if (!pre) throw ParameterError(name() + " provides no backward branch");
  return *pre;
}

// --- cat -------------------------------------------------------------------

Point CatMap::apply(const Point& x) const { return apply_cat(x.x, x.y); }

Mat2 CatMap::derivative(const Point&) const { return cat_matrix(); }

std::optional<Point> CatMap::inverse(const Point& y) const {
  return Point(y.x - y.y, -y.x + 2.0 * y.y).wrapped();
}

std::optional<Vec2> CatMap::exact_stable_direction(const Point&) const {
  return stable_direction();
}

double CatMap::unstable_eigenvalue() { return (3.0 + std::sqrt(5.0)) / 2.0; }
double CatMap::stable_eigenvalue() { return (3.0 - std::sqrt(5.0)) / 2.0; }

Vec2 CatMap::unstable_direction() { return Vec2(1.0, (std::sqrt(5.0) - 1.0) / 2.0).normalized(); }

Vec2 CatMap::stable_direction() { return Vec2(1.0, -(1.0 + std::sqrt(5.0)) / 2.0).normalized(); }

// --- mp_skew -----------------------------------------------------------------

MpSkew::MpSkew(double alpha, double lambda_s)
    : alpha_(alpha), lambda_s_(lambda_s), two_pow_alpha_(std::pow(2.0, alpha)) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("mp_skew: alpha must lie in (0,1)");
  if (!(lambda_s > 0.0 && lambda_s <= 0.5))
    throw ParameterError("mp_skew: lambda_s must lie in (0,1/2]");
}

double MpSkew::base_map(double x) const {
  if (x < 0.5) return wrap_unit(x * (1.0 + two_pow_alpha_ * std::pow(x, alpha_)));
  return wrap_unit(2.0 * x - 1.0);
}

double MpSkew::base_derivative(double x) const {
  if (x < 0.5) return 1.0 + (1.0 + alpha_) * two_pow_alpha_ * std::pow(x, alpha_);
  return 2.0;
}

double MpSkew::coupling(double x) { return (1.0 + std::cos(kTwoPi * x)) / 4.0; }

double MpSkew::coupling_derivative(double x) {
  return -std::numbers::pi / 2.0 * std::sin(kTwoPi * x);
}

Point MpSkew::apply(const Point& p) const {
  double y = lambda_s_ * p.y + (1.0 - lambda_s_) * coupling(p.x);
  return Point(base_map(p.x), wrap_unit(y));
}

Mat2 MpSkew::derivative(const Point& p) const {
  Mat2 d;
  d << base_derivative(p.x), 0.0, (1.0 - lambda_s_) * coupling_derivative(p.x), lambda_s_;
  return d;
}

Point MpSkew::backward_step(const Point& p) const {
  // right branch of g; the fibre coordinate is carried along but never
  // influences the centre-unstable direction
  double x = (p.x + 1.0) / 2.0;
  double y = (p.y - (1.0 - lambda_s_) * coupling(x)) / lambda_s_;
  return Point(x, wrap_unit(y));
}

Point MpSkew::period_two_point() const {
  // x1 on the left branch, g(x1) = 2 x1 ... closed by x1 = 2 g(x1) - 1; the
  // composed inverse branches contract, so iterate them
  double x = 0.4;
  for (int it = 0; it < 200; ++it) {
    double u = (x + 1.0) / 2.0;  // right-branch preimage
    double lo = 0.0, hi = 0.5;   // left-branch preimage of u
    for (int b = 0; b < 80; ++b) {
      double m = 0.5 * (lo + hi);
      (m * (1.0 + two_pow_alpha_ * std::pow(m, alpha_)) < u ? lo : hi) = m;
    }
    x = 0.5 * (lo + hi);
  }
  double c1 = coupling(x), c2 = coupling(base_map(x)), l = lambda_s_;
  return Point(x, (l * (1.0 - l) * c1 + (1.0 - l) * c2) / (1.0 - l * l));
}

std::optional<Vec2> MpSkew::exact_stable_direction(const Point&) const { return Vec2(0.0, 1.0); }

// --- perturbed_cat -------------------------------------------------------------

PerturbedCat::PerturbedCat(double epsilon) : epsilon_(epsilon) {
  if (!(std::abs(epsilon) < 1.0)) throw ParameterError("perturbed_cat: |epsilon| must be < 1");
}

Point PerturbedCat::apply(const Point& p) const {
  double sx = p.x + epsilon_ * std::sin(kTwoPi * p.x) / kTwoPi;
  return apply_cat(sx, p.y);
}

Mat2 PerturbedCat::derivative(const Point& p) const {
  double s = 1.0 + epsilon_ * std::cos(kTwoPi * p.x);
  Mat2 d;
  d << 2.0 * s, 1.0, s, 1.0;
  return d;
}

std::optional<Point> PerturbedCat::inverse(const Point& q) const {
  Point u(q.x - q.y, -q.x + 2.0 * q.y);
  u = u.wrapped();
  // solve x + eps sin(2 pi x)/(2 pi) = u.x; the shear is a monotone circle map
  double x = u.x;
  for (int it = 0; it < 60; ++it) {
    double r = x + epsilon_ * std::sin(kTwoPi * x) / kTwoPi - u.x;
    double dr = 1.0 + epsilon_ * std::cos(kTwoPi * x);
    double step = r / dr;
    x -= step;
    if (std::abs(step) < 1e-16) break;
  }
  return Point(wrap_unit(x), u.y);
}

std::optional<Vec2> PerturbedCat::exact_stable_direction(const Point&) const {
  if (epsilon_ == 0.0) return CatMap::stable_direction();
  return std::nullopt;
}

// --- helpers -------------------------------------------------------------------

SystemPtr make_system(const std::string& name, const ParamMap& params) {
  auto take = [&](std::initializer_list<std::pair<const char*, double>> allowed) {
    ParamMap out;
    for (auto& [k, v] : allowed) out[k] = v;
    for (auto& [k, v] : params) {
      if (!out.count(k)) {
        std::ostringstream msg;
        msg << "system '" << name << "' has no parameter '" << k << "'";
        throw ParameterError(msg.str());
      }
      out[k] = v;
    }
    return out;
  };
  if (name == "cat") {
    take({});
    return std::make_shared<CatMap>();
  }
  if (name == "mp_skew") {
    auto p = take({{"alpha", 0.5}, {"lambda_s", 0.25}});
    return std::make_shared<MpSkew>(p["alpha"], p["lambda_s"]);
  }
  if (name == "perturbed_cat") {
    auto p = take({{"epsilon", 0.1}});
    return std::make_shared<PerturbedCat>(p["epsilon"]);
  }
  throw ParameterError("unknown system '" + name + "'");
}

std::vector<std::string> builtin_system_names() { return {"cat", "mp_skew", "perturbed_cat"}; }

std::vector<Point> orbit(const System& system, const Point& x, std::size_t n) {
  std::vector<Point> out;
  out.reserve(n + 1);
  out.push_back(x);
  for (std::size_t i = 0; i < n; ++i) out.push_back(system.apply(out.back()));
  return out;
}

double max_derivative_norm(const System& system, std::size_t g) {
  double k0 = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    for (std::size_t j = 0; j < g; ++j) {
      Point p((i + 0.5) / g, (j + 0.5) / g);
      Mat2 d = system.derivative(p);
      k0 = std::max({k0, spectral_norm(d), spectral_norm(d.inverse())});
    }
  }
  return k0;
}

}  // namespace gmy
