#pragma once

#include "gmy/cones.hpp"

#include <span>
#include <string>
#include <vector>

namespace gmy {

/// values[j-1] = log |Df^{-1}|E^cu at f^j(x)|, j = 1..n.
struct ContractionLog {
  Point base_point;
  std::vector<double> values;

  std::size_t horizon() const { return values.size(); }
};

/// Throws NumericalError naming the first failing orbit index when the frame
/// at x does not converge or a value is not finite.
ContractionLog contraction_log(const System& system, const Point& x, std::size_t n,
                               const FrameOptions& opts = {});

struct HyperbolicTimeReport {
  double sigma = 0.5;
  std::vector<std::size_t> times;  // sorted, 1-based
  double frequency = 0.0;
  double theta_bound = 0.0;
  std::size_t horizon = 0;
  double slack = 0.0;
};

/// Default slack absorbing floating-point drift of accumulated sums.
inline constexpr double kHyperbolicSlack = 1e-12;

/// sigma-hyperbolic times by a single prefix-minimum scan:
/// n qualifies iff T_n <= min_{0 <= i < n} T_i with T_i = S_i - i log sigma.
HyperbolicTimeReport hyperbolic_times(std::span<const double> values, double sigma,
                                      double slack = kHyperbolicSlack);
HyperbolicTimeReport hyperbolic_times(const ContractionLog& log, double sigma,
                                      double slack = kHyperbolicSlack);

/// Direct check of the defining inequality at time n (1-based), O(n).
bool is_hyperbolic_time(std::span<const double> values, std::size_t n, double sigma,
                        double slack = kHyperbolicSlack);

/// Pliss lower bound on the frequency of sigma-hyperbolic times:
/// (c2 - c1) / (L - c1) with c1 = log sigma, c2 the mean and L the minimum of
/// the values; 0 when the mean is not below log sigma.
double pliss_theta(std::span<const double> values, double sigma);

enum class NueMode { NUE1, NUE2_only, positive_exponent_only, none };

std::string to_string(NueMode mode);

struct NueClassification {
  NueMode mode = NueMode::none;
  double epsilon = 0.0;
  std::size_t horizon = 0;
  std::vector<double> running_averages;  // running_averages[n-1] = (1/n) sum_{j<=n}
  double tail_max = 0.0;                 // over the last half of the horizon
  double tail_min = 0.0;
};

/// Finite-horizon surrogate of the expansion conditions. Requires horizon >= 100.
NueClassification classify_nue(std::span<const double> values, double epsilon);
NueClassification classify_nue(const ContractionLog& log, double epsilon);

/// (1/n) log |Df^n(x) e_cu(x)|.
double lyapunov_cu(const System& system, const Point& x, std::size_t n, const FrameOptions& opts = {});

/// One row of the per-orbit hyperbolic-time table.
struct OrbitTimeSummary {
  Point start;
  std::size_t horizon = 0;
  double frequency = 0.0;
  double theta_bound = 0.0;
  NueMode mode = NueMode::none;
  double lyapunov = 0.0;
};

OrbitTimeSummary summarize_orbit(const System& system, const Point& start, std::size_t horizon,
                                 double sigma, double epsilon, const FrameOptions& opts = {});

}  // namespace gmy
