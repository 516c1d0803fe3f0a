#include "gmy/hyperbolic_times.hpp"

#include <algorithm>
#include <numeric>

namespace gmy {

namespace {

void check_sigma(double sigma) {
  if (!(sigma > 0.0 && sigma < 1.0)) throw ParameterError("sigma must lie in (0,1)");
}

}  // namespace

ContractionLog contraction_log(const System& system, const Point& x, std::size_t n,
                               const FrameOptions& opts) {
  CuWalker walker(system, x, opts);
  if (!walker.converged()) throw NumericalError("contraction_log: frame divergence at orbit index 0");
  ContractionLog log;
  log.base_point = x;
  log.values.reserve(n);
  for (std::size_t j = 1; j <= n; ++j) {
    double v = -walker.step();
    if (!std::isfinite(v))
      throw NumericalError("contraction_log: frame divergence at orbit index " + std::to_string(j));
    log.values.push_back(v);
  }
  return log;
}

HyperbolicTimeReport hyperbolic_times(std::span<const double> values, double sigma, double slack) {
  check_sigma(sigma);
  HyperbolicTimeReport rep;
  rep.sigma = sigma;
  rep.slack = slack;
  rep.horizon = values.size();
  const double ls = std::log(sigma);
  double t = 0.0;        // T_n
  double prefix_min = 0.0;  // min_{i<n} T_i, starting with T_0 = 0
  for (std::size_t n = 1; n <= values.size(); ++n) {
    t += values[n - 1] - ls;
    if (t <= prefix_min + slack) rep.times.push_back(n);
    prefix_min = std::min(prefix_min, t);
  }
  rep.frequency = values.empty() ? 0.0 : double(rep.times.size()) / double(values.size());
  rep.theta_bound = pliss_theta(values, sigma);
  return rep;
}

HyperbolicTimeReport hyperbolic_times(const ContractionLog& log, double sigma, double slack) {
  return hyperbolic_times(std::span<const double>(log.values), sigma, slack);
}

bool is_hyperbolic_time(std::span<const double> values, std::size_t n, double sigma, double slack) {
  check_sigma(sigma);
  if (n < 1 || n > values.size()) return false;
  const double ls = std::log(sigma);
  double sum = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    sum += values[n - k];
    if (sum > k * ls + slack) return false;
  }
  return true;
}

double pliss_theta(std::span<const double> values, double sigma) {
  check_sigma(sigma);
  if (values.empty()) return 0.0;
  const double c1 = std::log(sigma);
  const double c2 = std::accumulate(values.begin(), values.end(), 0.0) / double(values.size());
  const double low = *std::min_element(values.begin(), values.end());
  if (!(c2 < c1)) return 0.0;
  return (c2 - c1) / (low - c1);
}

std::string to_string(NueMode mode) {
  switch (mode) {
    case NueMode::NUE1: return "NUE1";
    case NueMode::NUE2_only: return "NUE2_only";
    case NueMode::positive_exponent_only: return "positive_exponent_only";
    case NueMode::none: return "none";
  }
  return "none";
}

NueClassification classify_nue(std::span<const double> values, double epsilon) {
  if (!(epsilon >= 0.0)) throw ParameterError("classify_nue: epsilon must be >= 0");
  if (values.size() < 100) throw ParameterError("classify_nue: horizon must be >= 100");
  NueClassification c;
  c.epsilon = epsilon;
  c.horizon = values.size();
  c.running_averages.resize(values.size());
  double sum = 0.0;
  for (std::size_t n = 1; n <= values.size(); ++n) {
    sum += values[n - 1];
    c.running_averages[n - 1] = sum / double(n);
  }
  auto tail_begin = c.running_averages.begin() + (values.size() / 2 - 1);
  c.tail_max = *std::max_element(tail_begin, c.running_averages.end());
  c.tail_min = *std::min_element(tail_begin, c.running_averages.end());
  if (c.tail_max < -epsilon)
    c.mode = NueMode::NUE1;
  else if (c.tail_min < -epsilon)
    c.mode = NueMode::NUE2_only;
  else if (c.running_averages.back() < 0.0)
    c.mode = NueMode::positive_exponent_only;
  else
    c.mode = NueMode::none;
  return c;
}

NueClassification classify_nue(const ContractionLog& log, double epsilon) {
  return classify_nue(std::span<const double>(log.values), epsilon);
}

double lyapunov_cu(const System& system, const Point& x, std::size_t n, const FrameOptions& opts) {
  if (n < 1) throw ParameterError("lyapunov_cu: n must be >= 1");
  CuWalker walker(system, x, opts);
  if (!walker.converged()) throw NumericalError("lyapunov_cu: frame divergence at orbit index 0");
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) sum += walker.step();
  if (!std::isfinite(sum)) throw NumericalError("lyapunov_cu: non-finite accumulated stretch");
  return sum / double(n);
}

OrbitTimeSummary summarize_orbit(const System& system, const Point& start, std::size_t horizon,
                                 double sigma, double epsilon, const FrameOptions& opts) {
  OrbitTimeSummary s;
  s.start = start;
  s.horizon = horizon;
  auto log = contraction_log(system, start, horizon, opts);
  auto rep = hyperbolic_times(log, sigma);
  s.frequency = rep.frequency;
  s.theta_bound = rep.theta_bound;
  s.mode = classify_nue(log, epsilon).mode;
  double sum = std::accumulate(log.values.begin(), log.values.end(), 0.0);
  s.lyapunov = -sum / double(horizon);
  return s;
}

}  // namespace gmy
