#include "gmy/cones.hpp"

#include <algorithm>
#include <numbers>

namespace gmy {

namespace {

double direction_change(const Vec2& a, const Vec2& b) {
  // both unit; sign-insensitive
  double c = std::clamp(std::abs(a.dot(b)), 0.0, 1.0);
  double s = std::abs(a(0) * b(1) - a(1) * b(0));
  return std::atan2(s, c);
}

const Vec2 kGenericCu = Vec2(1.0, 0.3).normalized();
const Vec2 kGenericS = Vec2(0.3, 1.0).normalized();

void require_angle(const SplittingFrame& f, double min_angle) {
  if (f.angle() < min_angle) throw NumericalError("degenerate splitting frame: angle below minimum");
}

}  // namespace

double SplittingFrame::angle() const { return direction_change(e_s, e_cu); }

Vec2 SplittingFrame::decompose(const Vec2& v) const {
  Mat2 basis;
  basis.col(0) = e_s;
  basis.col(1) = e_cu;
  return basis.partialPivLu().solve(v);
}

bool in_cone(const TangentVector& v, const SplittingFrame& frame, ConeParams cone, ConeKind which,
             double min_angle) {
  if (v.components.squaredNorm() == 0.0) throw ParameterError("cone membership of the zero vector");
  if (!(cone.a > 0.0)) throw ParameterError("cone width must be positive");
  require_angle(frame, min_angle);
  Vec2 c = frame.decompose(v.components);
  double vs = std::abs(c(0));
  double vcu = std::abs(c(1));
  return which == ConeKind::cu ? vs <= cone.a * vcu : vcu <= cone.a * vs;
}

SplittingFrame estimate_splitting(const System& system, const Point& x, const FrameOptions& opts) {
  if (opts.n_iters < 1) throw ParameterError("estimate_splitting: n_iters must be >= 1");
  SplittingFrame frame;
  frame.base = x;

  std::vector<Point> history(opts.n_iters + 1);
  history[0] = x;
  for (std::size_t k = 1; k <= opts.n_iters; ++k) history[k] = system.backward_step(history[k - 1]);

  // two horizons (n and n-1) pushed to x; their disagreement is the residual
  Vec2 v = kGenericCu;
  Vec2 v_short = kGenericCu;
  for (std::size_t k = opts.n_iters; k >= 1; --k) {
    Mat2 d = system.derivative(history[k]);
    v = (d * v).normalized();
    if (k < opts.n_iters) v_short = (d * v_short).normalized();
  }
  double cu_change = direction_change(v, v_short);
  frame.e_cu = v;

  double s_change = 0.0;
  if (auto exact = system.exact_stable_direction(x)) {
    frame.e_s = exact->normalized();
  } else {
    auto fwd = orbit(system, x, opts.n_iters);
    Vec2 w = kGenericS;
    Vec2 w_short = kGenericS;
    for (std::size_t k = opts.n_iters; k-- > 0;) {
      Mat2 inv = system.local_inverse_derivative(fwd[k]);
      w = (inv * w).normalized();
      if (k + 1 < opts.n_iters) w_short = (inv * w_short).normalized();
    }
    s_change = direction_change(w, w_short);
    frame.e_s = w;
  }

  frame.residual = std::max(cu_change, s_change);
  frame.converged = frame.residual <= opts.tol && frame.angle() >= opts.min_angle;
  return frame;
}

SplittingFrame image_frame(const System& system, const SplittingFrame& frame) {
  Mat2 d = system.derivative(frame.base);
  SplittingFrame out = frame;
  out.base = system.apply(frame.base);
  out.e_cu = (d * frame.e_cu).normalized();
  if (auto exact = system.exact_stable_direction(out.base))
    out.e_s = exact->normalized();
  else
    out.e_s = (d * frame.e_s).normalized();
  return out;
}

double graph_transform_step(const System& system, const SplittingFrame& at_x,
                            const SplittingFrame& at_fx, double slope, double min_angle) {
  require_angle(at_x, min_angle);
  require_angle(at_fx, min_angle);
  Mat2 d = system.derivative(at_x.base);
  // graph vector e_cu + slope * e_s, written in the frame at f(x)
  Vec2 image = d * (at_x.e_cu + slope * at_x.e_s);
  Vec2 c = at_fx.decompose(image);
  if (c(1) == 0.0) throw NumericalError("graph transform: image leaves the cu cone");
  return c(0) / c(1);
}

double graph_transform_step(const System& system, const SplittingFrame& at_x, double slope,
                            double min_angle) {
  return graph_transform_step(system, at_x, image_frame(system, at_x), slope, min_angle);
}

DominationCertificate check_domination(const System& system, std::span<const SplittingFrame> frames,
                                       double tol) {
  DominationCertificate cert;
  cert.tol = tol;
  cert.sample_count = frames.size();
  for (const auto& f : frames) {
    if (!f.converged) cert.valid = false;
    Mat2 d = system.derivative(f.base);
    double s = (d * f.e_s).norm();
    double cu = (d * f.e_cu).norm();
    cert.lambda_s_hat = std::max(cert.lambda_s_hat, s);
    cert.lambda_hat = std::max(cert.lambda_hat, s / cu);
  }
  return cert;
}

std::vector<Point> kronecker_points(std::size_t n, std::size_t offset) {
  // plastic-number lattice
  constexpr double g = 1.32471795724474602596;
  const double a1 = 1.0 / g;
  const double a2 = 1.0 / (g * g);
  std::vector<Point> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double k = static_cast<double>(i + offset + 1);
    pts.emplace_back(wrap_unit(0.5 + a1 * k), wrap_unit(0.5 + a2 * k));
  }
  return pts;
}

std::vector<SplittingFrame> sample_frames(const System& system, std::size_t n, const FrameOptions& opts) {
  std::vector<SplittingFrame> out;
  out.reserve(n);
  for (const auto& p : kronecker_points(n)) out.push_back(estimate_splitting(system, p, opts));
  return out;
}

CuWalker::CuWalker(const System& system, const Point& start, const FrameOptions& opts)
    : system_(&system), x_(start) {
  SplittingFrame f = estimate_splitting(system, start, opts);
  e_cu_ = f.e_cu;
  converged_ = f.converged;
}

double CuWalker::step() {
  Vec2 image = system_->derivative(x_) * e_cu_;
  double n = image.norm();
  e_cu_ = image / n;
  x_ = system_->apply(x_);
  return std::log(n);
}

}  // namespace gmy
