#pragma once

#include "gmy/system.hpp"

#include <span>
#include <vector>

namespace gmy {

/// Approximate E^s (+) E^cu at a point. Directions are unit vectors.
struct SplittingFrame {
  Point base;
  Vec2 e_s = Vec2(0.0, 1.0);
  Vec2 e_cu = Vec2(1.0, 0.0);
  double residual = 0.0;
  bool converged = true;

  /// Unsigned angle between the two directions, in [0, pi/2].
  double angle() const;
  /// Coefficients (along e_s, along e_cu) of v in this frame.
  Vec2 decompose(const Vec2& v) const;
};

struct ConeParams {
  double a = 1.0;
};

enum class ConeKind { cu, s };

struct FrameOptions {
  std::size_t n_iters = 80;
  double tol = 1e-10;
  double min_angle = 1e-3;  // radians
};

/// Closed cone membership: |v_s| <= a |v_cu| for ConeKind::cu, symmetric for s.
/// Throws ParameterError for the zero vector, NumericalError for a degenerate frame.
bool in_cone(const TangentVector& v, const SplittingFrame& frame, ConeParams cone, ConeKind which,
             double min_angle = 1e-3);

/// Finite-horizon splitting at x. e_cu is the normalized image of a generic
/// vector pushed along the n_iters-step backward history ending at x; e_s is
/// the exact fibre when the system has one, else the pullback of a generic
/// vector along the forward orbit of x. `residual` is the angle between the
/// n_iters and n_iters-1 horizon estimates; `converged` is residual <= tol and angle >= min_angle.
SplittingFrame estimate_splitting(const System& system, const Point& x, const FrameOptions& opts = {});

/// Frame at f(x) obtained by pushing both directions of `frame` through Df(x).
SplittingFrame image_frame(const System& system, const SplittingFrame& frame);

/// Graph transform of a slope mu : E^cu -> E^cs from the frame at x to the
/// frame at f(x). With invariant frames this is mu * |Df e_s| / |Df e_cu|.
/// Throws NumericalError when either frame is below the minimum angle.
double graph_transform_step(const System& system, const SplittingFrame& at_x,
                            const SplittingFrame& at_fx, double slope, double min_angle = 1e-3);
double graph_transform_step(const System& system, const SplittingFrame& at_x, double slope,
                            double min_angle = 1e-3);

struct DominationCertificate {
  double lambda_hat = 0.0;    // max |Df|E^s_x| * |Df^{-1}|E^cu_f(x)|
  double lambda_s_hat = 0.0;  // max |Df|E^s_x|
  std::size_t sample_count = 0;
  double tol = 0.0;
  bool valid = true;          // false when any frame failed to converge

  bool passes() const { return valid && lambda_hat < 1.0 && lambda_s_hat < 1.0; }
};

DominationCertificate check_domination(const System& system, std::span<const SplittingFrame> frames,
                                       double tol = 1e-10);

/// Deterministic quasi-random (Kronecker) sample of n chart points.
std::vector<Point> kronecker_points(std::size_t n, std::size_t offset = 0);

/// Frames at n deterministic sample points.
std::vector<SplittingFrame> sample_frames(const System& system, std::size_t n,
                                          const FrameOptions& opts = {});

/// Carries e_cu along a forward orbit: e_cu(f(x)) = Df(x) e_cu(x) / |.|.
class CuWalker {
 public:
  CuWalker(const System& system, const Point& start, const FrameOptions& opts = {});

  /// Advance one step; returns log |Df(x) e_cu(x)| at the point left behind.
  double step();

  const Point& point() const { return x_; }
  const Vec2& e_cu() const { return e_cu_; }
  bool converged() const { return converged_; }

 private:
  const System* system_;
  Point x_;
  Vec2 e_cu_;
  bool converged_;
};

}  // namespace gmy
