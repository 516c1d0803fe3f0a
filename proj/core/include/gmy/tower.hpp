#pragma once

#include "gmy/partition.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace gmy {

class ResidualPointError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// F = f^R on the union of elements, read back on the leaf along stable leaves.
class InducedMap {
 public:
  InducedMap(const System& system, const PartitionState& state);

  const System& system() const { return *system_; }
  const PartitionState& state() const { return *state_; }
  /// Index of the element containing leaf parameter t.
  std::optional<std::size_t> element_at(double t) const;
  /// Image leaf parameter of t under f^R followed by stable projection.
  double image(double t, std::size_t R) const;

 private:
  const System* system_;
  const PartitionState* state_;
  std::vector<std::size_t> order_;  // elements sorted by t_lo
};

struct InducedStep {
  double t = 0.0;
  std::size_t R = 0;
  std::size_t element = 0;
};

/// Throws ResidualPointError off the elements, NumericalError when the image
/// escapes the cylinder.
InducedStep induced_step(const InducedMap& im, double t);

/// Element-by-cell piece of the density grid with the induced images of its ends.
struct DensityPiece {
  std::size_t element = 0;
  std::size_t cell = 0;
  double a = 0.0, b = 0.0;
  double Fa = 0.0, Fb = 0.0;
};

struct InvariantDensity {
  std::size_t cells = 0;
  std::vector<DensityPiece> pieces;
  std::vector<double> mass;             // per piece, sums to 1
  std::vector<double> element_weights;  // per element, sums to 1
  std::vector<double> gaps;             // TV distance between successive Cesaro averages
  std::size_t iterations = 0;
  double tol = 0.0;
  bool converged = false;
  double last_gap = 1.0;
  double stationarity_gap = 1.0;  // TV(P nu, nu) after renormalization
  double leak = 0.0;              // mass sent into the residual by one push of nu
  std::size_t non_monotone_pieces = 0;

  /// Density per cell of Delta_0 (mass / cell length), zero off the elements.
  std::vector<double> cell_density(const ReferenceStructure& ref) const;
};

/// Push-forward iteration on a `cells` grid over Delta_0, starting from
/// normalized arc length on the elements; mass pushed into the residual is
/// dropped and the rest renormalized. Averages run over the iterates k/2..k
/// (the early transient is discarded); stops when successive averages differ
/// by less than tol in total variation.
InvariantDensity invariant_density(const InducedMap& im, std::size_t iterations = 500, double tol = 1e-6,
                                   std::size_t cells = 4096);

/// One push of a piece-mass vector (not renormalized); returns the new masses.
std::vector<double> push_forward(const InvariantDensity& grid, std::span<const double> mass,
                                 const ReferenceStructure& ref);

/// Total variation distance (half L1).
double total_variation(std::span<const double> a, std::span<const double> b);

struct WeightedPoint {
  Point x;
  double w = 0.0;
};

struct TowerMeasure {
  std::vector<double> nu;       // per element
  std::vector<std::size_t> R;   // per element
  std::vector<WeightedPoint> mu_hat;  // weights sum to mass
  std::vector<WeightedPoint> mu;      // weights sum to 1
  double mass = 0.0;            // total weight of mu_hat
  double tail_mass = 0.0;       // sum_j nu(R > j)
};

/// mu_hat = sum_j f^j_*(nu | R > j), sampled at piece midpoints.
TowerMeasure lift_measure(const System& system, const InvariantDensity& nu, const PartitionState& state);

/// Same construction from explicit sample points, their nu masses and return times.
TowerMeasure lift_measure(const System& system, std::span<const Point> points, std::span<const double> nu,
                          std::span<const std::size_t> R);

struct ReturnTimeStats {
  double mean = 0.0;        // integral of R d nu
  double leb_mean = 0.0;    // integral of R d Leb over the elements, normalized
  std::vector<double> tail; // tail[j] = nu(R > j), j = 0..max R
  bool tail_non_increasing = true;
};

ReturnTimeStats return_time_stats(std::span<const double> nu, std::span<const std::size_t> R,
                                  std::span<const double> leb = {});
ReturnTimeStats return_time_stats(const InvariantDensity& nu, const PartitionState& state);

struct Observable {
  std::string name;
  std::function<double(const Point&)> f;
};

/// cos 2 pi x, cos 2 pi y and sin 2 pi x * sin 2 pi y (the periodic stand-in for x y).
std::vector<Observable> default_observables();

double integrate(std::span<const WeightedPoint> cloud, const Observable& phi);
/// |integral of phi o f - integral of phi| against the cloud.
double invariance_defect(const System& system, std::span<const WeightedPoint> cloud, const Observable& phi);

struct HsrCheckpoint {
  std::size_t n = 0;
  std::size_t H = 0, S = 0, R = 0;
};

struct HsrCounts {
  std::size_t n = 0;
  std::size_t H = 0, S = 0, R_cnt = 0;
  double ratio = 0.0;          // R_cnt / n
  bool partial = false;        // the orbit spent time outside the tracked region
  std::size_t untracked_steps = 0;
  std::vector<HsrCheckpoint> checkpoints;
};

/// Counts hyperbolic times, satellite visits and completed returns along the orbit of x.
HsrCounts hsr_counts(const System& system, const PartitionState& state, const Point& x, std::size_t n,
                     std::size_t checkpoints = 10);

struct HsrFit {
  double kappa_prime = 0.0;  // min over orbits of R_cnt / n at the final checkpoint
  double kappa = 0.0;        // half the pooled through-origin slope of R + S against H
  std::size_t checkpoints = 0;
  std::size_t violations = 0;  // checkpoints with R + S < kappa H
  bool pass() const { return kappa_prime > 0.0 && kappa > 0.0 && violations == 0; }
};

HsrFit fit_hsr(std::span<const HsrCounts> orbits);

struct BirkhoffRow {
  std::string name;
  double integral = 0.0;        // against mu
  double ensemble_mean = 0.0;   // mean of the per-start averages
  double max_discrepancy = 0.0; // max over starts of |average - integral|
};

struct BirkhoffReport {
  std::vector<BirkhoffRow> rows;
  std::size_t starts = 0, n = 0;
  double max_discrepancy = 0.0;
};

BirkhoffReport birkhoff_compare(const System& system, std::span<const WeightedPoint> mu,
                                const std::vector<Observable>& observables, std::size_t starts, std::size_t n,
                                std::uint64_t seed);

struct HolonomyResult {
  double J = 1.0;
  double last_increment = 0.0;    // |J_n / J_{n-1} - 1|
  std::vector<double> increments; // |J_k / J_{k-1} - 1|, k = 1..n
  double phi_param = 0.0;         // parameter of phi(x) on gamma_p
};

/// Truncated product of tangential stretch ratios between x on gamma and its
/// stable-holonomy image on gamma_p. Throws NumericalError("no intersection").
HolonomyResult holonomy_jacobian(const System& system, const CuDisk& gamma, const CuDisk& gamma_p,
                                 const Cylinder& cyl, double x_param, std::size_t n_trunc);

/// Fitted geometric rate of a positive sequence (exp of the log-linear slope).
double fitted_rate(std::span<const double> seq);

std::string tails_csv(const ReturnTimeStats& stats);
std::string density_csv(std::span<const WeightedPoint> mu, std::size_t g = 128);
std::string birkhoff_csv(const BirkhoffReport& rep);

}  // namespace gmy
