#pragma once

#include "gmy/leaf.hpp"

#include "json.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gmy {

/// Finite union of disjoint closed intervals, kept sorted.
class IntervalSet {
 public:
  IntervalSet() = default;
  explicit IntervalSet(std::vector<std::pair<double, double>> parts);

  void add(double a, double b);
  void subtract(double a, double b);
  bool contains(double t) const;
  bool contains(double a, double b) const;  // whole interval inside one part
  bool intersects(double a, double b) const;
  double measure() const;
  double overlap(double a, double b) const;
  const std::vector<std::pair<double, double>>& parts() const { return parts_; }

 private:
  std::vector<std::pair<double, double>> parts_;
};

class ReferenceSearchFailed : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

struct ReferenceParams {
  double sigma = 0.4;
  double delta1 = 0.05;
  double delta_s = 0.0;       // 0: delta1 / 4
  double delta0 = 0.0;        // 0: half the bound; larger than the bound is rejected
  std::size_t N0 = 1;         // recurrence cap for the reference point
  Point leaf_center{0.0, 0.0};
  std::optional<Vec2> leaf_dir;  // default: e_cu at the centre
  std::size_t scan = 33;         // candidate reference points on the leaf
  std::size_t k0_grid = 100;
};

/// Reference leaf Delta (radius delta1/4), point p on it, Delta_0 = B_{delta0}(p)
/// and the cylinder C_0 over Delta_0. Parameters along the leaf are arc length
/// from its centre.
struct ReferenceStructure {
  Curve leaf;
  double leaf_radius = 0.0;
  Point p;
  double p_t = 0.0;
  std::size_t N0 = 0;          // cap used for the search and the delta0 bound
  std::size_t recurrence = 0;  // m <= N0 at which f^m(Delta) u-crosses C_0
  double delta0 = 0.0;
  double delta0_bound = 0.0;
  double delta_s = 0.0;
  double delta1 = 0.0;
  double sigma = 0.0;
  double K0 = 0.0;
  Cylinder C0;

  double d0_lo() const { return p_t - delta0; }
  double d0_hi() const { return p_t + delta0; }
  double d0_length() const { return 2.0 * delta0; }
};

/// delta0 bound: delta1 sigma^N0 / (2 K0^(2 N0)).
double delta0_bound(double delta1, double sigma, std::size_t N0, double K0);

/// Searches p on the leaf (centre first, then outward) such that some f^m(Delta),
/// 1 <= m <= N0, u-crosses the cylinder over B_{delta0}(p); delta0 is half its bound.
/// Throws ReferenceSearchFailed when no candidate works.
ReferenceStructure choose_reference(const System& system, const CuDisk& leaf, const ReferenceParams& params);
ReferenceStructure choose_reference(const System& system, const ReferenceParams& params);

/// Straight leaf of radius delta1/4 through params.leaf_center along e_cu there.
CuDisk reference_leaf(const System& system, const ReferenceParams& params);

/// A periodic point used as the default leaf centre: the fixed point (0,0) for
/// the cat maps, the period-2 point for mp_skew (its fixed point is neutral).
Point default_leaf_center(const System& system);
/// Period of default_leaf_center, the smallest usable N0.
std::size_t default_recurrence_cap(const System& system);

struct PartitionElement {
  double t_lo = 0.0, t_hi = 0.0;  // leaf parameters
  std::size_t generation = 0;     // n
  std::size_t m = 0;              // 0 <= m <= N0
  std::size_t R = 0;              // n + m
  double anchor_t = 0.0;
  double pre_lo = 0.0, pre_hi = 0.0;  // V_n of the anchor
  double leb = 0.0;
};

enum class OwnerKind { element, boundary, unresolved, no_crossing };
std::string to_string(OwnerKind kind);

struct SatelliteEntry {
  OwnerKind kind = OwnerKind::element;
  long owner = -1;  // element index for OwnerKind::element
  double lo = 0.0, hi = 0.0;  // the pre-disk V_n of the covering point
  double anchor_t = 0.0;
};

/// Per generation: all satellite pre-disks with their owners.
struct SatelliteLedger {
  std::size_t n0 = 0;
  std::vector<std::vector<SatelliteEntry>> generations;  // index n - n0
  std::vector<double> totals;                            // Leb of the union per generation

  const std::vector<SatelliteEntry>& at(std::size_t n) const { return generations.at(n - n0); }
  /// Leb of S_n restricted to entries owned by element `owner`.
  double owned_measure(std::size_t n, long owner) const;
};

struct BuildLog {
  std::size_t cover_points = 0;
  std::size_t elements = 0;
  std::size_t grid_resolution_skips = 0;
  std::size_t no_crossing = 0;
  std::size_t rejected_overlap = 0;
  std::size_t rejected_boundary = 0;
  std::vector<std::string> messages;
};

struct PartitionState {
  ReferenceStructure ref;
  std::size_t n0 = 0, n_max = 0, grid = 0;
  std::vector<PartitionElement> elements;  // in acceptance order
  SatelliteLedger ledger;
  std::vector<double> residuals;  // Leb(Delta_n) / Leb(Delta_0), n = n0..n_max
  IntervalSet residual;           // Delta_{n_max}
  BuildLog log;

  double final_residual() const { return residuals.empty() ? 1.0 : residuals.back(); }
};

struct PartitionOptions {
  std::size_t grid = 4096;
  std::size_t min_cells = 4;       // elements narrower than this many cells are skipped
  double crossing_resolution = 0;  // 0: delta0 / 8
  std::size_t budget = kDefaultSampleBudget;
};

/// Inductive construction over generations n0..n_max on a grid of anchors in Delta_0.
PartitionState build_partition(const System& system, const ReferenceStructure& ref, std::size_t n0,
                               std::size_t n_max, const PartitionOptions& opts = {});

struct MarkovCheck {
  std::size_t element = 0;
  double coverage_defect = 0.0;
  double stable_height = 0.0;  // max distance from f^R of a leaf centre to f^R of its ends
  bool pass = false;
};

struct MarkovReport {
  std::vector<MarkovCheck> checks;
  double worst_defect = 0.0;
  double worst_height_ratio = 0.0;  // stable_height / delta_s
  bool all_pass = true;
};

/// f^R(omega) must u-cross C_0 and f^R(C(omega)) must be a u-subset of C_0.
MarkovReport verify_markov(const System& system, const PartitionState& state, double tol = 1e-3);
MarkovCheck verify_element(const System& system, const ReferenceStructure& ref,
                           const PartitionElement& el, std::size_t index, double tol = 1e-3);

struct SummabilityReport {
  std::vector<double> leb;           // Leb(S_n), n = n0..n_max
  std::vector<double> partial_sums;  // cumulative
  std::optional<std::size_t> converged_at;  // first n after which every increment < 1e-6 Leb(Delta_0)
  double envelope_C = 0.0;
  double envelope_beta = 1.0;
  std::size_t envelope_points = 0;
  bool envelope_valid = false;
  bool pass() const { return converged_at.has_value() && envelope_valid && envelope_beta < 1.0; }
};

SummabilityReport satellite_summability(const PartitionState& state);

/// Element table with columns id,generation,m,R,t_lo,t_hi,leb,anchor_t.
std::string elements_csv(const PartitionState& state);
nlohmann::json partition_json(const PartitionState& state);
nlohmann::json summability_json(const SummabilityReport& rep);

}  // namespace gmy
