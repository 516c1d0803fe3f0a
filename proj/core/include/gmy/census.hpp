#pragma once

#include "gmy/tower.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gmy {

/// Occupancy histogram of the orbit tail (burn_in, horizon] on a g x g grid.
struct OmegaSignature {
  Point start;
  std::size_t g = 0;
  std::size_t burn_in = 0, horizon = 0;
  std::vector<double> occupancy;  // row-major, iy * g + ix; sums to 1
};

OmegaSignature omega_signature(const System& system, const Point& x, std::size_t burn_in, std::size_t horizon,
                               std::size_t g);

/// Signatures for many starts, computed in parallel into fixed slots.
std::vector<OmegaSignature> omega_signatures(const System& system, std::span<const Point> starts,
                                             std::size_t burn_in, std::size_t horizon, std::size_t g);

/// Total variation distance between two histograms on the same grid.
double tv_distance(const OmegaSignature& a, const OmegaSignature& b);

struct AttractorRecord {
  std::size_t id = 0;
  std::vector<std::size_t> members;  // indices into the signature list
  std::vector<double> centroid;
  std::vector<std::size_t> support;  // cells with centroid mass above 1/(10 g^2)
};

struct Census {
  std::vector<AttractorRecord> records;
  std::vector<std::size_t> assignment;         // cluster id per signature
  std::vector<std::vector<double>> distances;  // full pairwise TV matrix
  double threshold = 0.2;
};

/// Single-linkage clustering under TV distance. Cluster ids follow the index
/// of their first member. Requires at least two signatures.
Census cluster_attractors(const std::vector<OmegaSignature>& signatures, double threshold = 0.2);

struct ExpandingPower {
  std::size_t N = 0;
  double value = 0.0;
};

struct ExpandingPowerReport {
  std::optional<ExpandingPower> result;
  std::vector<double> averages;  // weighted average for N = 1..N_max
  std::size_t dropped = 0;       // samples whose frame did not converge
};

/// Smallest N <= N_max with a negative weighted average of log |(Df^N|E^cu)^{-1}|.
ExpandingPowerReport find_expanding_power(const System& system, std::span<const WeightedPoint> samples,
                                          std::size_t N_max, const FrameOptions& opts = {});

std::string census_csv(const std::vector<OmegaSignature>& signatures, const Census& census);
std::string distances_csv(const Census& census);

}  // namespace gmy
