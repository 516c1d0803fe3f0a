#pragma once

#include "gmy/types.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace gmy {

/// Seed-addressable stream: the same (seed, stream) always gives the same
/// generator, independent of which worker draws it.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the pair
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Point i is drawn uniformly from stream (seed, offset + i).
inline std::vector<Point> random_points(std::uint64_t seed, std::size_t n, std::uint64_t offset = 0) {
  std::vector<Point> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::mt19937_64 rng(stream_seed(seed, offset + i));
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double x = U(rng);
    out.emplace_back(x, U(rng));
  }
  return out;
}

}  // namespace gmy
