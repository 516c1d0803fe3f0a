#include "gmy/census.hpp"

#include <tbb/parallel_for.h>

#include <cstdio>
#include <numeric>
#include <sstream>

namespace gmy {

OmegaSignature omega_signature(const System& system, const Point& x, std::size_t burn_in, std::size_t horizon,
                               std::size_t g) {
  if (burn_in >= horizon) throw ParameterError("burn-in must be below the horizon");
  if (g < 1) throw ParameterError("signature grid must have at least one cell");
  OmegaSignature s;
  s.start = x;
  s.g = g;
  s.burn_in = burn_in;
  s.horizon = horizon;
  std::vector<std::uint64_t> counts(g * g, 0);
  Point p = x;
  for (std::size_t k = 1; k <= horizon; ++k) {
    p = system.apply(p);
    if (k <= burn_in) continue;
    auto ix = std::min(g - 1, std::size_t(p.x * double(g)));
    auto iy = std::min(g - 1, std::size_t(p.y * double(g)));
    ++counts[iy * g + ix];
  }
  const double total = double(horizon - burn_in);
  s.occupancy.resize(g * g);
  for (std::size_t c = 0; c < counts.size(); ++c) s.occupancy[c] = double(counts[c]) / total;
  return s;
}

std::vector<OmegaSignature> omega_signatures(const System& system, std::span<const Point> starts,
                                             std::size_t burn_in, std::size_t horizon, std::size_t g) {
  std::vector<OmegaSignature> out(starts.size());
  tbb::parallel_for(std::size_t(0), starts.size(),
                    [&](std::size_t i) { out[i] = omega_signature(system, starts[i], burn_in, horizon, g); });
  return out;
}

double tv_distance(const OmegaSignature& a, const OmegaSignature& b) {
  if (a.g != b.g) throw ParameterError("signatures on different grids");
  return total_variation(a.occupancy, b.occupancy);
}

Census cluster_attractors(const std::vector<OmegaSignature>& sigs, double threshold) {
  if (sigs.size() < 2) throw ParameterError("clustering needs at least two signatures");
  const std::size_t n = sigs.size();
  Census c;
  c.threshold = threshold;
  c.distances.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) c.distances[i][j] = c.distances[j][i] = tv_distance(sigs[i], sigs[j]);

  // union-find; roots are the smallest index in each component
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t(0));
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (c.distances[i][j] <= threshold) {
        std::size_t a = find(i), b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }

  c.assignment.assign(n, 0);
  std::vector<long> id_of_root(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = find(i);
    if (id_of_root[r] < 0) {
      id_of_root[r] = long(c.records.size());
      AttractorRecord rec;
      rec.id = c.records.size();
      rec.centroid.assign(sigs[i].occupancy.size(), 0.0);
      c.records.push_back(rec);
    }
    auto& rec = c.records[std::size_t(id_of_root[r])];
    rec.members.push_back(i);
    c.assignment[i] = rec.id;
  }
  for (auto& rec : c.records) {
    for (auto i : rec.members)
      for (std::size_t k = 0; k < rec.centroid.size(); ++k) rec.centroid[k] += sigs[i].occupancy[k];
    const double g2 = double(rec.centroid.size());
    for (std::size_t k = 0; k < rec.centroid.size(); ++k) {
      rec.centroid[k] /= double(rec.members.size());
      if (rec.centroid[k] > 0.1 / g2) rec.support.push_back(k);
    }
  }
  return c;
}

ExpandingPowerReport find_expanding_power(const System& system, std::span<const WeightedPoint> samples,
                                          std::size_t N_max, const FrameOptions& opts) {
  if (N_max < 1) throw ParameterError("N_max must be >= 1");
  ExpandingPowerReport rep;
  // cumulative log |Df^N e_cu| per sample; E^cu is one-dimensional, so the
  // inverse norm is the reciprocal
  std::vector<std::vector<double>> sums(samples.size());
  std::vector<char> ok(samples.size(), 1);
  tbb::parallel_for(std::size_t(0), samples.size(), [&](std::size_t i) {
    CuWalker w(system, samples[i].x, opts);
    if (!w.converged()) {
      ok[i] = 0;
      return;
    }
    double acc = 0.0;
    for (std::size_t N = 1; N <= N_max; ++N) {
      acc += w.step();
      if (!std::isfinite(acc)) {
        ok[i] = 0;
        return;
      }
      sums[i].push_back(acc);
    }
  });
  double wsum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (ok[i])
      wsum += samples[i].w;
    else
      ++rep.dropped;
  }
  rep.averages.assign(N_max, 0.0);
  if (wsum <= 0.0) return rep;
  for (std::size_t N = 1; N <= N_max; ++N) {
    double v = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (ok[i]) v -= samples[i].w * sums[i][N - 1];
    v /= wsum;
    rep.averages[N - 1] = v;
    if (v < 0.0 && !rep.result) rep.result = ExpandingPower{N, v};
  }
  return rep;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string census_csv(const std::vector<OmegaSignature>& sigs, const Census& census) {
  std::ostringstream os;
  os << "index,x,y,cluster\n";
  for (std::size_t i = 0; i < sigs.size(); ++i)
    os << i << ',' << num(sigs[i].start.x) << ',' << num(sigs[i].start.y) << ',' << census.assignment[i] << '\n';
  return os.str();
}

std::string distances_csv(const Census& census) {
  std::ostringstream os;
  for (const auto& row : census.distances) {
    for (std::size_t j = 0; j < row.size(); ++j) os << (j ? "," : "") << num(row[j]);
    os << '\n';
  }
  return os.str();
}

}  // namespace gmy
