#include "gmy/census.hpp"
#include "gmy/hyperbolic_times.hpp"
#include "gmy/random.hpp"
#include "gmy/tower.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace gmy;

namespace {

std::vector<double> random_log(std::size_t n) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-2.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = U(rng);
  return v;
}

ReferenceStructure cat_reference(const System& cat) {
  ReferenceParams rp;
  rp.sigma = 0.4;
  rp.delta1 = 0.05;
  rp.N0 = 1;
  return choose_reference(cat, rp);
}

}  // namespace

static void BM_HyperbolicTimeScan(benchmark::State& st) {
  auto v = random_log(std::size_t(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(hyperbolic_times(v, 0.5));
  st.SetComplexityN(st.range(0));
}
BENCHMARK(BM_HyperbolicTimeScan)->RangeMultiplier(10)->Range(1000, 1000000)->Complexity(benchmark::oN);

static void BM_ContractionLog(benchmark::State& st) {
  auto sys = make_system(st.range(0) ? "mp_skew" : "cat");
  for (auto _ : st) benchmark::DoNotOptimize(contraction_log(*sys, Point(0.31, 0.62), 10000));
  st.SetLabel(sys->name());
}
BENCHMARK(BM_ContractionLog)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

static void BM_CatPartitionBuild(benchmark::State& st) {
  auto cat = make_system("cat");
  auto ref = cat_reference(*cat);
  PartitionOptions po;
  po.grid = std::size_t(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(build_partition(*cat, ref, 3, 40, po));
}
BENCHMARK(BM_CatPartitionBuild)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);

static void BM_CatInvariantDensity(benchmark::State& st) {
  auto cat = make_system("cat");
  auto state = build_partition(*cat, cat_reference(*cat), 3, 40, {});
  InducedMap im(*cat, state);
  for (auto _ : st) benchmark::DoNotOptimize(invariant_density(im, 500, 1e-6, std::size_t(st.range(0))));
}
BENCHMARK(BM_CatInvariantDensity)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);

static void BM_OmegaSignature(benchmark::State& st) {
  auto cat = make_system("cat");
  for (auto _ : st) benchmark::DoNotOptimize(omega_signature(*cat, Point(0.2, 0.7), 1000, std::size_t(st.range(0)), 64));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_OmegaSignature)->Arg(100000)->Unit(benchmark::kMillisecond);

static void BM_Clustering(benchmark::State& st) {
  auto cat = make_system("cat");
  auto sigs = omega_signatures(*cat, random_points(3, std::size_t(st.range(0))), 100, 5000, 32);
  for (auto _ : st) benchmark::DoNotOptimize(cluster_attractors(sigs));
}
BENCHMARK(BM_Clustering)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
