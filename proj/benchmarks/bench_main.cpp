#include <random>

#include <benchmark/benchmark.h>

#include "wflow/flows.hpp"
#include "wflow/operators.hpp"
#include "wflow/transport.hpp"

using namespace wflow;

namespace {

std::vector<Point> cloud(std::size_t n, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<Point> pts(n, Point(dim));
  for (auto& p : pts)
    for (int c = 0; c < dim; ++c) p(c) = g(rng);
  return pts;
}

void BM_W2Exact(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto mu = DiscreteMeasure::empirical(cloud(n, 2, 1));
  const auto nu = DiscreteMeasure::empirical(cloud(n, 2, 2));
  for (auto _ : state) benchmark::DoNotOptimize(w2_exact(mu, nu).squared);
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_W2Exact)->RangeMultiplier(2)->Range(8, 256)->Complexity();

void BM_ResolventProx(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const LagrangianOperator b(Functional(Profile::quadratic(0.5), Profile::abs(1.0)).subgradient_field());
  const auto pts = cloud(n, 1, 3);
  const auto y = LagrangianVector::from_points(pts);
  for (auto _ : state) benchmark::DoNotOptimize(resolvent(b, 0.1, y).matrix().data());
}
BENCHMARK(BM_ResolventProx)->RangeMultiplier(4)->Range(4, 64)->Unit(benchmark::kMillisecond);

void BM_ResolventFixedPoint(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const LagrangianOperator b(barycentric_field(1.0));
  const auto y = LagrangianVector::from_points(cloud(n, 3, 4));
  for (auto _ : state) benchmark::DoNotOptimize(resolvent(b, 0.1, y).matrix().data());
}
BENCHMARK(BM_ResolventFixedPoint)->RangeMultiplier(4)->Range(4, 1024);

void BM_StickyFlow(benchmark::State& state) {
  const Functional phi(Profile::zero(), Profile::abs(1.0));
  const auto mu = DiscreteMeasure::empirical(cloud(static_cast<std::size_t>(state.range(0)), 1, 5));
  for (auto _ : state) benchmark::DoNotOptimize(evolve(phi, mu, Scheme::implicit(0.05), 1.0).size());
}
BENCHMARK(BM_StickyFlow)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
