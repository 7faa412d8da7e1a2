#include <benchmark/benchmark.h>

#include <memory>

#include "pmon/ipa.hpp"
#include "pmon/optimizer.hpp"
#include "pmon/riccati.hpp"

namespace {

using pmon::Matrix;

pmon::Scenario two_targets() {
  Matrix A(2, 2);
  A << -1.0, -0.1, -0.1, 0.01;
  const Matrix I = Matrix::Identity(2, 2);
  pmon::Scenario sc;
  sc.T = 6.0;
  sc.targets.emplace_back(A, I, I, I, -1.0);
  sc.targets.emplace_back(A, I, I, I, 1.0);
  sc.agents.push_back({0.0, {0.2, 0.4, 0.2}, {0.05, 0.05, 0.05}, 0.9});
  return sc;
}

void BM_IntegratePeriod(benchmark::State& state) {
  const auto sc = two_targets();
  const auto grid = pmon::CoverageGrid::from_scenario(sc, static_cast<int>(state.range(0)));
  const Matrix seed = sc.targets[0].Q();
  for (auto _ : state) {
    auto trace = pmon::integrate_period(seed, grid, 0, sc.targets[0], sc.T);
    benchmark::DoNotOptimize(trace.back());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(grid.intervals()));
}
BENCHMARK(BM_IntegratePeriod)->Arg(500)->Arg(2000)->Arg(8000);

void BM_Evaluate(benchmark::State& state) {
  const auto sc = two_targets();
  for (auto _ : state) benchmark::DoNotOptimize(pmon::evaluate(sc).cost);
}
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond);

void BM_CostGradient(benchmark::State& state) {
  const auto sc = two_targets();
  const auto ev = pmon::evaluate(sc);
  for (auto _ : state) benchmark::DoNotOptimize(pmon::cost_gradient(sc, ev.cycles).period);
}
BENCHMARK(BM_CostGradient)->Unit(benchmark::kMillisecond);

void BM_SolveStein(benchmark::State& state) {
  const int L = static_cast<int>(state.range(0));
  const Matrix S = 0.3 * Matrix::Identity(L, L) + 0.05 * Matrix::Ones(L, L);
  const Matrix C = Matrix::Identity(L, L);
  for (auto _ : state) benchmark::DoNotOptimize(pmon::solve_stein(S, C)(0, 0));
}
BENCHMARK(BM_SolveStein)->Arg(2)->Arg(4)->Arg(8);

void BM_Project(benchmark::State& state) {
  pmon::AgentParams a{0.0, {}, {}, 1.0};
  for (int p = 0; p < state.range(0); ++p) {
    a.tau.push_back(0.1 + 0.03 * p);
    a.omega.push_back(0.05);
  }
  for (auto _ : state) benchmark::DoNotOptimize(pmon::project(a).tau.front());
}
BENCHMARK(BM_Project)->Arg(3)->Arg(11)->Arg(40);

}  // namespace

BENCHMARK_MAIN();
