//! Serial reference vs OpenMP kernels. Arg 0 = serial, 1 = parallel.
#include <benchmark/benchmark.h>

#include "sadl/metrics.hpp"
#include "sadl/parametrix.hpp"
#include "sadl/simulate.hpp"

using namespace sadl;

namespace {

Exec exec_of(const benchmark::State& st) { return st.range(0) ? Exec::parallel : Exec::serial; }

const TruncatedDynamics& dyn100() {
  static const TruncatedDynamics d =
      build_dynamics(linear_gaussian_1d(1.0), StepSchedule(1.0, 0.0, 1.0, 100), vec1(1.0), 0.5);
  return d;
}

void BM_kde(benchmark::State& st) {
  RandomSource rng(1);
  std::vector<double> s(200000);
  for (auto& x : s) x = rng.normal();
  Grid1D grid(-6.0, 6.0, 512);
  for (auto _ : st) benchmark::DoNotOptimize(kde(s, 0.0, grid, exec_of(st)));
}

void BM_bundle(benchmark::State& st) {
  BundleRequest req;
  req.processes = {"U", "V", "X"};
  req.n_paths = 2000;
  for (auto _ : st) benchmark::DoNotOptimize(simulate_bundle(dyn100(), req, exec_of(st)));
}

void BM_chain_samples(benchmark::State& st) {
  for (auto _ : st)
    benchmark::DoNotOptimize(terminal_chain_samples(dyn100(), 0.0, dyn100().grid().M, 50000, 3, exec_of(st)));
}

void BM_series_p(benchmark::State& st) {
  const auto chain = ScalarChain::truncated(dyn100());
  Grid1D grid(-5.0, 5.0, 96);
  SeriesOptions opt;
  opt.exec = exec_of(st);
  for (auto _ : st) benchmark::DoNotOptimize(series_p(chain, dyn100().grid().M, 0.0, grid, opt));
}

void BM_series_q(benchmark::State& st) {
  const auto diff = ScalarDiffusion::truncated(dyn100());
  Grid1D grid(-5.0, 5.0, 128);
  SeriesOptions opt;
  opt.n_time = 32;
  opt.exec = exec_of(st);
  for (auto _ : st) benchmark::DoNotOptimize(series_q(diff, 0.0, 0.5, 0.0, grid, opt));
}

}  // namespace

BENCHMARK(BM_kde)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_bundle)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_chain_samples)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_series_p)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_series_q)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
