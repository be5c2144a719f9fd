#include <vector>

#include <benchmark/benchmark.h>

#include "ubpf/estimators.hpp"
#include "ubpf/filters.hpp"
#include "ubpf/milstein.hpp"
#include "ubpf/resampling.hpp"

using namespace ubpf;

namespace {

void BM_PropagateSingle(benchmark::State& state) {
  const ClarkCameronModel m = default_clark_cameron();
  const Level level{static_cast<unsigned>(state.range(0))};
  Rng rng = make_rng(1);
  CostMeter cost;
  std::vector<double> x{0.0, 0.0};
  for (auto _ : state) {
    propagate_single(m, level, x, rng, cost);
    benchmark::DoNotOptimize(x.data());
  }
  state.counters["steps/s"] =
      benchmark::Counter(static_cast<double>(cost.steps()), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_PropagateSingle)->DenseRange(3, 9, 3);

void BM_PropagateAntithetic(benchmark::State& state) {
  const NlmModel m = default_nlm();
  const Level level{static_cast<unsigned>(state.range(0))};
  Rng rng = make_rng(2);
  CostMeter cost;
  std::vector<double> f{0.0, 0.0}, c = f, a = f;
  for (auto _ : state) {
    propagate_antithetic(m, level, f, c, a, rng, cost);
    benchmark::DoNotOptimize(f.data());
  }
  state.counters["steps/s"] =
      benchmark::Counter(static_cast<double>(cost.steps()), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_PropagateAntithetic)->DenseRange(3, 9, 3);

void BM_CoupledResample3(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng = make_rng(3);
  std::vector<double> w1(n), w2(n), w3(n);
  for (std::size_t i = 0; i < n; ++i) {
    w1[i] = 1.0 + uniform01(rng);
    w2[i] = 1.0 + uniform01(rng);
    w3[i] = 1.0 + uniform01(rng);
  }
  for (auto* w : {&w1, &w2, &w3}) {
    double s = 0;
    for (double v : *w) s += v;
    for (double& v : *w) v /= s;
  }
  for (auto _ : state) benchmark::DoNotOptimize(coupled_resample3(w1, w2, w3, rng));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_CoupledResample3)->RangeMultiplier(8)->Range(64, 32768);

void BM_CpfRun(benchmark::State& state) {
  const ClarkCameronModel m = default_clark_cameron();
  const Dataset data = simulate_dataset(m, 10, Level{8}, 1);
  Rng rng = make_rng(4);
  FilterOptions options;
  options.keep_all = false;
  std::uint64_t steps = 0;
  for (auto _ : state) {
    const CpfRun run = cpf_run(m, Level{static_cast<unsigned>(state.range(0))}, 1000, data,
                               options, rng);
    steps += run.cost;
  }
  state.counters["steps/s"] =
      benchmark::Counter(static_cast<double>(steps), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_CpfRun)->Arg(3)->Arg(6)->Unit(benchmark::kMillisecond);

void BM_XiTerm(benchmark::State& state) {
  const GbmModel m = default_gbm();
  const Dataset data = simulate_dataset(m, 10, Level{8}, 1);
  Problem problem;
  problem.model = &m;
  problem.data = &data;
  problem.time = 10;
  RandomizationConfig config = default_config(0.1, Method::ub_amlpf);
  config.n0 = 50;
  std::uint64_t seed = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(xi_term(problem, config, 3, 2, seed++).xi);
}
BENCHMARK(BM_XiTerm)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
