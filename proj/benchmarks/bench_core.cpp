#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "exitrisk/calibrate.hpp"
#include "exitrisk/synth.hpp"
#include "exitrisk/trials.hpp"

using namespace exitrisk;

namespace {

std::vector<double> random_losses(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> losses(n);
  for (double& v : losses) v = 2.0 * unit(rng) - 1.0;
  return losses;
}

SynthConfig pool_config(std::size_t n) {
  SynthConfig cfg;
  cfg.num_samples = n;
  cfg.num_exits = 5;
  cfg.num_classes = 10;
  cfg.difficulty_spread = 1.0;
  cfg.exit_gain = {0.12, 0.1, 0.08, 0.06};
  cfg.overthinking_frac = 0.1;
  cfg.confidence_noise = 0.1;
  cfg.seed = 7;
  return cfg;
}

void BM_wsr_upper_bound(benchmark::State& state) {
  const auto losses = random_losses(static_cast<std::size_t>(state.range(0)), 3);
  WsrConfig cfg;
  cfg.delta = 0.1;
  cfg.bound = 1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(wsr_upper_bound(losses, cfg));
  }
}
BENCHMARK(BM_wsr_upper_bound)->Arg(100)->Arg(1000)->Arg(10000);

void BM_derive_losses(benchmark::State& state) {
  const TraceSet ts =
      generate(pool_config(static_cast<std::size_t>(state.range(0))));
  RiskSpec spec;
  spec.bound = 1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(derive_losses(ts, spec));
  }
}
BENCHMARK(BM_derive_losses)->Arg(1000)->Arg(10000);

void BM_risk_curve(benchmark::State& state) {
  const TraceSet ts =
      generate(pool_config(static_cast<std::size_t>(state.range(0))));
  RiskSpec spec;
  spec.bound = 1.0;
  const LossMatrix lm = derive_losses(ts, spec);
  const ThresholdGrid grid(0.01);
  for (auto _ : state) {
    benchmark::DoNotOptimize(risk_curve(lm, ts, grid));
  }
}
BENCHMARK(BM_risk_curve)->Arg(1000)->Arg(10000);

void BM_lambda_ucb(benchmark::State& state) {
  const TraceSet ts =
      generate(pool_config(static_cast<std::size_t>(state.range(0))));
  RiskSpec spec;
  spec.bound = 1.0;
  const LossMatrix lm = derive_losses(ts, spec);
  const ThresholdGrid grid(0.01);
  WsrConfig wsr;
  wsr.delta = 0.1;
  wsr.bound = 1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(lambda_ucb(lm, ts, grid, 0.1, 0.1, wsr));
  }
}
BENCHMARK(BM_lambda_ucb)->Arg(100)->Arg(500);

void BM_run_trials_crc(benchmark::State& state) {
  const TraceSet ts = generate(pool_config(500));
  RiskSpec spec;
  spec.bound = 1.0;
  TrialConfig cfg;
  cfg.method = Method::crc;
  cfg.epsilon = 0.05;
  cfg.num_trials = static_cast<std::size_t>(state.range(0));
  cfg.seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_trials(ts, spec, cfg));
  }
}
BENCHMARK(BM_run_trials_crc)->Arg(10)->Arg(100);

}  // namespace

BENCHMARK_MAIN();
