#include <benchmark/benchmark.h>

#include "muxloop/model.hpp"
#include "muxloop/rng.hpp"
#include "muxloop/sim.hpp"
#include "muxloop/tags.hpp"

using namespace muxloop;

namespace {

sim::SimConfig reference_config(std::uint64_t cycles) {
  sim::SimConfig cfg;
  cfg.cycles = cycles;
  cfg.seed = 1;
  cfg.stats = {PhotonLaw::Thermal, 0.009};
  cfg.channels = {0.145, 0.143, 1.0};
  return cfg;
}

void BM_AnalyticSolve(benchmark::State& state) {
  const PhotonStatistics stats{PhotonLaw::Thermal, 0.009};
  const ChannelModel channels{0.145, 0.143, 1.0};
  MuxConfig mux;
  mux.m = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(model::solve(stats, channels, mux));
  }
}
BENCHMARK(BM_AnalyticSolve)->Arg(1)->Arg(11);

void BM_SimulateCycles(benchmark::State& state) {
  const sim::SimConfig cfg = reference_config(100'000);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sim::simulate_cycles(cfg, 1));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          100'000);
}
BENCHMARK(BM_SimulateCycles);

void BM_SimulateCyclesThreaded(benchmark::State& state) {
  const sim::SimConfig cfg = reference_config(1'000'000);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sim::simulate_cycles(cfg, 0));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          1'000'000);
}
BENCHMARK(BM_SimulateCyclesThreaded);

void BM_GenerateTimetags(benchmark::State& state) {
  const sim::SimConfig cfg = reference_config(100'000);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sim::generate_timetags(cfg));
  }
}
BENCHMARK(BM_GenerateTimetags);

void BM_CountCoincidences(benchmark::State& state) {
  // two dense correlated trains
  tags::TagStream stream;
  CycleRng rng(7, 0);
  std::int64_t t = 0;
  for (int i = 0; i < 200'000; ++i) {
    t += 1'000 + static_cast<std::int64_t>(rng.uniform() * 9'000);
    stream.channels[0].push_back(t);
    if (rng.bernoulli(0.3)) stream.channels[1].push_back(t + 500);
  }
  stream.duration_ps = t + 10'000;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        tags::count_coincidences(stream, 0, 1, {1'000, 500}));
  }
}
BENCHMARK(BM_CountCoincidences);

}  // namespace

BENCHMARK_MAIN();
