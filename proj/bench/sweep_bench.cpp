// Serial vs OpenMP sweep over the connection-count grid.

#include <benchmark/benchmark.h>

#include "hnlb/harness.hpp"

namespace {

std::vector<hnlb::SweepPoint> grid() {
  std::vector<hnlb::SweepPoint> g;
  for (std::uint32_t n : {1u, 100u, 1000u, 8000u}) {
    for (hnlb::Mode m : {hnlb::Mode::SLB, hnlb::Mode::HNLB}) {
      hnlb::ExperimentConfig cfg;
      cfg.mode = m;
      cfg.nb_conn = n;
      cfg.rate = 8e6;
      cfg.packets = 100'000;
      g.push_back({cfg, std::nullopt});
    }
  }
  return g;
}

void BM_SweepSerial(benchmark::State& state) {
  const auto g = grid();
  for (auto _ : state) benchmark::DoNotOptimize(hnlb::sweep_serial(g));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.size()));
}

void BM_SweepParallel(benchmark::State& state) {
  const auto g = grid();
  for (auto _ : state) benchmark::DoNotOptimize(hnlb::sweep_parallel(g));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.size()));
}

}  // namespace

BENCHMARK(BM_SweepSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_SweepParallel)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
