// Parallel kernels against their serial reference implementations.
#include "qnl/ddfilter.hpp"
#include "qnl/mcsim.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

using namespace qnl;

namespace {

const mcsim::SyntheticNoise kNoise{1e10, 1.5, 2e3, 5e6, 11};
const std::vector<double> kTau = [] {
  std::vector<double> t;
  for (int i = 1; i <= 20; ++i) t.push_back(i * 1e-6);
  return t;
}();

template <auto Fn>
void bm_simulate(benchmark::State& state) {
  const ddfilter::PulseSequence seq{4, kTau.back(), 0.0};
  const auto n_traj = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(Fn(kNoise, seq, kTau, 1.0, n_traj, 2.5e-8));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

std::vector<double> omega_grid(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 2 * M_PI * std::pow(10.0, 2.0 + 6.0 * i / (n - 1));
  return w;
}

template <auto Fn>
void bm_filter(benchmark::State& state) {
  const ddfilter::PulseSequence seq{16, 40e-6, 20e-9};
  const auto w = omega_grid(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Fn(seq, w));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(bm_simulate<mcsim::simulate_sequence>)->Name("simulate/parallel")->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_simulate<mcsim::simulate_sequence_serial>)->Name("simulate/serial")->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_filter<ddfilter::filter_scan>)->Name("filter_scan/parallel")->Arg(1 << 14)->Arg(1 << 18);
BENCHMARK(bm_filter<ddfilter::filter_scan_serial>)->Name("filter_scan/serial")->Arg(1 << 14)->Arg(1 << 18);

BENCHMARK_MAIN();
