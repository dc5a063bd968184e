// Serial reference kernels against their OpenMP counterparts. Set
// OMP_NUM_THREADS to vary the parallel side.

#include <random>

#include <benchmark/benchmark.h>

#include "gsd/analytics.hpp"
#include "gsd/kernels.hpp"
#include "gsd/synth.hpp"

using namespace gsd;

namespace {

EmbeddingMatrix random_matrix(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<EmbeddingVector> out;
  out.reserve(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<double> v(dim);
    for (auto& x : v) x = g(rng);
    out.push_back(EmbeddingVector::from_raw(std::move(v)));
  }
  return EmbeddingMatrix(out);
}

std::vector<std::string> names(std::size_t n) {
  std::vector<std::string> out;
  for (const auto& d : synthesize_benign(n, 1)) out.push_back(d.fqdn);
  return out;
}

void eps_neighbors(benchmark::State& state, kernels::Exec exec) {
  const auto m = random_matrix(static_cast<std::size_t>(state.range(0)), 256, 1);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::eps_neighbors(m, 0.04, exec));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

void threshold_scan(benchmark::State& state, kernels::Exec exec) {
  const auto refs = random_matrix(static_cast<std::size_t>(state.range(0)), 256, 2);
  const auto queries = random_matrix(1000, 256, 3);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::threshold_scan(queries, refs, 0.96, exec));
  state.SetItemsProcessed(state.iterations() * 1000 * state.range(0));
}

void mean_edit_distance(benchmark::State& state, bool parallel) {
  const auto n = names(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(parallel ? mean_pairwise_edit_distance_omp(n) : mean_pairwise_edit_distance_serial(n));
  }
}

}  // namespace

BENCHMARK_CAPTURE(eps_neighbors, serial, kernels::Exec::Serial)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(eps_neighbors, omp, kernels::Exec::Parallel)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(threshold_scan, serial, kernels::Exec::Serial)->Arg(5000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(threshold_scan, omp, kernels::Exec::Parallel)->Arg(5000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(mean_edit_distance, serial, false)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(mean_edit_distance, omp, true)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
