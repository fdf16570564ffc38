// Serial reference against OpenMP for each data-parallel kernel.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "hsa/kernels.hpp"

namespace {

using namespace hsa::kernels;

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

template <bool Omp>
void BM_Matmul(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const MatDims d{m, 64, 64};
  auto a = random_vec(d.m * d.k, 1), b = random_vec(d.k * d.n, 2);
  std::vector<double> c(d.m * d.n);
  for (auto _ : state) {
    if constexpr (Omp) matmul_omp(a, b, c, d);
    else matmul_serial(a, b, c, d);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(d.m * d.k * d.n));
}

template <bool Omp>
void BM_Aggregate(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t dim = 64;
  std::vector<std::vector<int>> nbr(n);
  for (std::size_t v = 0; v + 1 < n; ++v) {
    nbr[v].push_back(static_cast<int>(v + 1));
    nbr[v + 1].push_back(static_cast<int>(v));
  }
  auto h = random_vec(n * dim, 3);
  std::vector<double> out(n * dim);
  for (auto _ : state) {
    if constexpr (Omp) aggregate_neighbors_omp(h, dim, nbr, false, out);
    else aggregate_neighbors_serial(h, dim, nbr, false, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Omp>
void BM_Scan(benchmark::State& state) {
  const ScanDims d{static_cast<std::size_t>(state.range(0)), 64, 8};
  auto x = random_vec(d.steps * d.channels, 4), delta = random_vec(d.steps * d.channels, 5);
  for (auto& v : delta) v = std::abs(v);
  auto b = random_vec(d.steps * d.state, 6), c = random_vec(d.steps * d.state, 7);
  auto a = random_vec(d.channels * d.state, 8);
  for (auto& v : a) v = std::abs(v);
  auto skip = random_vec(d.channels, 9);
  std::vector<double> gamma(d.steps, 1.0), y(d.steps * d.channels);
  const ScanInputs in{x, delta, b, c, a, skip, gamma};
  for (auto _ : state) {
    if constexpr (Omp) selective_scan_omp(in, d, y, {});
    else selective_scan_serial(in, d, y, {});
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(d.steps));
}

template <bool Omp>
void BM_Cosine(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto h = random_vec(n * 64, 10);
  for (auto _ : state) {
    double v = Omp ? mean_pairwise_cosine_omp(h, n, 64) : mean_pairwise_cosine_serial(h, n, 64);
    benchmark::DoNotOptimize(v);
  }
}

BENCHMARK(BM_Matmul<false>)->Name("matmul/serial")->Arg(64)->Arg(512);
BENCHMARK(BM_Matmul<true>)->Name("matmul/omp")->Arg(64)->Arg(512);
BENCHMARK(BM_Aggregate<false>)->Name("aggregate/serial")->Arg(40)->Arg(4096);
BENCHMARK(BM_Aggregate<true>)->Name("aggregate/omp")->Arg(40)->Arg(4096);
BENCHMARK(BM_Scan<false>)->Name("scan/serial")->Arg(64)->Arg(4096);
BENCHMARK(BM_Scan<true>)->Name("scan/omp")->Arg(64)->Arg(4096);
BENCHMARK(BM_Cosine<false>)->Name("cosine/serial")->Arg(40)->Arg(400);
BENCHMARK(BM_Cosine<true>)->Name("cosine/omp")->Arg(40)->Arg(400);

}  // namespace

BENCHMARK_MAIN();
