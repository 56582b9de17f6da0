// Serial reference against OpenMP kernels. Thread count follows
// CAMPSEG_THREADS / OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "campseg/kernels.hpp"
#include "campseg/random.hpp"

namespace k = campseg::kernels;

namespace {

template <typename T>
std::vector<T> random_values(std::size_t n, double lo, double hi, std::uint64_t seed) {
  campseg::Rng rng(seed);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
  return v;
}

template <bool Omp>
void BM_Gemm(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const auto a = random_values<float>(n * n, -1, 1, 1), b = random_values<float>(n * n, -1, 1, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    if constexpr (Omp)
      k::omp::gemm(n, n, n, a.data(), b.data(), c.data());
    else
      k::serial::gemm(n, n, n, a.data(), b.data(), c.data());
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}

template <bool Omp>
void BM_Im2col(benchmark::State& state) {
  const std::size_t ch = 16, hw = static_cast<std::size_t>(state.range(0));
  const auto x = random_values<float>(ch * hw * hw, -1, 1, 3);
  std::vector<float> cols(ch * 9 * hw * hw);
  for (auto _ : state) {
    if constexpr (Omp)
      k::omp::im2col(ch, hw, hw, 3, 1, x.data(), cols.data());
    else
      k::serial::im2col(ch, hw, hw, 3, 1, x.data(), cols.data());
    benchmark::DoNotOptimize(cols.data());
  }
  state.SetBytesProcessed(state.iterations() * cols.size() * sizeof(float));
}

template <bool Omp>
void BM_Bilinear(benchmark::State& state) {
  const std::size_t w = static_cast<std::size_t>(state.range(0));
  const auto src = random_values<std::uint8_t>(w * w * 3, 0, 255.99, 4);
  std::vector<std::uint8_t> dst(w * w * 3 * 16);
  for (auto _ : state) {
    if constexpr (Omp)
      k::omp::upscale_bilinear(src.data(), w, w, 3, 4, dst.data());
    else
      k::serial::upscale_bilinear(src.data(), w, w, 3, 4, dst.data());
    benchmark::DoNotOptimize(dst.data());
  }
  state.SetItemsProcessed(state.iterations() * dst.size());
}

template <bool Omp>
void BM_Confusion(benchmark::State& state) {
  const std::size_t w = static_cast<std::size_t>(state.range(0));
  auto p = random_values<std::uint8_t>(w * w, 0, 2, 5), g = random_values<std::uint8_t>(w * w, 0, 2, 6);
  for (auto& v : p) v = v ? 255 : 0;
  for (auto& v : g) v = v ? 255 : 0;
  for (auto _ : state) {
    const auto t = Omp ? k::omp::confusion(w, w, p.data(), g.data()) : k::serial::confusion(w, w, p.data(), g.data());
    benchmark::DoNotOptimize(t);
  }
  state.SetItemsProcessed(state.iterations() * w * w);
}

}  // namespace

BENCHMARK(BM_Gemm<false>)->Name("gemm/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_Gemm<true>)->Name("gemm/omp")->Arg(64)->Arg(256);
BENCHMARK(BM_Im2col<false>)->Name("im2col/serial")->Arg(64);
BENCHMARK(BM_Im2col<true>)->Name("im2col/omp")->Arg(64);
BENCHMARK(BM_Bilinear<false>)->Name("bilinear_x4/serial")->Arg(256);
BENCHMARK(BM_Bilinear<true>)->Name("bilinear_x4/omp")->Arg(256);
BENCHMARK(BM_Confusion<false>)->Name("confusion/serial")->Arg(1024);
BENCHMARK(BM_Confusion<true>)->Name("confusion/omp")->Arg(1024);

int main(int argc, char** argv) {
  k::configure_threads_from_env();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
