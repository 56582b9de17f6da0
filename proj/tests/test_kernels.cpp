#include <omp.h>

#include <cstdint>
#include <cstdlib>
#include <vector>

#include "campseg/kernels.hpp"
#include "campseg/random.hpp"
#include "doctest.h"

using namespace campseg;
namespace k = campseg::kernels;

namespace {

template <typename T>
std::vector<T> random_values(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
  return v;
}

// Runs the OpenMP variants with several threads even on a single core.
struct Threads {
  int saved = omp_get_max_threads();
  explicit Threads(int n) { omp_set_num_threads(n); }
  ~Threads() { omp_set_num_threads(saved); }
};

}  // namespace

TEST_CASE("gemm: OpenMP equals serial and a naive triple loop") {
  Rng rng(1);
  Threads t(4);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t m = rng.uniform_int(1, 40), n = rng.uniform_int(1, 40), kk = rng.uniform_int(1, 40);
    const auto a = random_values<float>(rng, m * kk, -1, 1), b = random_values<float>(rng, kk * n, -1, 1);
    std::vector<float> cs(m * n), co(m * n);
    k::serial::gemm(m, n, kk, a.data(), b.data(), cs.data());
    k::omp::gemm(m, n, kk, a.data(), b.data(), co.data());
    CHECK(cs == co);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0;
        for (std::size_t p = 0; p < kk; ++p) s += static_cast<double>(a[i * kk + p]) * b[p * n + j];
        REQUIRE(cs[i * n + j] == doctest::Approx(s).epsilon(1e-5));
      }
    auto acc = cs;
    k::omp::gemm(m, n, kk, a.data(), b.data(), acc.data(), true);
    for (std::size_t i = 0; i < acc.size(); ++i) REQUIRE(acc[i] == doctest::Approx(2.0 * cs[i]).epsilon(1e-6));
  }
}

TEST_CASE("transpose, im2col, col2im: OpenMP equals serial") {
  Rng rng(2);
  Threads t(3);
  const std::size_t rows = 13, cols = 7;
  const auto src = random_values<double>(rng, rows * cols, -5, 5);
  std::vector<double> ts(rows * cols), to(rows * cols);
  k::serial::transpose(rows, cols, src.data(), ts.data());
  k::omp::transpose(rows, cols, src.data(), to.data());
  CHECK(ts == to);
  CHECK(ts[3 * rows + 5] == src[5 * cols + 3]);

  for (std::size_t ks : {1u, 3u}) {
    const std::size_t c = 4, h = 9, w = 11, pad = ks / 2;
    const auto x = random_values<float>(rng, c * h * w, -1, 1);
    std::vector<float> s(c * ks * ks * h * w), o(s.size());
    k::serial::im2col(c, h, w, ks, pad, x.data(), s.data());
    k::omp::im2col(c, h, w, ks, pad, x.data(), o.data());
    CHECK(s == o);
    if (ks == 1) CHECK(s == x);
    std::vector<float> ds(c * h * w, 0.f), dpar(c * h * w, 0.f);
    k::serial::col2im(c, h, w, ks, pad, s.data(), ds.data());
    k::omp::col2im(c, h, w, ks, pad, o.data(), dpar.data());
    CHECK(ds == dpar);
  }
}

TEST_CASE("resampling and confusion kernels: OpenMP equals serial") {
  Rng rng(3);
  Threads t(4);
  const std::size_t w = 17, h = 12, bands = 3;
  const auto u8 = random_values<std::uint8_t>(rng, w * h * bands, 0, 255.99);
  for (int f : {2, 3, 4}) {
    std::vector<std::uint8_t> bs(w * h * bands * f * f), bo(bs.size()), ns(bs.size()), no(bs.size());
    k::serial::upscale_bilinear(u8.data(), w, h, bands, f, bs.data());
    k::omp::upscale_bilinear(u8.data(), w, h, bands, f, bo.data());
    CHECK(bs == bo);
    k::serial::upscale_nearest(u8.data(), w, h, bands, f, ns.data());
    k::omp::upscale_nearest(u8.data(), w, h, bands, f, no.data());
    CHECK(ns == no);
    std::vector<std::uint8_t> back(u8.size());
    k::omp::box_downsample(ns.data(), w * f, h * f, bands, f, back.data());
    CHECK(back == u8);
  }
  std::vector<std::uint8_t> p(w * h), g(w * h);
  for (auto& v : p) v = rng.uniform() < 0.5 ? 255 : 0;
  for (auto& v : g) v = rng.uniform() < 0.5 ? 255 : 0;
  g[5] = 9;
  const auto cs = k::serial::confusion(w, h, p.data(), g.data());
  CHECK(cs == k::omp::confusion(w, h, p.data(), g.data()));
  CHECK(cs.invalid == 1);
  CHECK(cs.tp + cs.fp + cs.fn + cs.tn + cs.invalid == w * h);
}

TEST_CASE("thread cap from the environment") {
  const int saved = omp_get_max_threads();
  setenv("CAMPSEG_THREADS", "2", 1);
  CHECK(k::configure_threads_from_env() == 2);
  CHECK(omp_get_max_threads() == 2);
  unsetenv("CAMPSEG_THREADS");
  omp_set_num_threads(saved);
}
