#pragma once

// Data-parallel inner loops. Every kernel exists twice: `serial::` is the
// reference kept for tests, `omp::` distributes the same per-row body over
// OpenMP threads. Rows never share accumulators, so both produce identical
// bits for any thread count.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <type_traits>
#include <vector>

namespace campseg::kernels {

struct ConfusionTally {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0, invalid = 0;
  ConfusionTally& operator+=(const ConfusionTally& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    invalid += o.invalid;
    return *this;
  }
  friend bool operator==(const ConfusionTally&, const ConfusionTally&) = default;
};

namespace detail {

// C[i, :] (+)= A[i, :] * B with double accumulation.
template <typename T>
void gemm_row(std::size_t i, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
                     bool accumulate, double* acc) {
  std::fill(acc, acc + n, 0.0);
  const T* arow = a + i * k;
  for (std::size_t p = 0; p < k; ++p) {
    const double av = arow[p];
    if (av == 0.0) continue;
    const T* brow = b + p * n;
    for (std::size_t j = 0; j < n; ++j) acc[j] += av * static_cast<double>(brow[j]);
  }
  T* crow = c + i * n;
  if (accumulate) {
    for (std::size_t j = 0; j < n; ++j) crow[j] = static_cast<T>(static_cast<double>(crow[j]) + acc[j]);
  } else {
    for (std::size_t j = 0; j < n; ++j) crow[j] = static_cast<T>(acc[j]);
  }
}

template <typename T>
void transpose_row(std::size_t r, std::size_t rows, std::size_t cols, const T* src, T* dst) {
  for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

// One row of the [C*k*k, H*W] patch matrix for a stride-1 convolution.
template <typename T>
void im2col_row(std::size_t row, std::size_t h, std::size_t w, std::size_t ksize, std::ptrdiff_t pad,
                       const T* x, T* cols) {
  const std::size_t c = row / (ksize * ksize);
  const std::ptrdiff_t ky = static_cast<std::ptrdiff_t>((row / ksize) % ksize) - pad;
  const std::ptrdiff_t kx = static_cast<std::ptrdiff_t>(row % ksize) - pad;
  T* out = cols + row * h * w;
  const T* plane = x + c * h * w;
  for (std::size_t y = 0; y < h; ++y) {
    const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + ky;
    T* o = out + y * w;
    if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) {
      std::fill(o, o + w, T(0));
      continue;
    }
    const T* srow = plane + sy * w;
    for (std::size_t xx = 0; xx < w; ++xx) {
      const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx) + kx;
      o[xx] = (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) ? T(0) : srow[sx];
    }
  }
}

// Gradient scatter for one input channel: sums the k*k patch rows that read it.
template <typename T>
void col2im_channel(std::size_t c, std::size_t h, std::size_t w, std::size_t ksize, std::ptrdiff_t pad,
                           const T* cols, T* dx) {
  T* plane = dx + c * h * w;
  for (std::size_t kk = 0; kk < ksize * ksize; ++kk) {
    const std::ptrdiff_t ky = static_cast<std::ptrdiff_t>(kk / ksize) - pad;
    const std::ptrdiff_t kx = static_cast<std::ptrdiff_t>(kk % ksize) - pad;
    const T* src = cols + (c * ksize * ksize + kk) * h * w;
    for (std::size_t y = 0; y < h; ++y) {
      const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + ky;
      if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
      for (std::size_t xx = 0; xx < w; ++xx) {
        const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx) + kx;
        if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
        plane[sy * w + sx] += src[y * w + xx];
      }
    }
  }
}

inline float bilinear_source(std::size_t d, int factor, std::size_t len, std::size_t& i0, std::size_t& i1) {
  float s = (static_cast<float>(d) + 0.5f) / static_cast<float>(factor) - 0.5f;
  s = std::clamp(s, 0.0f, static_cast<float>(len - 1));
  i0 = static_cast<std::size_t>(std::floor(s));
  i1 = std::min(i0 + 1, len - 1);
  return s - static_cast<float>(i0);
}

template <typename T>
T store_sample(float v) {
  if constexpr (std::is_floating_point_v<T>) {
    return static_cast<T>(v);
  } else {
    const float hi = static_cast<float>(std::numeric_limits<T>::max());
    return static_cast<T>(std::clamp(std::round(v), 0.0f, hi));
  }
}

template <typename T>
void bilinear_row(std::size_t r, const T* src, std::size_t w, std::size_t h, std::size_t bands, int factor, T* dst) {
  std::size_t y0, y1;
  const float ty = bilinear_source(r, factor, h, y0, y1);
  const std::size_t ow = w * factor;
  T* out = dst + r * ow * bands;
  for (std::size_t c = 0; c < ow; ++c) {
    std::size_t x0, x1;
    const float tx = bilinear_source(c, factor, w, x0, x1);
    for (std::size_t b = 0; b < bands; ++b) {
      const float p00 = static_cast<float>(src[(y0 * w + x0) * bands + b]);
      const float p01 = static_cast<float>(src[(y0 * w + x1) * bands + b]);
      const float p10 = static_cast<float>(src[(y1 * w + x0) * bands + b]);
      const float p11 = static_cast<float>(src[(y1 * w + x1) * bands + b]);
      const float top = p00 + (p01 - p00) * tx;
      const float bottom = p10 + (p11 - p10) * tx;
      out[c * bands + b] = store_sample<T>(top + (bottom - top) * ty);
    }
  }
}

template <typename T>
void nearest_row(std::size_t r, const T* src, std::size_t w, std::size_t bands, int factor, T* dst) {
  const std::size_t ow = w * factor;
  const T* srow = src + (r / factor) * w * bands;
  T* out = dst + r * ow * bands;
  for (std::size_t c = 0; c < ow; ++c)
    for (std::size_t b = 0; b < bands; ++b) out[c * bands + b] = srow[(c / factor) * bands + b];
}

template <typename T>
void box_row(std::size_t r, const T* src, std::size_t w, std::size_t bands, int factor, T* dst) {
  const std::size_t ow = w / factor;
  const double n = static_cast<double>(factor) * factor;
  for (std::size_t c = 0; c < ow; ++c) {
    for (std::size_t b = 0; b < bands; ++b) {
      double sum = 0.0;
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx) sum += static_cast<double>(src[((r * factor + dy) * w + c * factor + dx) * bands + b]);
      const double mean = sum / n;
      if constexpr (std::is_floating_point_v<T>)
        dst[(r * ow + c) * bands + b] = static_cast<T>(mean);
      else
        dst[(r * ow + c) * bands + b] = static_cast<T>(std::round(mean));
    }
  }
}

inline ConfusionTally confusion_row(std::size_t r, std::size_t w, const std::uint8_t* pred, const std::uint8_t* truth) {
  ConfusionTally t;
  for (std::size_t c = 0; c < w; ++c) {
    const std::uint8_t p = pred[r * w + c];
    const std::uint8_t g = truth[r * w + c];
    if ((p != 0 && p != 255) || (g != 0 && g != 255)) {
      ++t.invalid;
      continue;
    }
    if (p && g) ++t.tp;
    else if (p) ++t.fp;
    else if (g) ++t.fn;
    else ++t.tn;
  }
  return t;
}

}  // namespace detail

// The two namespaces below share every per-row body above.
#define CAMPSEG_DEFINE_KERNELS(NS, PRAGMA)                                                                           \
  namespace NS {                                                                                                     \
  /** C[m,n] = A[m,k] * B[k,n] (or += when accumulate). */                                                           \
  template <typename T>                                                                                              \
  void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,                               \
                   bool accumulate = false) {                                                                        \
    PRAGMA                                                                                                           \
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {                                            \
      thread_local std::vector<double> acc;                                                                          \
      if (acc.size() < n) acc.resize(n);                                                                             \
      detail::gemm_row(static_cast<std::size_t>(i), n, k, a, b, c, accumulate, acc.data());                          \
    }                                                                                                                \
  }                                                                                                                  \
  template <typename T>                                                                                              \
  void transpose(std::size_t rows, std::size_t cols, const T* src, T* dst) {                                         \
    PRAGMA                                                                                                           \
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r)                                           \
      detail::transpose_row(static_cast<std::size_t>(r), rows, cols, src, dst);                                      \
  }                                                                                                                  \
  template <typename T>                                                                                              \
  void im2col(std::size_t channels, std::size_t h, std::size_t w, std::size_t ksize, std::ptrdiff_t pad,             \
                     const T* x, T* cols) {                                                                          \
    PRAGMA                                                                                                           \
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(channels * ksize * ksize); ++r)                       \
      detail::im2col_row(static_cast<std::size_t>(r), h, w, ksize, pad, x, cols);                                    \
  }                                                                                                                  \
  /** dx += col2im(cols); dx must be zero-initialised by the caller for a fresh gradient. */                         \
  template <typename T>                                                                                              \
  void col2im(std::size_t channels, std::size_t h, std::size_t w, std::size_t ksize, std::ptrdiff_t pad,             \
                     const T* cols, T* dx) {                                                                         \
    PRAGMA                                                                                                           \
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(channels); ++c)                                       \
      detail::col2im_channel(static_cast<std::size_t>(c), h, w, ksize, pad, cols, dx);                               \
  }                                                                                                                  \
  template <typename T>                                                                                              \
  void upscale_bilinear(const T* src, std::size_t w, std::size_t h, std::size_t bands, int factor, T* dst) {         \
    PRAGMA                                                                                                           \
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(h * factor); ++r)                                     \
      detail::bilinear_row(static_cast<std::size_t>(r), src, w, h, bands, factor, dst);                              \
  }                                                                                                                  \
  template <typename T>                                                                                              \
  void upscale_nearest(const T* src, std::size_t w, std::size_t h, std::size_t bands, int factor, T* dst) {          \
    PRAGMA                                                                                                           \
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(h * factor); ++r)                                     \
      detail::nearest_row(static_cast<std::size_t>(r), src, w, bands, factor, dst);                                  \
  }                                                                                                                  \
  template <typename T>                                                                                              \
  void box_downsample(const T* src, std::size_t w, std::size_t h, std::size_t bands, int factor, T* dst) {           \
    PRAGMA                                                                                                           \
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(h / factor); ++r)                                     \
      detail::box_row(static_cast<std::size_t>(r), src, w, bands, factor, dst);                                      \
  }                                                                                                                  \
  inline ConfusionTally confusion(std::size_t w, std::size_t h, const std::uint8_t* pred,                            \
                                  const std::uint8_t* truth) {                                                       \
    std::vector<ConfusionTally> rows(h);                                                                             \
    PRAGMA                                                                                                           \
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(h); ++r)                                              \
      rows[r] = detail::confusion_row(static_cast<std::size_t>(r), w, pred, truth);                                  \
    ConfusionTally total;                                                                                            \
    for (const auto& t : rows) total += t;                                                                           \
    return total;                                                                                                    \
  }                                                                                                                  \
  }

#define CAMPSEG_NO_PRAGMA
#define CAMPSEG_OMP_FOR _Pragma("omp parallel for schedule(static)")

CAMPSEG_DEFINE_KERNELS(serial, CAMPSEG_NO_PRAGMA)
CAMPSEG_DEFINE_KERNELS(omp, CAMPSEG_OMP_FOR)

#undef CAMPSEG_DEFINE_KERNELS
#undef CAMPSEG_NO_PRAGMA
#undef CAMPSEG_OMP_FOR

using namespace omp;

/// Applies CAMPSEG_THREADS (if set) as the OpenMP thread cap; returns the cap in effect.
int configure_threads_from_env();

}  // namespace campseg::kernels
