#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <unistd.h>

#include "doctest.h"

#include "campseg/error.hpp"
#include "campseg/random.hpp"
#include "campseg/raster.hpp"

namespace campseg::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("campseg_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline RasterGrid random_grid(Rng& rng, int w, int h, int bands, SampleType type) {
  RasterGrid g(w, h, bands, type);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int b = 0; b < bands; ++b) {
        double v = 0.0;
        switch (type) {
          case SampleType::UInt8: v = static_cast<double>(rng.uniform_int(0, 255)); break;
          case SampleType::UInt16: v = static_cast<double>(rng.uniform_int(0, 65535)); break;
          case SampleType::Float32: v = static_cast<float>(rng.uniform(-1e3, 1e3)); break;
        }
        g.set_value(r, c, b, v);
      }
  return g;
}

/// Runs f and returns the code of the campseg::Error it throws.
inline ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected campseg::Error");
  return ErrorCode::IoFailure;
}

/// Single-band {0, 255} mask with roughly `density` foreground.
inline RasterGrid random_mask(Rng& rng, int w, int h, double density) {
  RasterGrid m(w, h, 1, SampleType::UInt8);
  for (auto& v : m.samples<std::uint8_t>()) v = rng.uniform() < density ? 255 : 0;
  return m;
}

}  // namespace campseg::testing
