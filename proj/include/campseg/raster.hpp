#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace campseg {

enum class SampleType : std::uint8_t { UInt8, UInt16, Float32 };

std::size_t sample_size(SampleType t);
/// Largest representable intensity: 255, 65535, or 1.0 for float rasters.
double full_scale(SampleType t);

template <typename T>
constexpr SampleType sample_type_of();
template <>
constexpr SampleType sample_type_of<std::uint8_t>() { return SampleType::UInt8; }
template <>
constexpr SampleType sample_type_of<std::uint16_t>() { return SampleType::UInt16; }
template <>
constexpr SampleType sample_type_of<float>() { return SampleType::Float32; }

/// Affine pixel-to-world mapping, corner-origin convention.
///
///   x = origin_x + col * pixel_width + row * col_rotation
///   y = origin_y + col * row_rotation + row * pixel_height
///
/// `row_rotation` and `col_rotation` follow the order of the second and third
/// lines of an ESRI world file.
struct GeoTransform {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double pixel_width = 1.0;
  double pixel_height = -1.0;
  double row_rotation = 0.0;
  double col_rotation = 0.0;
  std::optional<std::string> crs_text;

  static GeoTransform identity() { return GeoTransform{0.0, 0.0, 1.0, 1.0, 0.0, 0.0, std::nullopt}; }

  std::pair<double, double> world(double col, double row) const {
    return {origin_x + col * pixel_width + row * col_rotation,
            origin_y + col * row_rotation + row * pixel_height};
  }

  bool has_rotation() const { return row_rotation != 0.0 || col_rotation != 0.0; }

  /// Transform of the sub-window whose top-left pixel is (col_off, row_off).
  GeoTransform translated(double col_off, double row_off) const;
  /// Transform of the same footprint sampled `factor` times finer.
  GeoTransform refined(int factor) const;
  /// Transform of the same footprint sampled `factor` times coarser.
  GeoTransform coarsened(int factor) const;

  void validate() const;

  friend bool operator==(const GeoTransform&, const GeoTransform&) = default;
};

/// Row-major, band-interleaved raster: sample (row, col, band) lives at
/// index (row * width + col) * bands + band.
class RasterGrid {
 public:
  using Storage = std::variant<std::vector<std::uint8_t>, std::vector<std::uint16_t>, std::vector<float>>;

  RasterGrid() = default;
  RasterGrid(int width, int height, int bands, SampleType type);

  template <typename T>
  static RasterGrid from_samples(int width, int height, int bands, std::vector<T> samples) {
    RasterGrid g;
    g.width_ = width;
    g.height_ = height;
    g.bands_ = bands;
    g.data_ = std::move(samples);
    g.validate();
    return g;
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int bands() const { return bands_; }
  SampleType sample_type() const;
  std::size_t sample_count() const;
  bool empty() const { return width_ == 0; }

  template <typename T>
  std::span<T> samples() {
    return std::get<std::vector<T>>(data_);
  }
  template <typename T>
  std::span<const T> samples() const {
    return std::get<std::vector<T>>(data_);
  }

  template <typename T>
  T& at(int row, int col, int band = 0) {
    return std::get<std::vector<T>>(data_)[index(row, col, band)];
  }
  template <typename T>
  T at(int row, int col, int band = 0) const {
    return std::get<std::vector<T>>(data_)[index(row, col, band)];
  }

  double value(int row, int col, int band = 0) const;
  void set_value(int row, int col, int band, double v);

  std::size_t index(int row, int col, int band) const {
    return (static_cast<std::size_t>(row) * width_ + col) * bands_ + band;
  }

  const Storage& storage() const { return data_; }
  Storage& storage() { return data_; }
  std::span<const std::byte> bytes() const;

  /// Copy of the window [col_off, col_off+width) x [row_off, row_off+height).
  RasterGrid crop(int col_off, int row_off, int width, int height) const;

  void validate() const;

 private:
  int width_ = 0;
  int height_ = 0;
  int bands_ = 0;
  Storage data_;
};

/// Bit-exact comparison of dimensions, sample type and sample bytes.
bool identical(const RasterGrid& a, const RasterGrid& b);

}  // namespace campseg
