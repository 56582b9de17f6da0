#include "campseg/raster.hpp"

#include <cmath>
#include <cstring>

#include "campseg/error.hpp"

namespace campseg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnsupportedFeature: return "UnsupportedFeature";
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::MissingGeoreference: return "MissingGeoreference";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::RegionTooSmall: return "RegionTooSmall";
    case ErrorCode::RegionInvalid: return "RegionInvalid";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::IndivisibleDimensions: return "IndivisibleDimensions";
    case ErrorCode::IndivisibleChannels: return "IndivisibleChannels";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::GraphMissing: return "GraphMissing";
    case ErrorCode::MissingGrad: return "MissingGrad";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::NonBinaryInput: return "NonBinaryInput";
    case ErrorCode::DegenerateRing: return "DegenerateRing";
  }
  return "Unknown";
}

std::size_t sample_size(SampleType t) {
  switch (t) {
    case SampleType::UInt8: return 1;
    case SampleType::UInt16: return 2;
    case SampleType::Float32: return 4;
  }
  return 0;
}

double full_scale(SampleType t) {
  switch (t) {
    case SampleType::UInt8: return 255.0;
    case SampleType::UInt16: return 65535.0;
    case SampleType::Float32: return 1.0;
  }
  return 1.0;
}

GeoTransform GeoTransform::translated(double col_off, double row_off) const {
  GeoTransform g = *this;
  auto [x, y] = world(col_off, row_off);
  g.origin_x = x;
  g.origin_y = y;
  return g;
}

GeoTransform GeoTransform::refined(int factor) const {
  GeoTransform g = *this;
  g.pixel_width /= factor;
  g.pixel_height /= factor;
  g.row_rotation /= factor;
  g.col_rotation /= factor;
  return g;
}

GeoTransform GeoTransform::coarsened(int factor) const {
  GeoTransform g = *this;
  g.pixel_width *= factor;
  g.pixel_height *= factor;
  g.row_rotation *= factor;
  g.col_rotation *= factor;
  return g;
}

void GeoTransform::validate() const {
  if (pixel_width == 0.0 || pixel_height == 0.0 || !std::isfinite(pixel_width) || !std::isfinite(pixel_height))
    fail(ErrorCode::ConfigInvalid, "geotransform pixel size must be finite and non-zero");
}

RasterGrid::RasterGrid(int width, int height, int bands, SampleType type)
    : width_(width), height_(height), bands_(bands) {
  if (width < 1 || height < 1 || bands < 1 || bands > 4)
    fail(ErrorCode::ShapeMismatch, "raster dimensions out of range");
  const std::size_t n = static_cast<std::size_t>(width) * height * bands;
  switch (type) {
    case SampleType::UInt8: data_ = std::vector<std::uint8_t>(n, 0); break;
    case SampleType::UInt16: data_ = std::vector<std::uint16_t>(n, 0); break;
    case SampleType::Float32: data_ = std::vector<float>(n, 0.0f); break;
  }
}

SampleType RasterGrid::sample_type() const {
  switch (data_.index()) {
    case 0: return SampleType::UInt8;
    case 1: return SampleType::UInt16;
    default: return SampleType::Float32;
  }
}

std::size_t RasterGrid::sample_count() const {
  return std::visit([](const auto& v) { return v.size(); }, data_);
}

double RasterGrid::value(int row, int col, int band) const {
  const std::size_t i = index(row, col, band);
  return std::visit([i](const auto& v) { return static_cast<double>(v[i]); }, data_);
}

void RasterGrid::set_value(int row, int col, int band, double v) {
  const std::size_t i = index(row, col, band);
  std::visit(
      [i, v](auto& vec) {
        using T = typename std::decay_t<decltype(vec)>::value_type;
        vec[i] = static_cast<T>(v);
      },
      data_);
}

std::span<const std::byte> RasterGrid::bytes() const {
  return std::visit([](const auto& v) { return std::as_bytes(std::span(v)); }, data_);
}

RasterGrid RasterGrid::crop(int col_off, int row_off, int width, int height) const {
  if (col_off < 0 || row_off < 0 || width < 1 || height < 1 || col_off + width > width_ ||
      row_off + height > height_)
    fail(ErrorCode::RegionInvalid, "crop window outside raster");
  RasterGrid out(width, height, bands_, sample_type());
  std::visit(
      [&](auto& dst) {
        using T = typename std::decay_t<decltype(dst)>::value_type;
        const auto& src = std::get<std::vector<T>>(data_);
        const std::size_t row_len = static_cast<std::size_t>(width) * bands_;
        for (int r = 0; r < height; ++r) {
          const T* s = src.data() + index(row_off + r, col_off, 0);
          std::memcpy(dst.data() + r * row_len, s, row_len * sizeof(T));
        }
      },
      out.data_);
  return out;
}

void RasterGrid::validate() const {
  if (width_ < 1 || height_ < 1) fail(ErrorCode::ShapeMismatch, "raster must be at least 1x1");
  if (bands_ < 1 || bands_ > 4) fail(ErrorCode::ShapeMismatch, "raster band count must be 1-4");
  if (sample_count() != static_cast<std::size_t>(width_) * height_ * bands_)
    fail(ErrorCode::ShapeMismatch, "sample array length does not match width*height*bands");
}

bool identical(const RasterGrid& a, const RasterGrid& b) {
  if (a.width() != b.width() || a.height() != b.height() || a.bands() != b.bands() ||
      a.sample_type() != b.sample_type())
    return false;
  auto x = a.bytes();
  auto y = b.bytes();
  return x.size() == y.size() && std::memcmp(x.data(), y.data(), x.size()) == 0;
}

}  // namespace campseg
