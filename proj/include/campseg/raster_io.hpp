#pragma once

#include <filesystem>
#include <optional>
#include <utility>

#include "campseg/raster.hpp"

namespace campseg {

enum class ByteOrder { Little, Big };
enum class TiffCompression { None, Deflate };

struct TiffWriteOptions {
  ByteOrder byte_order = ByteOrder::Little;
  TiffCompression compression = TiffCompression::None;
  /// 0 writes strips; otherwise square tiles of this size (multiple of 16).
  int tile_size = 0;
  /// 0 picks roughly 64 KiB strips.
  int rows_per_strip = 0;
};

struct GeoRaster {
  RasterGrid grid;
  GeoTransform geo;
};

/// Reads the supported GeoTIFF subset: classic TIFF ("II" or "MM"), strips or
/// tiles, no compression or Deflate, chunky planar layout, 8/16-bit unsigned
/// or 32-bit float samples. Georeferencing comes from ModelPixelScale +
/// ModelTiepoint, ModelTransformation, or a sidecar world file.
GeoRaster read_geotiff(const std::filesystem::path& path);
/// As above, but uses `fallback` instead of failing with MissingGeoreference.
GeoRaster read_geotiff(const std::filesystem::path& path, const GeoTransform& fallback);

void write_geotiff(const RasterGrid& grid, const GeoTransform& gt, const std::filesystem::path& path,
                   const TiffWriteOptions& options = {});

/// World files reference pixel centres; the returned transform is corner-based.
GeoTransform read_world_file(const std::filesystem::path& path);
void write_world_file(const GeoTransform& gt, const std::filesystem::path& path);

/// First existing sidecar among .tfw, .tifw, .wld next to `raster_path`.
std::optional<std::filesystem::path> find_world_file(const std::filesystem::path& raster_path);

}  // namespace campseg
