#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "campseg/raster.hpp"

namespace campseg {

struct ShapeMix {
  double rectangle = 0.6;
  double circle = 0.2;
  double l_shape = 0.2;
};

struct SceneConfig {
  int width = 512;
  int height = 512;
  int dwelling_count = 120;
  int dwelling_size_min = 6;
  int dwelling_size_max = 14;
  ShapeMix shape_mix;
  double background_texture_scale = 24.0;
  /// Fraction of dwellings partly covered by a vegetation-like blob.
  double occluder_fraction = 0.1;
  /// Fraction of dwellings whose roof colour is drawn from the background.
  double camouflage_fraction = 0.15;
  double noise_sigma = 4.0;
  std::uint64_t seed = 1;

  double origin_x = 500000.0;
  double origin_y = 1000000.0;
  double pixel_size = 0.5;
  std::optional<std::string> crs_text;

  void validate() const;
};

struct Scene {
  RasterGrid image;  // 3-band uint8
  RasterGrid mask;   // 1-band uint8, 0 or 255
  GeoTransform geo;
  int placed = 0;    // dwellings actually placed after overlap rejection
};

Scene generate_scene(const SceneConfig& cfg);

/// Expected foreground fraction before occlusion, assuming every dwelling is placed.
double expected_foreground_fraction(const SceneConfig& cfg);

/// Box-average downsample, rounded to the nearest level for integer samples.
RasterGrid degrade(const RasterGrid& image, int factor);

}  // namespace campseg
