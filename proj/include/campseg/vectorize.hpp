#pragma once

#include <cstdint>
#include <vector>

#include "campseg/raster.hpp"

namespace campseg {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Closed: front() == back().
using Ring = std::vector<Point>;

struct PolygonFeature {
  Ring outer;               // clockwise, negative shoelace area
  std::vector<Ring> holes;  // counter-clockwise
  std::int64_t id = 0;
  double area = 0.0;  // world units squared, holes subtracted
  std::int64_t pixel_count = 0;
};

/// Shoelace area; positive for counter-clockwise rings in a y-up frame.
double signed_area(const Ring& ring);

/// One feature per 4-connected foreground component of a single-band {0, 255}
/// uint8 mask, ids from 1 in row-major order of each component's first pixel.
/// Rings follow pixel edges exactly, collinear vertices merged, outer rings
/// starting at the top-left corner of the component's first pixel.
/// Background is 8-connected, so diagonal pinches split foreground only.
std::vector<PolygonFeature> trace_polygons(const RasterGrid& mask, const GeoTransform& gt);

struct SimplifyResult {
  PolygonFeature feature;
  bool degenerate = false;  // a ring would fall below 4 vertices; feature left unsimplified
};

/// Douglas-Peucker on every ring with the ring start fixed. Tolerance 0 returns
/// the feature unchanged. Area is recomputed, pixel_count kept.
SimplifyResult simplify(const PolygonFeature& feature, double tolerance);

}  // namespace campseg
