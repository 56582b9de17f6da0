#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>

#include "campseg/shapefile.hpp"
#include "campseg/vectorize.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"
#include "support/shapefile_reader.hpp"

using namespace campseg;
using campseg::testing::code_of;
using campseg::testing::TempDir;

namespace {

GeoTransform north_up(double x0, double y0, double px) { return {x0, y0, px, -px, 0.0, 0.0, std::nullopt}; }

RasterGrid mask_from(int w, int h, std::initializer_list<std::pair<int, int>> fg) {
  RasterGrid m(w, h, 1, SampleType::UInt8);
  for (auto [r, c] : fg) m.set_value(r, c, 0, 255);
  return m;
}

double point_segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y, len2 = dx * dx + dy * dy;
  double t = len2 == 0 ? 0 : ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - a.x - t * dx, p.y - a.y - t * dy);
}

}  // namespace

TEST_CASE("single pixel traces to a clockwise unit square") {
  const auto f = trace_polygons(mask_from(1, 1, {{0, 0}}), north_up(100, 200, 0.5));
  REQUIRE(f.size() == 1);
  const Ring expect{{100, 200}, {100.5, 200}, {100.5, 199.5}, {100, 199.5}, {100, 200}};
  CHECK(f[0].outer == expect);
  CHECK(f[0].holes.empty());
  CHECK(f[0].id == 1);
  CHECK(f[0].area == 0.25);
  CHECK(f[0].pixel_count == 1);
  CHECK(signed_area(f[0].outer) == -0.25);
}

TEST_CASE("ring of eight pixels has one counter-clockwise hole") {
  RasterGrid m(5, 5, 1, SampleType::UInt8);
  for (int r = 1; r <= 3; ++r)
    for (int c = 1; c <= 3; ++c)
      if (r != 2 || c != 2) m.set_value(r, c, 0, 255);
  const auto f = trace_polygons(m, north_up(0, 0, 1));
  REQUIRE(f.size() == 1);
  REQUIRE(f[0].holes.size() == 1);
  CHECK(f[0].pixel_count == 8);
  CHECK(f[0].area == 8.0);
  CHECK(signed_area(f[0].outer) == -9.0);
  CHECK(signed_area(f[0].holes[0]) == 1.0);
  CHECK(f[0].outer.size() == 5);
}

TEST_CASE("empty mask gives no features; diagonal pinch splits") {
  CHECK(trace_polygons(RasterGrid(6, 4, 1, SampleType::UInt8), north_up(0, 0, 1)).empty());
  const auto f = trace_polygons(mask_from(2, 2, {{0, 0}, {1, 1}}), north_up(0, 0, 1));
  REQUIRE(f.size() == 2);
  CHECK(f[0].id == 1);
  CHECK(f[1].id == 2);
  CHECK(f[0].pixel_count == 1);
  CHECK(f[1].outer.front() == Point{1, -1});
}

TEST_CASE("trace rejects non-binary and multi-band masks") {
  auto m = mask_from(3, 3, {{1, 1}});
  m.set_value(0, 0, 0, 3);
  CHECK(code_of([&] { trace_polygons(m, north_up(0, 0, 1)); }) == ErrorCode::NonBinaryInput);
  CHECK(code_of([&] { trace_polygons(RasterGrid(3, 3, 2, SampleType::UInt8), north_up(0, 0, 1)); }) ==
        ErrorCode::ShapeMismatch);
}

TEST_CASE("random masks: pixel and area conservation, ring orientation, closed rings") {
  Rng rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const int w = static_cast<int>(rng.uniform_int(1, 30)), h = static_cast<int>(rng.uniform_int(1, 30));
    const auto m = campseg::testing::random_mask(rng, w, h, rng.uniform(0.1, 0.9));
    const double px = 0.25 * static_cast<double>(rng.uniform_int(1, 8));
    const auto feats = trace_polygons(m, north_up(500, 800, px));
    std::int64_t fg = 0;
    for (auto v : m.samples<std::uint8_t>()) fg += v != 0;
    std::int64_t counted = 0;
    double area = 0;
    for (std::size_t i = 0; i < feats.size(); ++i) {
      const auto& f = feats[i];
      REQUIRE(f.id == static_cast<std::int64_t>(i + 1));
      REQUIRE(f.outer.front() == f.outer.back());
      REQUIRE(signed_area(f.outer) < 0);
      double a = -signed_area(f.outer);
      for (const auto& hole : f.holes) {
        REQUIRE(hole.front() == hole.back());
        REQUIRE(signed_area(hole) > 0);
        a -= signed_area(hole);
      }
      REQUIRE(std::abs(a - f.area) <= 1e-9 * (1 + a));
      REQUIRE(std::abs(f.area - f.pixel_count * px * px) <= 1e-9 * (1 + f.area));
      counted += f.pixel_count;
      area += f.area;
    }
    CAPTURE(trial);
    CHECK(counted == fg);
    CHECK(std::abs(area - fg * px * px) <= 1e-9 * (1 + area));
  }
}

TEST_CASE("simplify: identity at zero tolerance, staircase bound, degenerate flag") {
  Rng rng(12);
  const auto m = campseg::testing::random_mask(rng, 24, 24, 0.7);
  const auto feats = trace_polygons(m, north_up(0, 0, 1));
  REQUIRE_FALSE(feats.empty());
  for (const auto& f : feats) {
    const auto same = simplify(f, 0.0);
    CHECK_FALSE(same.degenerate);
    CHECK(same.feature.outer == f.outer);
    CHECK(same.feature.holes.size() == f.holes.size());
    CHECK(same.feature.area == f.area);

    for (double tol : {0.5, 1.0, 2.0}) {
      const auto s = simplify(f, tol);
      CHECK(s.feature.pixel_count == f.pixel_count);
      if (s.degenerate) {
        CHECK(s.feature.outer == f.outer);
        continue;
      }
      const auto& ring = s.feature.outer;
      REQUIRE(ring.size() >= 4);
      CHECK(ring.front() == f.outer.front());
      CHECK(ring.size() <= f.outer.size());
      // Every dropped vertex lies within tolerance of the simplified ring.
      for (const auto& p : f.outer) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i + 1 < ring.size(); ++i) best = std::min(best, point_segment_distance(p, ring[i], ring[i + 1]));
        REQUIRE(best <= tol + 1e-12);
      }
      CHECK(std::abs(s.feature.area - (-signed_area(ring) - [&] {
                       double h = 0;
                       for (const auto& r : s.feature.holes) h += signed_area(r);
                       return h;
                     }())) <= 1e-9);
    }
  }

  const auto one = trace_polygons(mask_from(1, 1, {{0, 0}}), north_up(0, 0, 1));
  const auto d = simplify(one[0], 5.0);
  CHECK(d.degenerate);
  CHECK(d.feature.outer == one[0].outer);
  CHECK(code_of([&] { simplify(one[0], -1.0); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("simplify drops collinear vertices of a hand-made ring") {
  PolygonFeature f;
  f.outer = {{0, 0}, {1, 0}, {2, 0}, {2, -1}, {2, -2}, {0, -2}, {0, -1}, {0, 0}};
  f.pixel_count = 4;
  const auto s = simplify(f, 1e-9);
  CHECK_FALSE(s.degenerate);
  const Ring expect{{0, 0}, {2, 0}, {2, -2}, {0, -2}, {0, 0}};
  CHECK(s.feature.outer == expect);
  CHECK(s.feature.area == 4.0);
}

TEST_CASE("shapefile headers, index and attribute table") {
  TempDir dir("shp");
  RasterGrid m(6, 5, 1, SampleType::UInt8);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      if (r != 1 || c != 1) m.set_value(r, c, 0, 255);
  m.set_value(4, 5, 0, 255);
  const auto feats = trace_polygons(m, north_up(10, 20, 2));
  REQUIRE(feats.size() == 2);
  write_shapefile(feats, std::string("EPSG:32646"), dir / "out");
  const auto s = campseg::testing::read_shapefile(dir / "out");

  CHECK(s.shp.file_code == 9994);
  CHECK(s.shp.version == 1000);
  CHECK(s.shp.shape_type == 5);
  CHECK(s.shx.file_code == 9994);
  CHECK(s.shx.shape_type == 5);
  CHECK(s.shx.length_words == 50 + 4 * 2);
  CHECK(s.shp.xmin == 10);
  CHECK(s.shp.xmax == 22);
  CHECK(s.shp.ymin == 10);
  CHECK(s.shp.ymax == 20);

  REQUIRE(s.records.size() == 2);
  CHECK(s.records[0].number == 1);
  REQUIRE(s.records[0].parts.size() == 2);
  CHECK(s.records[0].parts[0] == feats[0].outer);
  CHECK(s.records[0].parts[1] == feats[0].holes[0]);
  CHECK(s.records[1].parts[0] == feats[1].outer);
  CHECK(s.index[0].first == 50);

  REQUIRE(s.fields.size() == 3);
  CHECK(s.fields[0].name == "id");
  CHECK(s.fields[0].type == 'N');
  CHECK(s.fields[0].width == 10);
  CHECK(s.fields[1].name == "area");
  CHECK(s.fields[1].width == 19);
  CHECK(s.fields[1].decimals == 6);
  CHECK(s.fields[2].name == "px_count");
  REQUIRE(s.rows.size() == 2);
  CHECK(s.rows[0] == std::vector<std::string>{"1", "32.000000", "8"});
  CHECK(s.rows[1] == std::vector<std::string>{"2", "4.000000", "1"});
  CHECK(s.dbf_date == std::string("\x64\x01\x01", 3));
  CHECK(campseg::testing::slurp(dir / "out.prj") == "EPSG:32646");

  write_shapefile(feats, std::nullopt, dir / "out");
  CHECK_FALSE(std::filesystem::exists(dir / "out.prj"));
}

TEST_CASE("zero features give valid empty files") {
  TempDir dir("shp0");
  write_shapefile({}, std::nullopt, dir / "none");
  const auto s = campseg::testing::read_shapefile(dir / "none");
  CHECK(s.shp.length_words == 50);
  CHECK(s.shx.length_words == 50);
  CHECK(s.shp.shape_type == 5);
  CHECK(s.records.empty());
  CHECK(s.rows.empty());
  CHECK(s.fields.size() == 3);
}

TEST_CASE("random masks round-trip through the shapefile") {
  TempDir dir("shpr");
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = campseg::testing::random_mask(rng, 20, 16, 0.5);
    const auto feats = trace_polygons(m, north_up(rng.uniform(-1e5, 1e5), rng.uniform(-1e5, 1e5), 0.3));
    write_shapefile(feats, std::nullopt, dir / "r");
    const auto s = campseg::testing::read_shapefile(dir / "r");
    REQUIRE(s.records.size() == feats.size());
    for (std::size_t i = 0; i < feats.size(); ++i) {
      REQUIRE(s.records[i].parts.size() == 1 + feats[i].holes.size());
      CHECK(s.records[i].parts[0] == feats[i].outer);
      for (std::size_t h = 0; h < feats[i].holes.size(); ++h) CHECK(s.records[i].parts[h + 1] == feats[i].holes[h]);
      CHECK(std::stoll(s.rows[i][0]) == feats[i].id);
      CHECK(std::stoll(s.rows[i][2]) == feats[i].pixel_count);
      CHECK(std::abs(std::stod(s.rows[i][1]) - feats[i].area) <= 5e-7);
    }
  }
}
