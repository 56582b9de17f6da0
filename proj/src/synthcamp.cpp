#include "campseg/synthcamp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "campseg/error.hpp"
#include "campseg/kernels.hpp"
#include "campseg/random.hpp"

namespace campseg {

void SceneConfig::validate() const {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (width < 1 || height < 1) fail(ErrorCode::ConfigInvalid, "scene dimensions must be positive");
  if (dwelling_count < 0) fail(ErrorCode::ConfigInvalid, "dwelling_count must be >= 0");
  if (dwelling_size_min < 3 || dwelling_size_max < dwelling_size_min)
    fail(ErrorCode::ConfigInvalid, "dwelling size range must satisfy 3 <= min <= max");
  if (!unit(shape_mix.rectangle) || !unit(shape_mix.circle) || !unit(shape_mix.l_shape) ||
      std::abs(shape_mix.rectangle + shape_mix.circle + shape_mix.l_shape - 1.0) > 1e-9)
    fail(ErrorCode::ConfigInvalid, "shape mix fractions must lie in [0, 1] and sum to 1");
  if (!unit(occluder_fraction) || !unit(camouflage_fraction))
    fail(ErrorCode::ConfigInvalid, "occluder and camouflage fractions must lie in [0, 1]");
  if (!(background_texture_scale >= 1.0)) fail(ErrorCode::ConfigInvalid, "background_texture_scale must be >= 1");
  if (!(noise_sigma >= 0.0)) fail(ErrorCode::ConfigInvalid, "noise_sigma must be >= 0");
  if (!(pixel_size > 0.0)) fail(ErrorCode::ConfigInvalid, "pixel_size must be > 0");
}

namespace {

enum class Shape { Rectangle, Circle, LShape };

struct Dwelling {
  Shape shape;
  int x0, y0, w, h;  // bounding box
  int notch;         // L-shape: which corner is cut (0..3)
};

bool inside(const Dwelling& d, int x, int y) {
  const int lx = x - d.x0, ly = y - d.y0;
  if (lx < 0 || ly < 0 || lx >= d.w || ly >= d.h) return false;
  switch (d.shape) {
    case Shape::Rectangle: return true;
    case Shape::Circle: {
      const double cx = (d.w - 1) / 2.0, cy = (d.h - 1) / 2.0, r = d.w / 2.0;
      return (lx - cx) * (lx - cx) + (ly - cy) * (ly - cy) <= r * r;
    }
    case Shape::LShape: {
      const bool right = lx >= d.w / 2, bottom = ly >= d.h / 2;
      return !(right == ((d.notch & 1) != 0) && bottom == ((d.notch & 2) != 0));
    }
  }
  return false;
}

// Value noise: random lattice at `scale` spacing, bilinearly interpolated, two octaves.
std::vector<double> smooth_field(int w, int h, double scale, Rng& rng) {
  std::vector<double> field(static_cast<std::size_t>(w) * h, 0.0);
  double amp = 1.0, total = 0.0;
  for (int octave = 0; octave < 2; ++octave) {
    const double s = scale / (1 << octave);
    const int gw = static_cast<int>(std::ceil(w / s)) + 2, gh = static_cast<int>(std::ceil(h / s)) + 2;
    std::vector<double> lattice(static_cast<std::size_t>(gw) * gh);
    for (auto& v : lattice) v = rng.uniform(-1.0, 1.0);
    for (int y = 0; y < h; ++y) {
      const double fy = y / s;
      const int iy = static_cast<int>(fy);
      const double ty = fy - iy;
      for (int x = 0; x < w; ++x) {
        const double fx = x / s;
        const int ix = static_cast<int>(fx);
        const double tx = fx - ix;
        auto L = [&](int a, int b) { return lattice[static_cast<std::size_t>(b) * gw + a]; };
        const double top = L(ix, iy) * (1 - tx) + L(ix + 1, iy) * tx;
        const double bot = L(ix, iy + 1) * (1 - tx) + L(ix + 1, iy + 1) * tx;
        field[static_cast<std::size_t>(y) * w + x] += amp * (top * (1 - ty) + bot * ty);
      }
    }
    total += amp;
    amp *= 0.5;
  }
  for (auto& v : field) v /= total;
  return field;
}

constexpr std::array<double, 3> kSoil{150.0, 128.0, 100.0};
constexpr std::array<double, 3> kSoilSwing{45.0, 40.0, 35.0};
constexpr std::array<std::array<double, 3>, 4> kRoofs{{{225, 225, 220}, {70, 110, 190}, {190, 190, 200}, {200, 120, 70}}};

}  // namespace

Scene generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  Rng layout = rng.fork(1), paint = rng.fork(2), noise = rng.fork(3), texture = rng.fork(4);
  const int w = cfg.width, h = cfg.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;

  const auto field = smooth_field(w, h, cfg.background_texture_scale, texture);
  std::vector<double> rgb(n * 3);
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) rgb[i * 3 + c] = kSoil[c] + kSoilSwing[c] * field[i];

  // Placement with overlap rejection; boxes keep a 2-pixel gap to every other box.
  constexpr int kGap = 2;
  std::vector<Dwelling> dwellings;
  std::vector<std::uint8_t> occupied(n, 0);
  const int attempts = std::max(1, cfg.dwelling_count) * 50;
  const double shape_u1 = cfg.shape_mix.rectangle, shape_u2 = shape_u1 + cfg.shape_mix.circle;
  for (int a = 0; a < attempts && static_cast<int>(dwellings.size()) < cfg.dwelling_count; ++a) {
    Dwelling d{};
    const double u = layout.uniform();
    d.shape = u < shape_u1 ? Shape::Rectangle : (u < shape_u2 ? Shape::Circle : Shape::LShape);
    d.w = static_cast<int>(layout.uniform_int(cfg.dwelling_size_min, cfg.dwelling_size_max));
    d.h = d.shape == Shape::Circle ? d.w : static_cast<int>(layout.uniform_int(cfg.dwelling_size_min, cfg.dwelling_size_max));
    d.notch = static_cast<int>(layout.uniform_int(0, 3));
    if (d.w + 2 * kGap > w || d.h + 2 * kGap > h) continue;
    d.x0 = static_cast<int>(layout.uniform_int(kGap, w - d.w - kGap));
    d.y0 = static_cast<int>(layout.uniform_int(kGap, h - d.h - kGap));
    bool clash = false;
    for (int y = d.y0 - kGap; y < d.y0 + d.h + kGap && !clash; ++y)
      for (int x = d.x0 - kGap; x < d.x0 + d.w + kGap; ++x)
        if (occupied[static_cast<std::size_t>(y) * w + x]) {
          clash = true;
          break;
        }
    if (clash) continue;
    for (int y = d.y0; y < d.y0 + d.h; ++y)
      for (int x = d.x0; x < d.x0 + d.w; ++x) occupied[static_cast<std::size_t>(y) * w + x] = 1;
    dwellings.push_back(d);
  }

  std::vector<std::uint8_t> mask(n, 0);
  for (const auto& d : dwellings)
    for (int y = d.y0; y < d.y0 + d.h; ++y)
      for (int x = d.x0; x < d.x0 + d.w; ++x)
        if (inside(d, x, y)) mask[static_cast<std::size_t>(y) * w + x] = 255;

  // Shadows fall down-right onto bare ground.
  for (const auto& d : dwellings) {
    const int off = std::max(1, d.w / 6);
    for (int y = d.y0; y < d.y0 + d.h; ++y)
      for (int x = d.x0; x < d.x0 + d.w; ++x) {
        if (!inside(d, x, y)) continue;
        const int sx = x + off, sy = y + off;
        if (sx >= w || sy >= h) continue;
        const std::size_t i = static_cast<std::size_t>(sy) * w + sx;
        if (mask[i]) continue;
        for (int c = 0; c < 3; ++c) rgb[i * 3 + c] *= 0.55;
      }
  }

  for (const auto& d : dwellings) {
    std::array<double, 3> roof;
    if (paint.uniform() < cfg.camouflage_fraction) {
      const double t = paint.uniform(-0.3, 0.3);
      for (int c = 0; c < 3; ++c) roof[c] = kSoil[c] + kSoilSwing[c] * t + 12.0;
    } else {
      const auto& base = kRoofs[static_cast<std::size_t>(paint.uniform_int(0, kRoofs.size() - 1))];
      const double shade = paint.uniform(-15.0, 15.0);
      for (int c = 0; c < 3; ++c) roof[c] = base[c] + shade;
    }
    for (int y = d.y0; y < d.y0 + d.h; ++y)
      for (int x = d.x0; x < d.x0 + d.w; ++x) {
        if (!inside(d, x, y)) continue;
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        // A slightly darker rim marks the roof edge.
        const bool rim = !inside(d, x - 1, y) || !inside(d, x + 1, y) || !inside(d, x, y - 1) || !inside(d, x, y + 1);
        for (int c = 0; c < 3; ++c) rgb[i * 3 + c] = roof[c] * (rim ? 0.85 : 1.0);
      }
  }

  // Vegetation blobs hide parts of some dwellings; hidden pixels leave the mask.
  for (const auto& d : dwellings) {
    if (paint.uniform() >= cfg.occluder_fraction) continue;
    const double cx = d.x0 + paint.uniform(0.0, d.w), cy = d.y0 + paint.uniform(0.0, d.h);
    const double r = std::max(2.0, paint.uniform(0.25, 0.5) * std::max(d.w, d.h));
    const double green = paint.uniform(-10.0, 10.0);
    for (int y = std::max(0, static_cast<int>(cy - r)); y <= std::min(h - 1, static_cast<int>(cy + r)); ++y)
      for (int x = std::max(0, static_cast<int>(cx - r)); x <= std::min(w - 1, static_cast<int>(cx + r)); ++x) {
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) > r * r) continue;
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        rgb[i * 3 + 0] = 60 + green;
        rgb[i * 3 + 1] = 95 + green;
        rgb[i * 3 + 2] = 50 + green;
        mask[i] = 0;
      }
  }

  Scene scene;
  scene.image = RasterGrid(w, h, 3, SampleType::UInt8);
  auto px = scene.image.samples<std::uint8_t>();
  for (std::size_t i = 0; i < n * 3; ++i) {
    const double v = rgb[i] + (cfg.noise_sigma > 0 ? noise.normal() * cfg.noise_sigma : 0.0);
    px[i] = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
  }
  scene.mask = RasterGrid::from_samples<std::uint8_t>(w, h, 1, std::move(mask));
  scene.geo = GeoTransform{cfg.origin_x, cfg.origin_y, cfg.pixel_size, -cfg.pixel_size, 0.0, 0.0, cfg.crs_text};
  scene.placed = static_cast<int>(dwellings.size());
  return scene;
}

double expected_foreground_fraction(const SceneConfig& cfg) {
  const double lo = cfg.dwelling_size_min, hi = cfg.dwelling_size_max;
  const double mean = (lo + hi) / 2.0;
  // E[s^2] for s uniform on the integers lo..hi.
  double sq = 0.0;
  for (int s = cfg.dwelling_size_min; s <= cfg.dwelling_size_max; ++s) sq += static_cast<double>(s) * s;
  sq /= (hi - lo + 1.0);
  const double area = cfg.shape_mix.rectangle * mean * mean + cfg.shape_mix.circle * std::numbers::pi * sq / 4.0 +
                      cfg.shape_mix.l_shape * 0.75 * mean * mean;
  return cfg.dwelling_count * area / (static_cast<double>(cfg.width) * cfg.height);
}

RasterGrid degrade(const RasterGrid& image, int factor) {
  if (factor < 2) fail(ErrorCode::IndivisibleDimensions, "degrade factor must be >= 2");
  if (image.width() % factor != 0 || image.height() % factor != 0)
    fail(ErrorCode::IndivisibleDimensions, std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                                               " is not divisible by " + std::to_string(factor));
  RasterGrid out(image.width() / factor, image.height() / factor, image.bands(), image.sample_type());
  std::visit(
      [&](const auto& src) {
        using T = typename std::decay_t<decltype(src)>::value_type;
        kernels::box_downsample<T>(src.data(), image.width(), image.height(), image.bands(), factor,
                                   out.samples<T>().data());
      },
      image.storage());
  return out;
}

}  // namespace campseg
