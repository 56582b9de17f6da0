#include "campseg/tiler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "campseg/error.hpp"
#include "campseg/random.hpp"
#include "campseg/raster_io.hpp"

namespace campseg {

std::string to_string(RegionRole role) {
  switch (role) {
    case RegionRole::TrainLarge: return "train_large";
    case RegionRole::TrainSmall: return "train_small";
    case RegionRole::Validation: return "validation";
    case RegionRole::Test: return "test";
  }
  return "?";
}

RegionRole parse_region_role(const std::string& text) {
  for (auto r : {RegionRole::TrainLarge, RegionRole::TrainSmall, RegionRole::Validation, RegionRole::Test})
    if (to_string(r) == text) return r;
  fail(ErrorCode::ConfigInvalid, "unknown region role '" + text + "'");
}

void validate_regions(const std::vector<RegionSpec>& regions, int raster_width, int raster_height) {
  for (const auto& r : regions) {
    const auto& w = r.window;
    if (r.name.empty() || r.name.find_first_of(" \t\r\n") != std::string::npos)
      fail(ErrorCode::RegionInvalid, "region name '" + r.name + "' must be non-empty without whitespace");
    if (w.col_off < 0 || w.row_off < 0 || w.width < 1 || w.height < 1 || w.col_off + w.width > raster_width ||
        w.row_off + w.height > raster_height)
      fail(ErrorCode::RegionInvalid, "region '" + r.name + "' lies outside the " + std::to_string(raster_width) + "x" +
                                         std::to_string(raster_height) + " raster");
  }
  for (std::size_t i = 0; i < regions.size(); ++i)
    for (std::size_t j = i + 1; j < regions.size(); ++j)
      if (regions[i].role != regions[j].role && regions[i].window.overlaps(regions[j].window))
        fail(ErrorCode::RegionInvalid,
             "regions '" + regions[i].name + "' and '" + regions[j].name + "' overlap but have different roles");
}

void TileSpec::validate() const {
  if (patch_size < 1) fail(ErrorCode::ConfigInvalid, "patch_size must be >= 1");
  if (stride < 1 || stride > patch_size) fail(ErrorCode::ConfigInvalid, "stride must lie in [1, patch_size]");
}

int default_stride(int patch_size, RegionRole role) {
  const int s = role == RegionRole::Test ? patch_size * 7 / 8 : patch_size / 2;
  return std::max(1, s);
}

std::vector<int> enumerate_windows(int region_len, const TileSpec& spec) {
  spec.validate();
  if (region_len < spec.patch_size)
    fail(ErrorCode::RegionTooSmall,
         "region length " + std::to_string(region_len) + " < patch size " + std::to_string(spec.patch_size));
  const int n = (region_len - spec.patch_size) / spec.stride + 1;
  std::vector<int> out(n);
  for (int i = 0; i < n; ++i) out[i] = i * spec.stride;
  if (spec.edge == EdgePolicy::Snap && out.back() + spec.patch_size < region_len)
    out.push_back(region_len - spec.patch_size);
  return out;
}

std::vector<PatchRecord> extract_patches(const RasterGrid& grid, const GeoTransform& gt, const RegionSpec& region,
                                         const TileSpec& spec, const std::optional<RasterGrid>& mask) {
  validate_regions({region}, grid.width(), grid.height());
  if (mask && (mask->width() != grid.width() || mask->height() != grid.height()))
    fail(ErrorCode::ShapeMismatch, "mask is not congruent with the image");
  const auto cols = enumerate_windows(region.window.width, spec);
  const auto rows = enumerate_windows(region.window.height, spec);
  std::vector<PatchRecord> out;
  out.reserve(rows.size() * cols.size());
  for (int r : rows) {
    for (int c : cols) {
      PatchRecord p;
      p.parent_region = region.name;
      p.window = {region.window.col_off + c, region.window.row_off + r, spec.patch_size, spec.patch_size};
      p.image = grid.crop(p.window.col_off, p.window.row_off, spec.patch_size, spec.patch_size);
      if (mask) p.mask = mask->crop(p.window.col_off, p.window.row_off, spec.patch_size, spec.patch_size);
      p.geo = gt.translated(p.window.col_off, p.window.row_off);
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::string to_string(AugmentOp op) {
  switch (op) {
    case AugmentOp::Rot90: return "rot90";
    case AugmentOp::Rot180: return "rot180";
    case AugmentOp::Rot270: return "rot270";
    case AugmentOp::HFlip: return "hflip";
    case AugmentOp::VFlip: return "vflip";
    case AugmentOp::BrightnessContrast: return "brightness_contrast";
  }
  return "?";
}

AugmentOp parse_augment_op(const std::string& text) {
  for (auto op : {AugmentOp::Rot90, AugmentOp::Rot180, AugmentOp::Rot270, AugmentOp::HFlip, AugmentOp::VFlip,
                  AugmentOp::BrightnessContrast})
    if (to_string(op) == text) return op;
  fail(ErrorCode::ConfigInvalid, "unknown augmentation '" + text + "'");
}

RasterGrid apply_geometric(const RasterGrid& g, AugmentOp op) {
  const int w = g.width(), h = g.height(), b = g.bands();
  const bool swap = op == AugmentOp::Rot90 || op == AugmentOp::Rot270;
  const int ow = swap ? h : w, oh = swap ? w : h;
  // Source (row, col) for each output pixel.
  auto source = [&](int r, int c) -> std::pair<int, int> {
    switch (op) {
      case AugmentOp::Rot90: return {c, w - 1 - r};
      case AugmentOp::Rot180: return {h - 1 - r, w - 1 - c};
      case AugmentOp::Rot270: return {h - 1 - c, r};
      case AugmentOp::HFlip: return {r, w - 1 - c};
      case AugmentOp::VFlip: return {h - 1 - r, c};
      default: return {r, c};
    }
  };
  RasterGrid out(ow, oh, b, g.sample_type());
  std::visit(
      [&](const auto& src) {
        using T = typename std::decay_t<decltype(src)>::value_type;
        auto dst = out.samples<T>();
        for (int r = 0; r < oh; ++r)
          for (int c = 0; c < ow; ++c) {
            auto [sr, sc] = source(r, c);
            for (int k = 0; k < b; ++k) dst[out.index(r, c, k)] = src[g.index(sr, sc, k)];
          }
      },
      g.storage());
  return out;
}

namespace {

RasterGrid brightness_contrast(const RasterGrid& g, double alpha, double beta) {
  RasterGrid out = g;
  const double hi = full_scale(g.sample_type());
  std::visit(
      [&](auto& v) {
        using T = typename std::decay_t<decltype(v)>::value_type;
        for (auto& x : v) {
          const double y = std::clamp(alpha * static_cast<double>(x) + beta, 0.0, hi);
          if constexpr (std::is_floating_point_v<T>)
            x = static_cast<T>(y);
          else
            x = static_cast<T>(std::floor(y + 0.5));
        }
      },
      out.storage());
  return out;
}

}  // namespace

std::vector<PatchRecord> augment(const PatchRecord& patch, const std::vector<AugmentOp>& ops, std::uint64_t seed) {
  if (patch.mask && (patch.mask->width() != patch.image.width() || patch.mask->height() != patch.image.height()))
    fail(ErrorCode::ShapeMismatch, "augment: image and mask differ in size");
  Rng rng(seed);
  std::vector<PatchRecord> out{patch};
  for (AugmentOp op : ops) {
    PatchRecord p = patch;
    if (op == AugmentOp::BrightnessContrast) {
      const double alpha = rng.uniform(0.8, 1.2);
      const double beta = rng.uniform(-0.1, 0.1) * full_scale(patch.image.sample_type());
      p.image = brightness_contrast(patch.image, alpha, beta);
    } else {
      p.image = apply_geometric(patch.image, op);
      if (p.mask) p.mask = apply_geometric(*patch.mask, op);
    }
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

std::filesystem::path numbered(const std::filesystem::path& dir, const char* stem, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04zu.tif", stem, i);
  return dir / buf;
}

}  // namespace

void save_patch_set(const std::filesystem::path& dir, const std::vector<PatchRecord>& patches) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
  if (!manifest) fail(ErrorCode::IoFailure, "cannot write manifest in " + dir.string());
  manifest << "# index region col_off row_off size has_mask\n";
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto& p = patches[i];
    write_geotiff(p.image, p.geo, numbered(dir, "image", i));
    if (p.mask) write_geotiff(*p.mask, p.geo, numbered(dir, "mask", i));
    manifest << i << ' ' << p.parent_region << ' ' << p.window.col_off << ' ' << p.window.row_off << ' '
             << p.window.width << ' ' << (p.mask ? 1 : 0) << '\n';
  }
  if (!manifest) fail(ErrorCode::IoFailure, "manifest write failed in " + dir.string());
}

std::vector<PatchRecord> load_patch_set(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) fail(ErrorCode::IoFailure, "no manifest.txt in " + dir.string());
  std::vector<PatchRecord> out;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream in(line);
    std::size_t index = 0;
    int has_mask = 0;
    PatchRecord p;
    if (!(in >> index >> p.parent_region >> p.window.col_off >> p.window.row_off >> p.window.width >> has_mask))
      fail(ErrorCode::MalformedFile, "bad manifest line: " + line);
    p.window.height = p.window.width;
    auto img = read_geotiff(numbered(dir, "image", index));
    p.image = std::move(img.grid);
    p.geo = img.geo;
    if (has_mask) p.mask = read_geotiff(numbered(dir, "mask", index)).grid;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace campseg
