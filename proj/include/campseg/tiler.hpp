#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "campseg/raster.hpp"

namespace campseg {

enum class RegionRole { TrainLarge, TrainSmall, Validation, Test };
std::string to_string(RegionRole role);
RegionRole parse_region_role(const std::string& text);

struct Window {
  int col_off = 0;
  int row_off = 0;
  int width = 0;
  int height = 0;

  bool overlaps(const Window& o) const {
    return col_off < o.col_off + o.width && o.col_off < col_off + width && row_off < o.row_off + o.height &&
           o.row_off < row_off + height;
  }
  friend bool operator==(const Window&, const Window&) = default;
};

struct RegionSpec {
  std::string name;
  RegionRole role = RegionRole::TrainLarge;
  Window window;
};

/// Throws RegionInvalid when a window leaves the raster or regions with
/// different roles overlap.
void validate_regions(const std::vector<RegionSpec>& regions, int raster_width, int raster_height);

enum class EdgePolicy { Snap, Drop };

struct TileSpec {
  int patch_size = 128;
  int stride = 64;
  EdgePolicy edge = EdgePolicy::Snap;

  int overlap() const { return patch_size - stride; }
  void validate() const;
};

/// Half-patch stride for training regions, 7/8 of a patch at test time.
int default_stride(int patch_size, RegionRole role);

struct PatchRecord {
  std::string parent_region;
  Window window;
  RasterGrid image;
  std::optional<RasterGrid> mask;
  GeoTransform geo;
};

/// Offsets of floor((len - patch)/stride) + 1 regular windows; under Snap one
/// more at len - patch when the last regular window stops short.
std::vector<int> enumerate_windows(int region_len, const TileSpec& spec);

/// Row-major over the cartesian product of row and column offsets.
std::vector<PatchRecord> extract_patches(const RasterGrid& grid, const GeoTransform& gt, const RegionSpec& region,
                                         const TileSpec& spec, const std::optional<RasterGrid>& mask = std::nullopt);

enum class AugmentOp { Rot90, Rot180, Rot270, HFlip, VFlip, BrightnessContrast };
std::string to_string(AugmentOp op);
AugmentOp parse_augment_op(const std::string& text);

/// Geometric transforms of a raster; rot90 turns counter-clockwise.
RasterGrid apply_geometric(const RasterGrid& grid, AugmentOp op);

/// Returns the original followed by one variant per op, in the given order.
/// Geometric ops move image and mask together; brightness/contrast changes the
/// image only with alpha in [0.8, 1.2], beta in [-0.1, 0.1] * full scale.
std::vector<PatchRecord> augment(const PatchRecord& patch, const std::vector<AugmentOp>& ops, std::uint64_t seed);

/// image_####.tif / mask_####.tif plus manifest.txt, one line per patch:
///   index region col_off row_off size has_mask
void save_patch_set(const std::filesystem::path& dir, const std::vector<PatchRecord>& patches);
std::vector<PatchRecord> load_patch_set(const std::filesystem::path& dir);

}  // namespace campseg
