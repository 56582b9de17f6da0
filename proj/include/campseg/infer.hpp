#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "campseg/nn/checkpoint.hpp"
#include "campseg/raster.hpp"
#include "campseg/tiler.hpp"

namespace campseg {

struct StitchSpec {
  TileSpec tile{.patch_size = 128, .stride = 112, .edge = EdgePolicy::Snap};
  double threshold = 0.5;

  void validate() const;
};

/// Full-scene logits, row-major, kept in double so the mean is exact enough to
/// compare against an accumulate/divide oracle.
struct LogitMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
};

/// Maps a square image tile to row-major logits of the same size.
using TileModel = std::function<std::vector<double>(const RasterGrid& tile)>;

/// Wraps a segmenter checkpoint (kind and shape read from its config) as a
/// TileModel. Parameters are copied frozen, so no gradient graph is recorded.
TileModel checkpoint_tile_model(const nn::ModelCheckpoint& ckpt);

/// Windows visited by sliding_inference, row-major.
std::vector<Window> stitch_windows(int width, int height, const StitchSpec& spec);

/// Per-pixel mean of the logits of every covering tile. `order`, when given,
/// is a permutation of stitch_windows() fixing the accumulation order.
LogitMap sliding_inference(const RasterGrid& grid, const TileModel& model, const StitchSpec& spec,
                           const std::vector<std::size_t>* order = nullptr);

/// sigmoid(logit) >= threshold -> 255, else 0. Single-band uint8.
RasterGrid binarize(const LogitMap& logits, double threshold);

}  // namespace campseg
