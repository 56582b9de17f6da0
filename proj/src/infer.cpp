#include "campseg/infer.hpp"

#include <cmath>
#include <memory>

#include "campseg/error.hpp"
#include "campseg/nn/models.hpp"

namespace campseg {

void StitchSpec::validate() const {
  tile.validate();
  if (tile.edge != EdgePolicy::Snap) fail(ErrorCode::ConfigInvalid, "stitching needs the snap edge policy");
  if (!(threshold > 0.0 && threshold < 1.0)) fail(ErrorCode::ConfigInvalid, "threshold must lie in (0, 1)");
}

TileModel checkpoint_tile_model(const nn::ModelCheckpoint& ckpt) {
  auto frozen = std::make_shared<nn::ModelCheckpoint>();
  for (const auto& [name, t] : ckpt.params()) frozen->add(name, t.detach(), true);
  frozen->config = ckpt.config;
  const auto cfg = nn::SegmenterConfig::parse(ckpt.config);
  return [frozen, cfg](const RasterGrid& tile) {
    if (tile.width() != cfg.input_size() || tile.height() != cfg.input_size())
      fail(ErrorCode::ShapeMismatch, "tile size differs from the model input size");
    const nn::Tensor logits = nn::segment_forward(nn::normalize_image(nn::raster_to_tensor(tile)), *frozen, cfg);
    return std::vector<double>(logits.values().begin(), logits.values().end());
  };
}

std::vector<Window> stitch_windows(int width, int height, const StitchSpec& spec) {
  spec.validate();
  const auto cols = enumerate_windows(width, spec.tile);
  const auto rows = enumerate_windows(height, spec.tile);
  std::vector<Window> out;
  out.reserve(rows.size() * cols.size());
  const int p = spec.tile.patch_size;
  for (int r : rows)
    for (int c : cols) out.push_back({c, r, p, p});
  return out;
}

LogitMap sliding_inference(const RasterGrid& grid, const TileModel& model, const StitchSpec& spec,
                           const std::vector<std::size_t>* order) {
  const auto windows = stitch_windows(grid.width(), grid.height(), spec);
  if (order && order->size() != windows.size())
    fail(ErrorCode::ConfigInvalid, "tile order is not a permutation of the windows");

  const std::size_t w = static_cast<std::size_t>(grid.width());
  // Running mean: a constant model stays exactly constant, unlike sum / count.
  std::vector<double> mean(w * grid.height(), 0.0);
  std::vector<int> cover(mean.size(), 0);
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const Window& win = windows[order ? (*order)[k] : k];
    const auto logits = model(grid.crop(win.col_off, win.row_off, win.width, win.height));
    if (logits.size() != static_cast<std::size_t>(win.width) * win.height)
      fail(ErrorCode::ShapeMismatch, "tile model returned the wrong number of logits");
    for (int r = 0; r < win.height; ++r)
      for (int c = 0; c < win.width; ++c) {
        const std::size_t i = (static_cast<std::size_t>(win.row_off) + r) * w + win.col_off + c;
        mean[i] += (logits[static_cast<std::size_t>(r) * win.width + c] - mean[i]) / ++cover[i];
      }
  }

  return LogitMap{grid.width(), grid.height(), std::move(mean)};
}

RasterGrid binarize(const LogitMap& logits, double threshold) {
  RasterGrid mask(logits.width, logits.height, 1, SampleType::UInt8);
  auto px = mask.samples<std::uint8_t>();
  for (std::size_t i = 0; i < logits.values.size(); ++i)
    px[i] = 1.0 / (1.0 + std::exp(-logits.values[i])) >= threshold ? 255 : 0;
  return mask;
}

}  // namespace campseg
