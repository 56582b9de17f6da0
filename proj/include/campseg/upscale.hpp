#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "campseg/nn/models.hpp"
#include "campseg/raster.hpp"

namespace campseg {

enum class UpscaleMethod { None, Nearest, Bilinear, Edsr };
std::string to_string(UpscaleMethod m);
UpscaleMethod parse_upscale_method(const std::string& text);

/// out(r, c) = in(floor(r / f), floor(c / f)).
RasterGrid upscale_nearest(const RasterGrid& grid, int factor);

/// Half-pixel-centre bilinear: s = (d + 0.5) / f - 0.5 clamped to [0, len - 1],
/// float32 blend, integer outputs rounded half away from zero.
RasterGrid upscale_bilinear(const RasterGrid& grid, int factor);

/// 3-band (or replicated 1-band) raster through the EDSR network; output is
/// 3-band of the same sample type, four times larger in each dimension.
RasterGrid edsr_forward(const RasterGrid& grid, const nn::ModelCheckpoint& params, const nn::EdsrConfig& cfg);

/// Dispatches on method; EDSR needs `edsr` (its config is read from the checkpoint).
RasterGrid upscale(const RasterGrid& grid, UpscaleMethod method, int factor, const nn::ModelCheckpoint* edsr = nullptr);

/// Peak signal-to-noise ratio over all samples, peak = full scale of the type.
/// Identical rasters give +infinity.
double psnr(const RasterGrid& a, const RasterGrid& b);

struct EdsrTrainConfig {
  int epochs = 100;
  int batch_size = 1;
  double lr = 1e-3;
  double lr_min = 1e-5;
  std::uint64_t seed = 1;
};

/// (low-res, high-res) image pairs, high = 4 x low.
using SrPair = std::pair<RasterGrid, RasterGrid>;

/// MSE training with AdamW and a cosine schedule. Returns mean loss per epoch.
std::vector<double> train_edsr(nn::ModelCheckpoint& ckpt, const nn::EdsrConfig& cfg, const std::vector<SrPair>& pairs,
                               const EdsrTrainConfig& tcfg,
                               const std::function<void(int, double)>& on_epoch = nullptr);

}  // namespace campseg
