#include "campseg/upscale.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "campseg/error.hpp"
#include "campseg/kernels.hpp"
#include "campseg/nn/optim.hpp"
#include "campseg/random.hpp"

namespace campseg {

std::string to_string(UpscaleMethod m) {
  switch (m) {
    case UpscaleMethod::None: return "none";
    case UpscaleMethod::Nearest: return "nearest";
    case UpscaleMethod::Bilinear: return "bilinear";
    case UpscaleMethod::Edsr: return "edsr";
  }
  return "?";
}

UpscaleMethod parse_upscale_method(const std::string& text) {
  for (auto m : {UpscaleMethod::None, UpscaleMethod::Nearest, UpscaleMethod::Bilinear, UpscaleMethod::Edsr})
    if (to_string(m) == text) return m;
  fail(ErrorCode::ConfigInvalid, "unknown upscale method '" + text + "'");
}

namespace {

void check_factor(int factor) {
  if (factor < 1) fail(ErrorCode::ConfigInvalid, "upscale factor must be >= 1");
}

template <typename Kernel>
RasterGrid resample(const RasterGrid& grid, int factor, Kernel kernel) {
  check_factor(factor);
  RasterGrid out(grid.width() * factor, grid.height() * factor, grid.bands(), grid.sample_type());
  std::visit(
      [&](const auto& src) {
        using T = typename std::decay_t<decltype(src)>::value_type;
        kernel(src.data(), static_cast<std::size_t>(grid.width()), static_cast<std::size_t>(grid.height()),
               static_cast<std::size_t>(grid.bands()), factor, out.samples<T>().data());
      },
      grid.storage());
  return out;
}

}  // namespace

RasterGrid upscale_nearest(const RasterGrid& grid, int factor) {
  return resample(grid, factor, [](auto... a) { kernels::upscale_nearest(a...); });
}

RasterGrid upscale_bilinear(const RasterGrid& grid, int factor) {
  return resample(grid, factor, [](auto... a) { kernels::upscale_bilinear(a...); });
}

RasterGrid edsr_forward(const RasterGrid& grid, const nn::ModelCheckpoint& params, const nn::EdsrConfig& cfg) {
  nn::ModelCheckpoint frozen;
  for (const auto& [name, t] : params.params()) frozen.add(name, t.detach(), true);
  const nn::Tensor out = nn::edsr_tensor_forward(nn::raster_to_tensor(grid), frozen, cfg);
  const int w = static_cast<int>(out.dim(2)), h = static_cast<int>(out.dim(1));
  RasterGrid result(w, h, 3, grid.sample_type());
  const double fs = full_scale(grid.sample_type());
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < h; ++r)
      for (int x = 0; x < w; ++x) {
        const double v = static_cast<double>(out.data()[(static_cast<std::size_t>(c) * h + r) * w + x]) * fs;
        result.set_value(r, x, c, grid.sample_type() == SampleType::Float32 ? v : std::clamp(std::round(v), 0.0, fs));
      }
  return result;
}

RasterGrid upscale(const RasterGrid& grid, UpscaleMethod method, int factor, const nn::ModelCheckpoint* edsr) {
  switch (method) {
    case UpscaleMethod::None: return grid;
    case UpscaleMethod::Nearest: return upscale_nearest(grid, factor);
    case UpscaleMethod::Bilinear: return upscale_bilinear(grid, factor);
    case UpscaleMethod::Edsr: {
      if (!edsr) fail(ErrorCode::ConfigInvalid, "EDSR upscaling needs a checkpoint");
      const auto cfg = nn::parse_edsr_config(edsr->config);
      if (factor != cfg.scale) fail(ErrorCode::ConfigInvalid, "EDSR upscales by exactly 4");
      return edsr_forward(grid, *edsr, cfg);
    }
  }
  return grid;
}

double psnr(const RasterGrid& a, const RasterGrid& b) {
  if (a.width() != b.width() || a.height() != b.height() || a.bands() != b.bands() ||
      a.sample_type() != b.sample_type())
    fail(ErrorCode::ShapeMismatch, "psnr: rasters differ in shape or type");
  double se = 0.0;
  for (int r = 0; r < a.height(); ++r)
    for (int c = 0; c < a.width(); ++c)
      for (int k = 0; k < a.bands(); ++k) {
        const double d = a.value(r, c, k) - b.value(r, c, k);
        se += d * d;
      }
  const double mse = se / static_cast<double>(a.sample_count());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  const double peak = full_scale(a.sample_type());
  return 10.0 * std::log10(peak * peak / mse);
}

std::vector<double> train_edsr(nn::ModelCheckpoint& ckpt, const nn::EdsrConfig& cfg, const std::vector<SrPair>& pairs,
                               const EdsrTrainConfig& tcfg, const std::function<void(int, double)>& on_epoch) {
  if (pairs.empty()) fail(ErrorCode::EmptyDataset, "no super-resolution training pairs");
  std::vector<std::pair<nn::Tensor, nn::Tensor>> data;
  for (const auto& [lo, hi] : pairs) {
    if (hi.width() != lo.width() * cfg.scale || hi.height() != lo.height() * cfg.scale)
      fail(ErrorCode::ShapeMismatch, "high-res image must be exactly 4x the low-res image");
    data.emplace_back(nn::raster_to_tensor(lo), nn::raster_to_tensor(hi));
  }
  Rng rng(tcfg.seed);
  std::vector<std::size_t> order(data.size());
  std::vector<double> losses;
  const int batch = std::max(1, tcfg.batch_size);
  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    const double lr = tcfg.epochs > 1 ? tcfg.lr_min + 0.5 * (tcfg.lr - tcfg.lr_min) *
                                                          (1.0 + std::cos(std::numbers::pi * epoch / (tcfg.epochs - 1)))
                                      : tcfg.lr;
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      ckpt.zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        const auto& [lo, hi] = data[order[i]];
        nn::Tensor loss = nn::mse_loss(nn::edsr_tensor_forward(lo, ckpt, cfg), hi);
        total += loss.item();
        nn::backward(nn::scale(loss, static_cast<nn::real>(1.0 / (end - start))));
      }
      nn::adamw_step(ckpt, {.lr = lr, .weight_decay = 0.0});
    }
    losses.push_back(total / static_cast<double>(data.size()));
    if (on_epoch) on_epoch(epoch, losses.back());
  }
  return losses;
}

}  // namespace campseg
