#pragma once

#include <string>
#include <vector>

#include "campseg/nn/checkpoint.hpp"
#include "campseg/nn/ops.hpp"
#include "campseg/random.hpp"
#include "campseg/raster.hpp"

namespace campseg::nn {
inline namespace CAMPSEG_NN_NAMESPACE {

struct EncoderConfig {
  int image_size = 128;
  int patch_embed_size = 8;
  int embed_dim = 64;
  int depth = 4;
  int heads = 4;
  int window_size = 4;
  /// Empty means the default: min(4, depth/2) layers spaced evenly, ending at the last layer.
  std::vector<int> global_attention_layers;
  int adapter_tune_dim = 16;
  int mlp_ratio = 4;

  int grid() const { return image_size / patch_embed_size; }
  int tokens() const { return grid() * grid(); }
  std::vector<int> global_layers() const;
  void validate() const;
};

struct DecoderConfig {
  int blocks = 2;
  int heads = 2;
  int mlp_dim = 128;
};

struct UnetConfig {
  int base_channels = 8;
};

struct EdsrConfig {
  int feature_channels = 16;
  int residual_blocks = 8;
  real residual_scaling = 1.0;
  int scale = 4;
  void validate() const;
};

/// P_i = up(GELU(tune_i(F_i))) for layer `layer`.
Tensor adapter_forward(const Tensor& features, const ModelCheckpoint& ckpt, int layer);

/// Image [3, S, S] to tokens [T, embed_dim].
Tensor encoder_forward(const Tensor& image, const ModelCheckpoint& ckpt, const EncoderConfig& cfg, bool use_adapters);

/// Tokens on a square grid to logits [1, H, W], H = W = grid * patch.
Tensor decoder_forward(const Tensor& embeddings, const ModelCheckpoint& ckpt, const EncoderConfig& cfg,
                       const DecoderConfig& dcfg);

Tensor unet_baseline_forward(const Tensor& image, const ModelCheckpoint& ckpt, const UnetConfig& cfg);

/// Image [3, h, w] in [0, 1] to [3, 4h, 4w].
Tensor edsr_tensor_forward(const Tensor& image, const ModelCheckpoint& ckpt, const EdsrConfig& cfg);

void init_encoder(ModelCheckpoint& ckpt, const EncoderConfig& cfg, Rng& rng, bool frozen);
/// Tune projections are random, the shared up projection starts at zero.
void init_adapters(ModelCheckpoint& ckpt, const EncoderConfig& cfg, Rng& rng);
void init_decoder(ModelCheckpoint& ckpt, const EncoderConfig& cfg, const DecoderConfig& dcfg, Rng& rng);
void init_unet(ModelCheckpoint& ckpt, const UnetConfig& cfg, Rng& rng);
void init_edsr(ModelCheckpoint& ckpt, const EdsrConfig& cfg, Rng& rng);

/// Everything a segmentation checkpoint needs to rebuild its forward pass.
struct SegmenterConfig {
  std::string kind = "adapter";  // "adapter" or "unet"
  EncoderConfig encoder;
  DecoderConfig decoder;
  UnetConfig unet;
  bool freeze_encoder = true;
  bool use_adapters = true;

  int input_size() const { return encoder.image_size; }
  std::string serialize() const;
  static SegmenterConfig parse(const std::string& text);
};

ModelCheckpoint init_segmenter(const SegmenterConfig& cfg, std::uint64_t seed);
/// Image [3, S, S] to logits [1, S, S].
Tensor segment_forward(const Tensor& image, const ModelCheckpoint& ckpt, const SegmenterConfig& cfg);

std::string serialize(const EdsrConfig& cfg);
EdsrConfig parse_edsr_config(const std::string& text);
ModelCheckpoint init_edsr_checkpoint(const EdsrConfig& cfg, std::uint64_t seed);

/// Bands 1-3 (a single band is replicated) scaled to [0, 1], layout [3, H, W].
Tensor raster_to_tensor(const RasterGrid& grid);
/// Per-channel standardisation applied in front of the segmenters.
Tensor normalize_image(const Tensor& unit_image);
/// Single-band mask (nonzero = foreground) to {0, 1} tensor [1, H, W].
Tensor mask_to_tensor(const RasterGrid& mask);

}  // namespace CAMPSEG_NN_NAMESPACE
}  // namespace campseg::nn
