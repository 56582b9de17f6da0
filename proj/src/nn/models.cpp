#include "campseg/nn/models.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <sstream>

#include "campseg/error.hpp"

namespace campseg::nn {
inline namespace CAMPSEG_NN_NAMESPACE {
namespace {

std::string key(const std::string& prefix, const std::string& leaf) { return prefix + "." + leaf; }

Tensor normal_tensor(Shape shape, double stddev, Rng& rng) {
  std::vector<real> v(numel(shape));
  for (auto& x : v) x = static_cast<real>(rng.normal() * stddev);
  return Tensor(std::move(shape), std::move(v));
}

void add_linear(ModelCheckpoint& ckpt, const std::string& prefix, int in, int out, Rng& rng, bool frozen,
                double stddev = 0.0) {
  if (stddev == 0.0) stddev = 1.0 / std::sqrt(static_cast<double>(in));
  ckpt.add(key(prefix, "weight"), normal_tensor({out, in}, stddev, rng), frozen);
  ckpt.add(key(prefix, "bias"), Tensor({out}, 0.0), frozen);
}

void add_norm(ModelCheckpoint& ckpt, const std::string& prefix, int dim, bool frozen) {
  ckpt.add(key(prefix, "weight"), Tensor({dim}, 1.0), frozen);
  ckpt.add(key(prefix, "bias"), Tensor({dim}, 0.0), frozen);
}

void add_conv(ModelCheckpoint& ckpt, const std::string& prefix, int in, int out, int k, Rng& rng, double gain = 1.0) {
  const double stddev = gain * std::sqrt(2.0 / (in * k * k));
  ckpt.add(key(prefix, "weight"), normal_tensor({out, in, k, k}, stddev, rng));
  ckpt.add(key(prefix, "bias"), Tensor({out}, 0.0));
}

void add_conv_transpose(ModelCheckpoint& ckpt, const std::string& prefix, int in, int out, Rng& rng) {
  ckpt.add(key(prefix, "weight"), normal_tensor({in, out, 2, 2}, std::sqrt(2.0 / in), rng));
  ckpt.add(key(prefix, "bias"), Tensor({out}, 0.0));
}

Tensor lin(const Tensor& x, const ModelCheckpoint& ckpt, const std::string& prefix) {
  return linear(x, ckpt.at(key(prefix, "weight")), ckpt.find(key(prefix, "bias")));
}

Tensor norm(const Tensor& x, const ModelCheckpoint& ckpt, const std::string& prefix) {
  return layer_norm(x, ckpt.at(key(prefix, "weight")), ckpt.at(key(prefix, "bias")));
}

Tensor conv(const Tensor& x, const ModelCheckpoint& ckpt, const std::string& prefix) {
  const Tensor& w = ckpt.at(key(prefix, "weight"));
  return conv2d(x, w, ckpt.find(key(prefix, "bias")), static_cast<int>(w.dim(2) / 2));
}

Tensor up2(const Tensor& x, const ModelCheckpoint& ckpt, const std::string& prefix) {
  return conv_transpose2x2(x, ckpt.at(key(prefix, "weight")), ckpt.find(key(prefix, "bias")));
}

Tensor mlp(const Tensor& x, const ModelCheckpoint& ckpt, const std::string& prefix) {
  return lin(gelu(lin(x, ckpt, key(prefix, "fc1"))), ckpt, key(prefix, "fc2"));
}

void add_mlp(ModelCheckpoint& ckpt, const std::string& prefix, int dim, int hidden, Rng& rng, bool frozen,
             double stddev = 0.0) {
  add_linear(ckpt, key(prefix, "fc1"), dim, hidden, rng, frozen, stddev);
  add_linear(ckpt, key(prefix, "fc2"), hidden, dim, rng, frozen, stddev);
}

void add_attention(ModelCheckpoint& ckpt, const std::string& prefix, int dim, Rng& rng, bool frozen,
                   double stddev = 0.0) {
  for (const char* p : {"q", "k", "v", "proj"}) add_linear(ckpt, key(prefix, p), dim, dim, rng, frozen, stddev);
}

Tensor attend(const Tensor& queries, const Tensor& keys, const ModelCheckpoint& ckpt, const std::string& prefix,
              int heads, std::optional<WindowSpec> window = std::nullopt) {
  Tensor q = lin(queries, ckpt, key(prefix, "q"));
  Tensor k = lin(keys, ckpt, key(prefix, "k"));
  Tensor v = lin(keys, ckpt, key(prefix, "v"));
  return lin(attention(q, k, v, heads, window), ckpt, key(prefix, "proj"));
}

int log2_exact(int v, const char* what) {
  if (v < 1 || !std::has_single_bit(static_cast<unsigned>(v)))
    fail(ErrorCode::ConfigInvalid, std::string(what) + " must be a power of two");
  return std::countr_zero(static_cast<unsigned>(v));
}

std::vector<int> decoder_channels(const EncoderConfig& cfg) {
  std::vector<int> ch{cfg.embed_dim};
  const int stages = log2_exact(cfg.patch_embed_size, "patch_embed_size");
  for (int s = 0; s < stages; ++s) ch.push_back(std::max(4, ch.back() / 2));
  return ch;
}

void check_image(const Tensor& image, int size, const char* who) {
  if (image.rank() != 3 || image.dim(0) != 3 || (size > 0 && (image.dim(1) != size || image.dim(2) != size)))
    fail(ErrorCode::ShapeMismatch, std::string(who) + ": expected image [3, " + std::to_string(size) + ", " +
                                       std::to_string(size) + "], got " + to_string(image.shape()));
}

std::map<std::string, std::string> parse_pairs(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

int get_int(const std::map<std::string, std::string>& kv, const std::string& k, int fallback) {
  auto it = kv.find(k);
  return it == kv.end() ? fallback : std::stoi(it->second);
}

}  // namespace

std::vector<int> EncoderConfig::global_layers() const {
  if (!global_attention_layers.empty()) return global_attention_layers;
  const int n = std::min(4, depth / 2);
  std::vector<int> out;
  for (int k = 1; k <= n; ++k) out.push_back(k * depth / n - 1);
  return out;
}

void EncoderConfig::validate() const {
  if (image_size < 1 || patch_embed_size < 1 || image_size % patch_embed_size != 0)
    fail(ErrorCode::ConfigInvalid, "image_size must be a positive multiple of patch_embed_size");
  log2_exact(patch_embed_size, "patch_embed_size");
  if (embed_dim < 1 || depth < 1 || heads < 1 || embed_dim % heads != 0)
    fail(ErrorCode::ConfigInvalid, "embed_dim must be divisible by heads; depth >= 1");
  if (window_size < 1) fail(ErrorCode::ConfigInvalid, "window_size must be >= 1");
  if (adapter_tune_dim < 1 || mlp_ratio < 1) fail(ErrorCode::ConfigInvalid, "adapter_tune_dim and mlp_ratio must be >= 1");
  for (int g : global_attention_layers)
    if (g < 0 || g >= depth) fail(ErrorCode::ConfigInvalid, "global attention layer " + std::to_string(g) + " out of range");
}

void EdsrConfig::validate() const {
  if (scale != 4) fail(ErrorCode::ConfigInvalid, "EDSR scale must be 4");
  if (feature_channels < 1 || residual_blocks < 1) fail(ErrorCode::ConfigInvalid, "EDSR channels and blocks must be >= 1");
  if (!(residual_scaling > 0.0 && residual_scaling <= 1.0))
    fail(ErrorCode::ConfigInvalid, "EDSR residual_scaling must lie in (0, 1]");
}

Tensor adapter_forward(const Tensor& features, const ModelCheckpoint& ckpt, int layer) {
  const std::string tune = "adapter.tune." + std::to_string(layer);
  return lin(gelu(lin(features, ckpt, tune)), ckpt, "adapter.up");
}

Tensor encoder_forward(const Tensor& image, const ModelCheckpoint& ckpt, const EncoderConfig& cfg, bool use_adapters) {
  check_image(image, cfg.image_size, "encoder_forward");
  const auto globals = cfg.global_layers();
  Tensor x = lin(patchify(image, cfg.patch_embed_size), ckpt, "encoder.patch_embed");
  x = add(x, ckpt.at("encoder.pos_embed"));
  const WindowSpec window{cfg.grid(), cfg.grid(), cfg.window_size};
  for (int i = 0; i < cfg.depth; ++i) {
    const std::string b = "encoder.blocks." + std::to_string(i);
    const bool global = std::find(globals.begin(), globals.end(), i) != globals.end();
    Tensor h = norm(x, ckpt, key(b, "norm1"));
    x = add(x, attend(h, h, ckpt, key(b, "attn"), cfg.heads, global ? std::nullopt : std::optional(window)));
    x = add(x, mlp(norm(x, ckpt, key(b, "norm2")), ckpt, key(b, "mlp")));
    if (use_adapters) x = add(x, adapter_forward(x, ckpt, i));
  }
  return norm(x, ckpt, "encoder.norm");
}

Tensor decoder_forward(const Tensor& embeddings, const ModelCheckpoint& ckpt, const EncoderConfig& cfg,
                       const DecoderConfig& dcfg) {
  const int g = cfg.grid();
  if (embeddings.rank() != 2 || embeddings.dim(0) != g * g || embeddings.dim(1) != cfg.embed_dim)
    fail(ErrorCode::ShapeMismatch, "decoder_forward: embeddings " + to_string(embeddings.shape()) + " do not form a " +
                                       std::to_string(g) + "x" + std::to_string(g) + " grid of width " +
                                       std::to_string(cfg.embed_dim));
  Tensor src = add(embeddings, ckpt.at("decoder.pos"));
  Tensor token = ckpt.at("decoder.mask_token");
  for (int i = 0; i < dcfg.blocks; ++i) {
    const std::string b = "decoder.blocks." + std::to_string(i);
    token = add(token, attend(norm(token, ckpt, key(b, "norm_t1")), src, ckpt, key(b, "t2i"), dcfg.heads));
    token = add(token, mlp(norm(token, ckpt, key(b, "norm_t2")), ckpt, key(b, "mlp_t")));
    src = add(src, attend(norm(src, ckpt, key(b, "norm_i1")), token, ckpt, key(b, "i2t"), dcfg.heads));
    src = add(src, mlp(norm(src, ckpt, key(b, "norm_i2")), ckpt, key(b, "mlp_i")));
  }
  token = norm(token, ckpt, "decoder.norm_t");

  const auto ch = decoder_channels(cfg);
  Tensor f = reshape(transpose2d(src), {cfg.embed_dim, g, g});
  for (std::size_t s = 1; s < ch.size(); ++s) f = gelu(up2(f, ckpt, "decoder.up." + std::to_string(s - 1)));
  const int c = ch.back();
  const std::int64_t h = f.dim(1), w = f.dim(2);
  Tensor hyper = lin(gelu(lin(token, ckpt, "decoder.hyper.fc1")), ckpt, "decoder.hyper.fc2");  // [1, c]
  Tensor logits = matmul(hyper, reshape(f, {c, h * w}));
  return add_channel(reshape(logits, {1, h, w}), ckpt.at("decoder.out_bias"));
}

Tensor unet_baseline_forward(const Tensor& image, const ModelCheckpoint& ckpt, const UnetConfig&) {
  check_image(image, 0, "unet_baseline_forward");
  if (image.dim(1) % 4 != 0 || image.dim(2) % 4 != 0)
    fail(ErrorCode::ShapeMismatch, "unet_baseline_forward: spatial dims must be divisible by 4");
  auto block = [&](const Tensor& x, const std::string& p) {
    return relu(conv(relu(conv(x, ckpt, key(p, "conv1"))), ckpt, key(p, "conv2")));
  };
  Tensor e1 = block(image, "unet.enc1");
  Tensor e2 = block(maxpool2x2(e1), "unet.enc2");
  Tensor mid = block(maxpool2x2(e2), "unet.mid");
  Tensor d2 = block(concat_channels(up2(mid, ckpt, "unet.up2"), e2), "unet.dec2");
  Tensor d1 = block(concat_channels(up2(d2, ckpt, "unet.up1"), e1), "unet.dec1");
  return conv(d1, ckpt, "unet.head");
}

Tensor edsr_tensor_forward(const Tensor& image, const ModelCheckpoint& ckpt, const EdsrConfig& cfg) {
  check_image(image, 0, "edsr_forward");
  Tensor head = conv(image, ckpt, "edsr.head");
  Tensor x = head;
  for (int i = 0; i < cfg.residual_blocks; ++i) {
    const std::string b = "edsr.body." + std::to_string(i);
    Tensor r = conv(relu(conv(x, ckpt, key(b, "conv1"))), ckpt, key(b, "conv2"));
    if (cfg.residual_scaling != 1.0) r = scale(r, cfg.residual_scaling);
    x = add(x, r);
  }
  x = add(x, head);
  for (int s = 0; s < 2; ++s) x = pixel_shuffle(conv(x, ckpt, "edsr.up." + std::to_string(s)), 2);
  return conv(x, ckpt, "edsr.tail");
}

void init_encoder(ModelCheckpoint& ckpt, const EncoderConfig& cfg, Rng& rng, bool frozen) {
  cfg.validate();
  const int e = cfg.embed_dim, p = cfg.patch_embed_size;
  add_linear(ckpt, "encoder.patch_embed", 3 * p * p, e, rng, frozen);
  ckpt.add("encoder.pos_embed", normal_tensor({cfg.tokens(), e}, 0.02, rng), frozen);
  for (int i = 0; i < cfg.depth; ++i) {
    const std::string b = "encoder.blocks." + std::to_string(i);
    add_norm(ckpt, key(b, "norm1"), e, frozen);
    add_attention(ckpt, key(b, "attn"), e, rng, frozen, 0.02);
    add_norm(ckpt, key(b, "norm2"), e, frozen);
    add_linear(ckpt, key(b, "mlp.fc1"), e, e * cfg.mlp_ratio, rng, frozen, 0.02);
    add_linear(ckpt, key(b, "mlp.fc2"), e * cfg.mlp_ratio, e, rng, frozen, 0.02);
  }
  add_norm(ckpt, "encoder.norm", e, frozen);
}

void init_adapters(ModelCheckpoint& ckpt, const EncoderConfig& cfg, Rng& rng) {
  for (int i = 0; i < cfg.depth; ++i)
    add_linear(ckpt, "adapter.tune." + std::to_string(i), cfg.embed_dim, cfg.adapter_tune_dim, rng, false);
  ckpt.add("adapter.up.weight", Tensor({cfg.embed_dim, cfg.adapter_tune_dim}, 0.0));
  ckpt.add("adapter.up.bias", Tensor({cfg.embed_dim}, 0.0));
}

void init_decoder(ModelCheckpoint& ckpt, const EncoderConfig& cfg, const DecoderConfig& dcfg, Rng& rng) {
  const int e = cfg.embed_dim;
  if (dcfg.blocks < 0 || dcfg.heads < 1 || e % dcfg.heads != 0 || dcfg.mlp_dim < 1)
    fail(ErrorCode::ConfigInvalid, "decoder heads must divide embed_dim; blocks >= 0");
  ckpt.add("decoder.pos", normal_tensor({cfg.tokens(), e}, 0.02, rng));
  ckpt.add("decoder.mask_token", normal_tensor({1, e}, 1.0, rng));
  for (int i = 0; i < dcfg.blocks; ++i) {
    const std::string b = "decoder.blocks." + std::to_string(i);
    for (const char* n : {"norm_t1", "norm_t2", "norm_i1", "norm_i2"}) add_norm(ckpt, key(b, n), e, false);
    add_attention(ckpt, key(b, "t2i"), e, rng, false);
    add_attention(ckpt, key(b, "i2t"), e, rng, false);
    add_mlp(ckpt, key(b, "mlp_t"), e, dcfg.mlp_dim, rng, false);
    add_mlp(ckpt, key(b, "mlp_i"), e, dcfg.mlp_dim, rng, false);
  }
  add_norm(ckpt, "decoder.norm_t", e, false);
  const auto ch = decoder_channels(cfg);
  for (std::size_t s = 1; s < ch.size(); ++s)
    add_conv_transpose(ckpt, "decoder.up." + std::to_string(s - 1), ch[s - 1], ch[s], rng);
  add_linear(ckpt, "decoder.hyper.fc1", e, e, rng, false);
  add_linear(ckpt, "decoder.hyper.fc2", e, ch.back(), rng, false);
  ckpt.add("decoder.out_bias", Tensor({1}, 0.0));
}

void init_unet(ModelCheckpoint& ckpt, const UnetConfig& cfg, Rng& rng) {
  const int c = cfg.base_channels;
  if (c < 1) fail(ErrorCode::ConfigInvalid, "unet base_channels must be >= 1");
  auto block = [&](const std::string& p, int in, int out) {
    add_conv(ckpt, key(p, "conv1"), in, out, 3, rng);
    add_conv(ckpt, key(p, "conv2"), out, out, 3, rng);
  };
  block("unet.enc1", 3, c);
  block("unet.enc2", c, 2 * c);
  block("unet.mid", 2 * c, 4 * c);
  add_conv_transpose(ckpt, "unet.up2", 4 * c, 2 * c, rng);
  block("unet.dec2", 4 * c, 2 * c);
  add_conv_transpose(ckpt, "unet.up1", 2 * c, c, rng);
  block("unet.dec1", 2 * c, c);
  add_conv(ckpt, "unet.head", c, 1, 1, rng, 0.5);
}

namespace {

// Row `out` of a [O, C, k, k] kernel becomes a centre tap reading channel `in`.
void set_identity_row(Tensor& w, std::int64_t out, std::int64_t in, real gain = 1) {
  const std::int64_t c = w.dim(1), k = w.dim(2);
  real* row = w.data() + out * c * k * k;
  std::fill(row, row + c * k * k, real(0));
  row[(in * k + k / 2) * k + k / 2] = gain;
}

}  // namespace

// The first three feature channels start as a pass-through of the input, the
// sub-pixel convolutions replicate it (nearest-neighbour start, as in ICNR)
// and residual branches start at zero, so the untrained network upsamples by
// pixel replication and training learns the correction. The tail halves the
// pass-through because the global skip doubles it.
void init_edsr(ModelCheckpoint& ckpt, const EdsrConfig& cfg, Rng& rng) {
  cfg.validate();
  const int f = cfg.feature_channels;
  const int pass = std::min(3, f);
  add_conv(ckpt, "edsr.head", 3, f, 3, rng);
  for (int c = 0; c < pass; ++c) set_identity_row(ckpt.at("edsr.head.weight"), c, c);
  for (int i = 0; i < cfg.residual_blocks; ++i) {
    const std::string b = "edsr.body." + std::to_string(i);
    add_conv(ckpt, key(b, "conv1"), f, f, 3, rng);
    add_conv(ckpt, key(b, "conv2"), f, f, 3, rng, 0.0);
  }
  for (int s = 0; s < 2; ++s) {
    const std::string name = "edsr.up." + std::to_string(s);
    add_conv(ckpt, name, f, 4 * f, 3, rng);
    for (int c = 0; c < pass; ++c)
      for (int k = 0; k < 4; ++k) set_identity_row(ckpt.at(key(name, "weight")), 4 * c + k, c);
  }
  add_conv(ckpt, "edsr.tail", f, 3, 3, rng, 0.0);
  for (int c = 0; c < 3; ++c) set_identity_row(ckpt.at("edsr.tail.weight"), c, c % pass, real(0.5));
}

std::string SegmenterConfig::serialize() const {
  std::ostringstream out;
  out << "kind=" << kind << '\n'
      << "image_size=" << encoder.image_size << '\n'
      << "patch_embed_size=" << encoder.patch_embed_size << '\n'
      << "embed_dim=" << encoder.embed_dim << '\n'
      << "depth=" << encoder.depth << '\n'
      << "heads=" << encoder.heads << '\n'
      << "window_size=" << encoder.window_size << '\n'
      << "global_attention_layers=";
  const auto globals = encoder.global_layers();
  for (std::size_t i = 0; i < globals.size(); ++i) out << (i ? "," : "") << globals[i];
  out << '\n'
      << "adapter_tune_dim=" << encoder.adapter_tune_dim << '\n'
      << "mlp_ratio=" << encoder.mlp_ratio << '\n'
      << "decoder_blocks=" << decoder.blocks << '\n'
      << "decoder_heads=" << decoder.heads << '\n'
      << "decoder_mlp_dim=" << decoder.mlp_dim << '\n'
      << "unet_base_channels=" << unet.base_channels << '\n'
      << "freeze_encoder=" << (freeze_encoder ? 1 : 0) << '\n'
      << "use_adapters=" << (use_adapters ? 1 : 0) << '\n';
  return out.str();
}

SegmenterConfig SegmenterConfig::parse(const std::string& text) {
  const auto kv = parse_pairs(text);
  SegmenterConfig c;
  if (auto it = kv.find("kind"); it != kv.end()) c.kind = it->second;
  auto& e = c.encoder;
  e.image_size = get_int(kv, "image_size", e.image_size);
  e.patch_embed_size = get_int(kv, "patch_embed_size", e.patch_embed_size);
  e.embed_dim = get_int(kv, "embed_dim", e.embed_dim);
  e.depth = get_int(kv, "depth", e.depth);
  e.heads = get_int(kv, "heads", e.heads);
  e.window_size = get_int(kv, "window_size", e.window_size);
  if (auto it = kv.find("global_attention_layers"); it != kv.end()) {
    std::istringstream in(it->second);
    std::string item;
    while (std::getline(in, item, ','))
      if (!item.empty()) e.global_attention_layers.push_back(std::stoi(item));
  }
  e.adapter_tune_dim = get_int(kv, "adapter_tune_dim", e.adapter_tune_dim);
  e.mlp_ratio = get_int(kv, "mlp_ratio", e.mlp_ratio);
  c.decoder.blocks = get_int(kv, "decoder_blocks", c.decoder.blocks);
  c.decoder.heads = get_int(kv, "decoder_heads", c.decoder.heads);
  c.decoder.mlp_dim = get_int(kv, "decoder_mlp_dim", c.decoder.mlp_dim);
  c.unet.base_channels = get_int(kv, "unet_base_channels", c.unet.base_channels);
  c.freeze_encoder = get_int(kv, "freeze_encoder", 1) != 0;
  c.use_adapters = get_int(kv, "use_adapters", 1) != 0;
  return c;
}

ModelCheckpoint init_segmenter(const SegmenterConfig& cfg, std::uint64_t seed) {
  ModelCheckpoint ckpt;
  Rng rng(seed);
  if (cfg.kind == "adapter") {
    // Separate streams so the encoder draw does not depend on adapter or decoder sizes.
    Rng enc = rng.fork(1), ada = rng.fork(2), dec = rng.fork(3);
    init_encoder(ckpt, cfg.encoder, enc, cfg.freeze_encoder);
    if (cfg.use_adapters) init_adapters(ckpt, cfg.encoder, ada);
    init_decoder(ckpt, cfg.encoder, cfg.decoder, dec);
  } else if (cfg.kind == "unet") {
    init_unet(ckpt, cfg.unet, rng);
  } else {
    fail(ErrorCode::ConfigInvalid, "unknown model kind '" + cfg.kind + "'");
  }
  ckpt.kind = cfg.kind;
  ckpt.config = cfg.serialize();
  ckpt.seed = seed;
  return ckpt;
}

Tensor segment_forward(const Tensor& image, const ModelCheckpoint& ckpt, const SegmenterConfig& cfg) {
  if (cfg.kind == "unet") return unet_baseline_forward(image, ckpt, cfg.unet);
  return decoder_forward(encoder_forward(image, ckpt, cfg.encoder, cfg.use_adapters), ckpt, cfg.encoder, cfg.decoder);
}

std::string serialize(const EdsrConfig& cfg) {
  std::ostringstream out;
  out.precision(9);
  out << "feature_channels=" << cfg.feature_channels << '\n'
      << "residual_blocks=" << cfg.residual_blocks << '\n'
      << "residual_scaling=" << cfg.residual_scaling << '\n'
      << "scale=" << cfg.scale << '\n';
  return out.str();
}

EdsrConfig parse_edsr_config(const std::string& text) {
  const auto kv = parse_pairs(text);
  EdsrConfig c;
  c.feature_channels = get_int(kv, "feature_channels", c.feature_channels);
  c.residual_blocks = get_int(kv, "residual_blocks", c.residual_blocks);
  if (auto it = kv.find("residual_scaling"); it != kv.end()) c.residual_scaling = std::stof(it->second);
  c.scale = get_int(kv, "scale", c.scale);
  c.validate();
  return c;
}

ModelCheckpoint init_edsr_checkpoint(const EdsrConfig& cfg, std::uint64_t seed) {
  ModelCheckpoint ckpt;
  Rng rng(seed);
  init_edsr(ckpt, cfg, rng);
  ckpt.kind = "edsr";
  ckpt.config = serialize(cfg);
  ckpt.seed = seed;
  return ckpt;
}

Tensor raster_to_tensor(const RasterGrid& grid) {
  const int w = grid.width(), h = grid.height(), bands = grid.bands();
  const double fs = full_scale(grid.sample_type());
  std::vector<real> v(3 * static_cast<std::size_t>(w) * h);
  for (int c = 0; c < 3; ++c) {
    const int src_band = bands >= 3 ? c : 0;
    for (int r = 0; r < h; ++r)
      for (int col = 0; col < w; ++col)
        v[(static_cast<std::size_t>(c) * h + r) * w + col] = static_cast<real>(grid.value(r, col, src_band) / fs);
  }
  return Tensor({3, h, w}, std::move(v));
}

Tensor normalize_image(const Tensor& unit_image) {
  std::vector<real> v(unit_image.values().begin(), unit_image.values().end());
  for (auto& x : v) x = (x - 0.5) * 4.0;
  return Tensor(unit_image.shape(), std::move(v));
}

Tensor mask_to_tensor(const RasterGrid& mask) {
  const int w = mask.width(), h = mask.height();
  std::vector<real> v(static_cast<std::size_t>(w) * h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) v[static_cast<std::size_t>(r) * w + c] = mask.value(r, c, 0) != 0.0 ? 1.0 : 0.0;
  return Tensor({1, h, w}, std::move(v));
}

}  // namespace CAMPSEG_NN_NAMESPACE
}  // namespace campseg::nn
