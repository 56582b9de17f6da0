#include "campseg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "campseg/error.hpp"
#include "campseg/metrics.hpp"
#include "campseg/nn/checkpoint.hpp"
#include "campseg/raster_io.hpp"
#include "campseg/shapefile.hpp"
#include "campseg/vectorize.hpp"

namespace campseg {

namespace fs = std::filesystem;

namespace {

// One INI section; every key read is remembered so leftovers can be reported.
class Section {
 public:
  Section(std::string name, std::map<std::string, std::string> values)
      : name_(std::move(name)), values_(std::move(values)) {}

  std::optional<std::string> text(const std::string& key) {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::string text(const std::string& key, const std::string& fallback) { return text(key).value_or(fallback); }

  template <typename T>
  T number(const std::string& key, T fallback) {
    const auto v = text(key);
    if (!v) return fallback;
    std::istringstream in(*v);
    T out{};
    if (!(in >> out) || !(in >> std::ws).eof()) bad(key, *v, "a number");
    return out;
  }

  bool flag(const std::string& key, bool fallback) {
    const auto v = text(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    bad(key, *v, "true or false");
  }

  std::vector<std::string> list(const std::string& key) {
    std::vector<std::string> out;
    std::istringstream in(text(key, ""));
    std::string item;
    while (std::getline(in, item, ',')) {
      item.erase(0, item.find_first_not_of(" \t"));
      item.erase(item.find_last_not_of(" \t") + 1);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  [[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& expected) const {
    fail(ErrorCode::ConfigInvalid, "[" + name_ + "] " + key + " = '" + value + "': expected " + expected);
  }

  void check_all_used() const {
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) fail(ErrorCode::ConfigInvalid, "[" + name_ + "] unknown key '" + k + "'");
  }

 private:
  std::string name_;
  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

// Any ConfigInvalid raised inside gets the offending file name prepended.
template <typename F>
auto with_context(const fs::path& path, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ConfigInvalid) throw;
    std::string msg = e.what();
    msg = msg.substr(msg.find(": ") + 2);
    fail(ErrorCode::ConfigInvalid, path.string() + ": " + msg);
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

TileSpec PipelineConfig::tile_spec(RegionRole role, int patch_size) const {
  const bool test = role == RegionRole::Test;
  const auto& explicit_stride = test ? test_stride : train_stride;
  int stride = default_stride(patch_size, role);
  // Strides are given for the model-sized patch; small patches scale them down.
  if (explicit_stride) stride = std::max(1, *explicit_stride * patch_size / patch);
  return {patch_size, stride, edge};
}

StitchSpec PipelineConfig::stitch_spec() const {
  return {.tile = {patch, test_stride.value_or(default_stride(patch, RegionRole::Test)), EdgePolicy::Snap},
          .threshold = threshold};
}

PipelineConfig load_config(const fs::path& path, std::optional<std::uint64_t> seed,
                           std::optional<fs::path> out) {
  return with_context(path, [&] {
    if (!fs::exists(path)) fail(ErrorCode::ConfigInvalid, "config file not found");
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::ini_parser::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      fail(ErrorCode::ConfigInvalid, std::string("cannot parse: ") + e.message() + " (line " +
                                         std::to_string(e.line()) + ")");
    }
    std::map<std::string, Section> sections;
    for (const auto& [name, node] : tree) {
      if (node.empty() && !node.data().empty())
        fail(ErrorCode::ConfigInvalid, "key '" + name + "' outside any section");
      std::map<std::string, std::string> values;
      for (const auto& [k, v] : node) values[k] = v.data();
      sections.emplace(name, Section(name, std::move(values)));
    }
    auto section = [&](const std::string& name) -> Section& {
      return sections.try_emplace(name, Section(name, {})).first->second;
    };
    const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");

    PipelineConfig cfg;
    cfg.source = path;
    auto& run = section("run");
    cfg.seed = seed.value_or(run.number<std::uint64_t>("seed", 1));
    cfg.out = out.value_or(resolve(base, run.text("out", "campseg_out")));
    cfg.model.kind = run.text("model", "adapter");
    if (cfg.model.kind != "adapter" && cfg.model.kind != "unet")
      run.bad("model", cfg.model.kind, "adapter or unet");

    auto& sc = section("scene");
    cfg.scene.name = sc.text("name", "synthcamp");
    const auto image = sc.text("image");
    cfg.scene.synthetic = !image;
    if (image) {
      cfg.scene.image = resolve(base, *image);
      const auto mask = sc.text("mask");
      if (!mask) fail(ErrorCode::ConfigInvalid, "[scene] image needs a matching mask");
      cfg.scene.mask = resolve(base, *mask);
      for (const auto& p : {cfg.scene.image, cfg.scene.mask})
        if (!fs::exists(p)) fail(ErrorCode::ConfigInvalid, "[scene] input not found: " + p.string());
    }
    auto& s = cfg.scene.synth;
    s.width = sc.number("width", s.width);
    s.height = sc.number("height", s.height);
    s.dwelling_count = sc.number("dwellings", s.dwelling_count);
    s.dwelling_size_min = sc.number("size_min", s.dwelling_size_min);
    s.dwelling_size_max = sc.number("size_max", s.dwelling_size_max);
    s.shape_mix.rectangle = sc.number("mix_rectangle", s.shape_mix.rectangle);
    s.shape_mix.circle = sc.number("mix_circle", s.shape_mix.circle);
    s.shape_mix.l_shape = sc.number("mix_l_shape", s.shape_mix.l_shape);
    s.background_texture_scale = sc.number("texture_scale", s.background_texture_scale);
    s.occluder_fraction = sc.number("occluder_fraction", s.occluder_fraction);
    s.camouflage_fraction = sc.number("camouflage_fraction", s.camouflage_fraction);
    s.noise_sigma = sc.number("noise_sigma", s.noise_sigma);
    s.seed = sc.number<std::uint64_t>("seed", cfg.seed);
    s.origin_x = sc.number("origin_x", s.origin_x);
    s.origin_y = sc.number("origin_y", s.origin_y);
    s.pixel_size = sc.number("pixel_size", s.pixel_size);
    if (auto crs = sc.text("crs")) s.crs_text = *crs;
    if (cfg.scene.synthetic) s.validate();

    auto& tiles = section("tiles");
    cfg.patch = tiles.number("patch", cfg.patch);
    if (tiles.text("train_stride")) cfg.train_stride = tiles.number("train_stride", 0);
    if (tiles.text("test_stride")) cfg.test_stride = tiles.number("test_stride", 0);
    const auto edge = tiles.text("edge", "snap");
    if (edge == "snap")
      cfg.edge = EdgePolicy::Snap;
    else if (edge == "drop")
      cfg.edge = EdgePolicy::Drop;
    else
      tiles.bad("edge", edge, "snap or drop");
    for (const auto& op : tiles.list("augment")) cfg.train.augment_ops.push_back(parse_augment_op(op));
    for (auto st : {cfg.train_stride, cfg.test_stride})
      if (st && (*st < 1 || *st > cfg.patch)) fail(ErrorCode::ConfigInvalid, "[tiles] strides must lie in [1, patch]");
    TileSpec{cfg.patch, cfg.patch, cfg.edge}.validate();

    auto& up = section("upscale");
    cfg.upscale.method = parse_upscale_method(up.text("method", "none"));
    cfg.upscale.factor = up.number("factor", cfg.upscale.factor);
    auto& ec = cfg.upscale.edsr;
    ec.feature_channels = up.number("edsr_channels", ec.feature_channels);
    ec.residual_blocks = up.number("edsr_blocks", ec.residual_blocks);
    ec.residual_scaling = static_cast<nn::real>(up.number("edsr_residual_scaling", static_cast<double>(ec.residual_scaling)));
    ec.validate();
    auto& et = cfg.upscale.edsr_train;
    et.epochs = up.number("edsr_epochs", et.epochs);
    et.batch_size = up.number("edsr_batch", et.batch_size);
    et.lr = up.number("edsr_lr", et.lr);
    et.lr_min = up.number("edsr_lr_min", et.lr_min);
    et.seed = cfg.seed;
    cfg.upscale.edsr_patch = up.number("edsr_patch", cfg.upscale.edsr_patch);
    if (auto ck = up.text("edsr_checkpoint")) {
      cfg.upscale.edsr_checkpoint = resolve(base, *ck);
      if (!fs::exists(*cfg.upscale.edsr_checkpoint))
        fail(ErrorCode::ConfigInvalid, "[upscale] edsr_checkpoint not found");
    }
    if (cfg.upscale.factor < 1) fail(ErrorCode::ConfigInvalid, "[upscale] factor must be >= 1");
    if (cfg.upscale.method == UpscaleMethod::Edsr && cfg.upscale.factor != 4)
      fail(ErrorCode::ConfigInvalid, "[upscale] EDSR upscales by exactly 4");
    if (cfg.upscale.method != UpscaleMethod::None && cfg.patch % cfg.upscale.factor != 0)
      fail(ErrorCode::ConfigInvalid, "[tiles] patch must be divisible by the upscale factor");
    if (cfg.upscale.edsr_patch < 4 || cfg.upscale.edsr_patch % 4 != 0)
      fail(ErrorCode::ConfigInvalid, "[upscale] edsr_patch must be a positive multiple of 4");
    if (et.epochs < 1 || et.batch_size < 1 || !(et.lr > 0) || et.lr_min > et.lr)
      fail(ErrorCode::ConfigInvalid, "[upscale] invalid EDSR training settings");

    auto& enc = section("encoder");
    auto& e = cfg.model.encoder;
    e.image_size = cfg.patch;
    e.patch_embed_size = enc.number("patch_embed_size", e.patch_embed_size);
    e.embed_dim = enc.number("embed_dim", e.embed_dim);
    e.depth = enc.number("depth", e.depth);
    e.heads = enc.number("heads", e.heads);
    e.window_size = enc.number("window_size", e.window_size);
    for (const auto& g : enc.list("global_layers")) e.global_attention_layers.push_back(std::stoi(g));
    e.adapter_tune_dim = enc.number("adapter_tune_dim", e.adapter_tune_dim);
    e.mlp_ratio = enc.number("mlp_ratio", e.mlp_ratio);
    cfg.model.use_adapters = enc.flag("adapters", true);
    auto& dec = section("decoder");
    cfg.model.decoder.blocks = dec.number("blocks", cfg.model.decoder.blocks);
    cfg.model.decoder.heads = dec.number("heads", cfg.model.decoder.heads);
    cfg.model.decoder.mlp_dim = dec.number("mlp_dim", cfg.model.decoder.mlp_dim);
    cfg.model.unet.base_channels = section("unet").number("base_channels", cfg.model.unet.base_channels);
    if (cfg.model.kind == "adapter") e.validate();
    if (cfg.model.kind == "unet" && cfg.patch % 4 != 0)
      fail(ErrorCode::ConfigInvalid, "[tiles] the U-Net needs a patch divisible by 4");
    if (cfg.model.unet.base_channels < 1) fail(ErrorCode::ConfigInvalid, "[unet] base_channels must be >= 1");

    auto& tr = section("train");
    auto& t = cfg.train;
    t.epochs = tr.number("epochs", t.epochs);
    t.batch_size = tr.number("batch_size", cfg.model.kind == "unet" ? 8 : 1);
    t.seed = cfg.seed;
    t.lr_init = tr.number("lr_init", t.lr_init);
    t.lr_min = tr.number("lr_min", t.lr_min);
    t.weight_decay = tr.number("weight_decay", t.weight_decay);
    t.schedule = parse_lr_schedule(tr.text("schedule", "cosine"));
    t.plateau_patience = tr.number("plateau_patience", t.plateau_patience);
    t.plateau_factor = tr.number("plateau_factor", t.plateau_factor);
    t.freeze_encoder = tr.flag("freeze_encoder", true);
    t.loss_iou_weight = tr.number("loss_iou_weight", t.loss_iou_weight);
    cfg.model.freeze_encoder = t.freeze_encoder;
    t.validate();

    auto& inf = section("infer");
    cfg.threshold = inf.number("threshold", cfg.threshold);
    auto& vec = section("vector");
    cfg.simplify_tolerance = vec.number("simplify", cfg.simplify_tolerance);
    if (!(cfg.simplify_tolerance >= 0)) fail(ErrorCode::ConfigInvalid, "[vector] simplify must be >= 0");
    cfg.stitch_spec().validate();

    auto& rep = section("report");
    for (const auto& item : rep.list("runs")) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) rep.bad("runs", item, "label=path/to/epochs.csv");
      cfg.report_runs.push_back({item.substr(0, eq), resolve(base, item.substr(eq + 1))});
    }

    for (auto& [name, sec] : sections) {
      if (!name.starts_with("region.")) continue;
      RegionSpec r;
      r.name = name.substr(7);
      if (r.name.empty() || r.name.find_first_of(" /\\") != std::string::npos)
        fail(ErrorCode::ConfigInvalid, "[" + name + "] region names must be non-empty without spaces or slashes");
      const auto role = sec.text("role");
      if (!role) fail(ErrorCode::ConfigInvalid, "[" + name + "] needs a role");
      r.role = parse_region_role(*role);
      const auto win = sec.list("window");
      if (win.size() != 4) sec.bad("window", sec.text("window", ""), "col_off, row_off, width, height");
      r.window = {std::stoi(win[0]), std::stoi(win[1]), std::stoi(win[2]), std::stoi(win[3])};
      cfg.regions.push_back(r);
    }
    if (cfg.regions.empty()) fail(ErrorCode::ConfigInvalid, "no [region.NAME] sections");

    const std::set<std::string> known = {"run", "scene", "tiles", "upscale", "encoder", "decoder",
                                         "unet", "train", "infer", "vector", "report"};
    for (const auto& [name, sec] : sections) {
      if (!known.count(name) && !name.starts_with("region.")) fail(ErrorCode::ConfigInvalid, "unknown section [" + name + "]");
      sec.check_all_used();
    }

    // Region windows are checked against the scene size; file inputs are read
    // for their header only once, here.
    int w = s.width, h = s.height;
    if (!cfg.scene.synthetic) {
      const auto img = read_geotiff(cfg.scene.image);
      w = img.grid.width();
      h = img.grid.height();
    }
    validate_regions(cfg.regions, w, h);
    for (const auto& r : cfg.regions) {
      const int size = r.role == RegionRole::TrainSmall && cfg.upscale.method != UpscaleMethod::None
                           ? cfg.patch / cfg.upscale.factor
                           : cfg.patch;
      if (r.window.width < size || r.window.height < size)
        fail(ErrorCode::ConfigInvalid, "region '" + r.name + "' is smaller than one patch");
    }
    return cfg;
  });
}

namespace {

void note(const std::string& msg) { std::cerr << "campseg: " << msg << '\n'; }

struct SceneData {
  RasterGrid image;
  RasterGrid truth;
  GeoTransform geo;
};

SceneData load_scene(const PipelineConfig& cfg) {
  const RunPaths paths{cfg.out};
  if (!fs::exists(paths.scene_image()) || !fs::exists(paths.scene_truth()))
    fail(ErrorCode::IoFailure, "scene rasters missing under " + cfg.out.string() + "; run 'prepare' first");
  auto img = read_geotiff(paths.scene_image());
  auto truth = read_geotiff(paths.scene_truth());
  return {std::move(img.grid), std::move(truth.grid), img.geo};
}

bool small_upscaled(const PipelineConfig& cfg, RegionRole role) {
  return role == RegionRole::TrainSmall && cfg.upscale.method != UpscaleMethod::None;
}

std::vector<PatchRecord> patches_for(const PipelineConfig& cfg, const SceneData& scene, RegionRole role, int size) {
  std::vector<PatchRecord> out;
  for (const auto& r : cfg.regions) {
    if (r.role != role) continue;
    auto p = extract_patches(scene.image, scene.geo, r, cfg.tile_spec(role, size), scene.truth);
    for (auto& x : p) out.push_back(std::move(x));
  }
  return out;
}

bool has_role(const PipelineConfig& cfg, RegionRole role) {
  return std::any_of(cfg.regions.begin(), cfg.regions.end(), [&](const RegionSpec& r) { return r.role == role; });
}

std::vector<PatchRecord> load_set(const RunPaths& paths, const std::string& set) {
  if (!fs::exists(paths.patches(set) / "manifest.txt"))
    fail(ErrorCode::IoFailure, "patch set '" + set + "' missing under " + paths.root.string() +
                                   "; run 'prepare' (and 'upscale' for upscaled small sets) first");
  return load_patch_set(paths.patches(set));
}

nn::ModelCheckpoint load_edsr(const PipelineConfig& cfg) {
  const RunPaths paths{cfg.out};
  const fs::path p = cfg.upscale.edsr_checkpoint.value_or(paths.edsr_checkpoint());
  return nn::load_checkpoint(p);
}

}  // namespace

void cmd_prepare(const PipelineConfig& cfg) {
  const RunPaths paths{cfg.out};
  SceneData scene;
  if (cfg.scene.synthetic) {
    auto s = generate_scene(cfg.scene.synth);
    note("generated scene " + std::to_string(s.image.width()) + "x" + std::to_string(s.image.height()) + " with " +
         std::to_string(s.placed) + " dwellings");
    scene = {std::move(s.image), std::move(s.mask), s.geo};
  } else {
    auto img = read_geotiff(cfg.scene.image);
    auto mask = read_geotiff(cfg.scene.mask, img.geo);
    if (mask.grid.width() != img.grid.width() || mask.grid.height() != img.grid.height())
      fail(ErrorCode::ShapeMismatch, "scene mask is not congruent with the image");
    // Any nonzero label counts as foreground.
    RasterGrid truth(mask.grid.width(), mask.grid.height(), 1, SampleType::UInt8);
    for (int r = 0; r < truth.height(); ++r)
      for (int c = 0; c < truth.width(); ++c) truth.at<std::uint8_t>(r, c) = mask.grid.value(r, c) != 0 ? 255 : 0;
    scene = {std::move(img.grid), std::move(truth), img.geo};
  }
  fs::create_directories(paths.scene_image().parent_path());
  write_geotiff(scene.image, scene.geo, paths.scene_image());
  write_geotiff(scene.truth, scene.geo, paths.scene_truth());

  fs::remove_all(paths.root / "patches");
  for (auto role : {RegionRole::TrainLarge, RegionRole::TrainSmall, RegionRole::Validation, RegionRole::Test}) {
    if (!has_role(cfg, role)) continue;
    const bool small = small_upscaled(cfg, role);
    const auto patches = patches_for(cfg, scene, role, small ? cfg.patch / cfg.upscale.factor : cfg.patch);
    const std::string set = to_string(role) + (small ? "_lr" : "");
    save_patch_set(paths.patches(set), patches);
    note(std::to_string(patches.size()) + " patches in " + set);
  }
}

void cmd_upscale(const PipelineConfig& cfg) {
  const RunPaths paths{cfg.out};
  if (cfg.upscale.method == UpscaleMethod::None) {
    note("upscale method is 'none'; nothing to do");
    return;
  }
  std::optional<nn::ModelCheckpoint> edsr;
  if (cfg.upscale.method == UpscaleMethod::Edsr) {
    if (cfg.upscale.edsr_checkpoint) {
      edsr = load_edsr(cfg);
    } else {
      // Self-supervised pairs: high-resolution tiles of the training regions
      // against their box-averaged low-resolution versions.
      const SceneData scene = load_scene(cfg);
      const int hr = cfg.upscale.edsr_patch;
      std::vector<SrPair> pairs;
      for (const auto& r : cfg.regions) {
        if (r.role != RegionRole::TrainLarge && r.role != RegionRole::TrainSmall) continue;
        if (r.window.width < hr || r.window.height < hr) continue;
        for (const auto& p : extract_patches(scene.image, scene.geo, r, {hr, hr, EdgePolicy::Drop}))
          pairs.emplace_back(degrade(p.image, 4), p.image);
      }
      note("training EDSR on " + std::to_string(pairs.size()) + " pairs");
      edsr = nn::init_edsr_checkpoint(cfg.upscale.edsr, cfg.seed);
      train_edsr(*edsr, cfg.upscale.edsr, pairs, cfg.upscale.edsr_train, [](int e, double loss) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "edsr epoch %d loss %.6f", e + 1, loss);
        note(buf);
      });
      nn::save_checkpoint(*edsr, paths.edsr_checkpoint());

      // PSNR of the three upscalers on the validation regions.
      std::ofstream csv(paths.upscale_csv(), std::ios::trunc);
      csv << "method,psnr\n";
      std::vector<SrPair> held;
      for (const auto& r : cfg.regions)
        if (r.role == RegionRole::Validation && r.window.width >= hr && r.window.height >= hr)
          for (const auto& p : extract_patches(scene.image, scene.geo, r, {hr, hr, EdgePolicy::Drop}))
            held.emplace_back(degrade(p.image, 4), p.image);
      for (auto m : {UpscaleMethod::Nearest, UpscaleMethod::Bilinear, UpscaleMethod::Edsr}) {
        double sum = 0.0;
        for (const auto& [lo, hi] : held) sum += psnr(upscale(lo, m, 4, &*edsr), hi);
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.4f", held.empty() ? std::nan("") : sum / held.size());
        csv << to_string(m) << ',' << buf << '\n';
      }
    }
  }

  if (!has_role(cfg, RegionRole::TrainSmall)) {
    note("no train_small regions; only the upscaler was prepared");
    return;
  }
  auto small = load_set(paths, "train_small_lr");
  std::vector<PatchRecord> up;
  up.reserve(small.size());
  for (auto& p : small) {
    PatchRecord q = p;
    q.image = upscale(p.image, cfg.upscale.method, cfg.upscale.factor, edsr ? &*edsr : nullptr);
    if (p.mask) q.mask = upscale_nearest(*p.mask, cfg.upscale.factor);
    q.geo = p.geo.refined(cfg.upscale.factor);
    up.push_back(std::move(q));
  }
  fs::remove_all(paths.patches("train_small"));
  save_patch_set(paths.patches("train_small"), up);
  note(std::to_string(up.size()) + " patches upscaled with " + to_string(cfg.upscale.method));
}

void cmd_train(const PipelineConfig& cfg) {
  const RunPaths paths{cfg.out};
  std::vector<PatchRecord> train_set;
  for (auto role : {RegionRole::TrainLarge, RegionRole::TrainSmall}) {
    if (!has_role(cfg, role)) continue;
    for (auto& p : load_set(paths, to_string(role))) train_set.push_back(std::move(p));
  }
  if (!has_role(cfg, RegionRole::Validation)) fail(ErrorCode::EmptyDataset, "no validation region configured");
  const auto val_set = load_set(paths, "validation");

  auto ckpt = nn::init_segmenter(cfg.model, cfg.seed);
  note("training " + cfg.model.kind + " (" + std::to_string(ckpt.parameter_count()) + " parameters) on " +
       std::to_string(train_set.size()) + " patches");
  auto result = train(ckpt, train_set, val_set, cfg.train, [](const EpochLog& l) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "epoch %d loss %.4f val_iou %.4f lr %.3g (%.1f s)", l.epoch, l.train_loss,
                  l.val_iou, l.lr, l.wall_time);
    note(buf);
  });
  nn::save_checkpoint(result.best, paths.best_checkpoint());
  nn::save_checkpoint(result.last, paths.last_checkpoint());
  write_epoch_csv(result.logs, paths.epochs_csv());
  note("best epoch " + std::to_string(result.best_epoch));
}

void cmd_infer(const PipelineConfig& cfg) {
  const RunPaths paths{cfg.out};
  if (!has_role(cfg, RegionRole::Test)) fail(ErrorCode::EmptyDataset, "no test region configured");
  const auto model = checkpoint_tile_model(nn::load_checkpoint(paths.best_checkpoint()));
  const SceneData scene = load_scene(cfg);
  fs::create_directories(paths.prediction("x").parent_path());
  for (const auto& r : cfg.regions) {
    if (r.role != RegionRole::Test) continue;
    const auto crop = scene.image.crop(r.window.col_off, r.window.row_off, r.window.width, r.window.height);
    const auto logits = sliding_inference(crop, model, cfg.stitch_spec());
    write_geotiff(binarize(logits, cfg.threshold), scene.geo.translated(r.window.col_off, r.window.row_off),
                  paths.prediction(r.name));
    note("predicted " + r.name);
  }
}

void cmd_eval(const PipelineConfig& cfg) {
  const RunPaths paths{cfg.out};
  const SceneData scene = load_scene(cfg);
  std::vector<MetricRow> rows;
  ConfusionCounts total;
  for (const auto& r : cfg.regions) {
    if (r.role != RegionRole::Test) continue;
    if (!fs::exists(paths.prediction(r.name)))
      fail(ErrorCode::IoFailure, "no prediction for region '" + r.name + "'; run 'infer' first");
    const auto pred = read_geotiff(paths.prediction(r.name)).grid;
    const auto truth = scene.truth.crop(r.window.col_off, r.window.row_off, r.window.width, r.window.height);
    const auto counts = accumulate(pred, truth);
    total += counts;
    rows.push_back({cfg.scene.name, cfg.model.kind, r.name, counts});
  }
  if (rows.empty()) fail(ErrorCode::EmptyDataset, "no test region configured");
  if (rows.size() > 1) rows.push_back({cfg.scene.name, cfg.model.kind, "all", total});
  write_metrics_csv(rows, paths.metrics_csv());
  note("test IoU " + format_metric(iou(total)));
}

void cmd_vectorize(const PipelineConfig& cfg) {
  const RunPaths paths{cfg.out};
  for (const auto& r : cfg.regions) {
    if (r.role != RegionRole::Test) continue;
    if (!fs::exists(paths.prediction(r.name)))
      fail(ErrorCode::IoFailure, "no prediction for region '" + r.name + "'; run 'infer' first");
    const auto pred = read_geotiff(paths.prediction(r.name));
    auto features = trace_polygons(pred.grid, pred.geo);
    if (cfg.simplify_tolerance > 0)
      for (auto& f : features) f = simplify(f, cfg.simplify_tolerance).feature;
    write_shapefile(features, pred.geo.crs_text, paths.vector_base(r.name));
    note(std::to_string(features.size()) + " polygons for " + r.name);
  }
}

std::string render_report(const std::vector<std::pair<std::string, std::vector<EpochLog>>>& runs) {
  std::size_t rows = 0;
  std::vector<int> best(runs.size(), 0);
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const auto& logs = runs[k].second;
    rows = std::max(rows, logs.size());
    double b = -std::numeric_limits<double>::infinity();
    for (const auto& l : logs)
      if (l.val_iou > b) {
        b = l.val_iou;
        best[k] = l.epoch;
      }
  }
  std::ostringstream out;
  out << "Validation IoU per epoch (* marks the best epoch)\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-6s", "epoch");
  out << buf;
  for (const auto& [label, logs] : runs) {
    std::snprintf(buf, sizeof buf, " %12s", label.c_str());
    out << buf;
  }
  out << '\n';
  for (std::size_t i = 0; i < rows; ++i) {
    std::snprintf(buf, sizeof buf, "%-6zu", i + 1);
    out << buf;
    for (std::size_t k = 0; k < runs.size(); ++k) {
      const auto& logs = runs[k].second;
      if (i >= logs.size()) {
        std::snprintf(buf, sizeof buf, " %12s", "-");
      } else {
        const auto& l = logs[i];
        char v[32];
        std::snprintf(v, sizeof v, "%.3f%c", l.val_iou, l.epoch == best[k] ? '*' : ' ');
        std::snprintf(buf, sizeof buf, " %12s", v);
      }
      out << buf;
    }
    out << '\n';
  }
  for (std::size_t k = 0; k < runs.size(); ++k)
    out << runs[k].first << ": best epoch " << (best[k] ? std::to_string(best[k]) : std::string("none")) << '\n';
  return out.str();
}

std::string cmd_report(const PipelineConfig& cfg) {
  const RunPaths paths{cfg.out};
  std::vector<std::pair<std::string, std::vector<EpochLog>>> runs;
  runs.emplace_back(cfg.model.kind, read_epoch_csv(paths.epochs_csv()));
  for (const auto& r : cfg.report_runs) runs.emplace_back(r.label, read_epoch_csv(r.epochs_csv));
  const std::string text = render_report(runs);
  std::ofstream out(paths.report(), std::ios::trunc);
  out << text;
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + paths.report().string());
  return text;
}

}  // namespace campseg
