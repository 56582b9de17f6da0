#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "campseg/pipeline.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"

using namespace campseg;
using campseg::testing::code_of;
using campseg::testing::TempDir;
namespace fs = std::filesystem;

namespace {

const char* kBase = R"([run]
seed = 5
out = out
model = unet

[scene]
width = 96
height = 96
dwellings = 20
size_min = 3
size_max = 7

[region.big]
role = train_large
window = 0, 0, 96, 48

[region.small]
role = train_small
window = 0, 48, 48, 24

[region.val]
role = validation
window = 48, 48, 48, 24

[region.hold]
role = test
window = 0, 72, 96, 24

[tiles]
patch = 16
augment = hflip

[upscale]
method = bilinear

[unet]
base_channels = 4

[train]
epochs = 2
lr_init = 1e-3
lr_min = 1e-5
)";

fs::path write_config(const TempDir& dir, const std::string& text, const std::string& name = "run.ini") {
  std::ofstream(dir / name) << text;
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config: defaults, relative output, overrides") {
  TempDir dir("cfg");
  const auto cfg = load_config(write_config(dir, kBase));
  CHECK(cfg.seed == 5);
  CHECK(cfg.out == dir / "out");
  CHECK(cfg.model.kind == "unet");
  CHECK(cfg.regions.size() == 4);
  CHECK(cfg.model.encoder.image_size == 16);
  CHECK(cfg.train.batch_size == 8);
  CHECK(cfg.train.augment_ops == std::vector<AugmentOp>{AugmentOp::HFlip});
  CHECK(cfg.upscale.method == UpscaleMethod::Bilinear);
  const auto o = load_config(dir / "run.ini", 77, dir / "elsewhere");
  CHECK(o.seed == 77);
  CHECK(o.train.seed == 77);
  CHECK(o.out == dir / "elsewhere");
}

TEST_CASE("bad configs are rejected before any work") {
  TempDir dir("cfgbad");
  const std::string base = kBase;
  const auto bad = [&](const std::string& text) { return code_of([&] { load_config(write_config(dir, text)); }); };
  CHECK(bad(base + "\n[extra]\nx = 1\n") == ErrorCode::ConfigInvalid);
  CHECK(bad(base + "\n[vector]\nsimplfy = 1\n") == ErrorCode::ConfigInvalid);
  CHECK(bad(base + "\n[infer]\nthreshold = 2\n") == ErrorCode::ConfigInvalid);
  CHECK(bad(base + "\n[region.overlap]\nrole = test\nwindow = 0, 0, 16, 16\n") == ErrorCode::RegionInvalid);
  CHECK(bad(base + "\n[region.tiny]\nrole = test\nwindow = 60, 90, 8, 6\n") == ErrorCode::ConfigInvalid);
  CHECK(bad("[run]\nseed = 1\n") == ErrorCode::ConfigInvalid);
  std::string nonnum = base;
  nonnum.replace(nonnum.find("epochs = 2"), 10, "epochs = two");
  CHECK(bad(nonnum) == ErrorCode::ConfigInvalid);
  CHECK(code_of([&] { load_config(dir / "absent.ini"); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("report marks the earliest best epoch of each run") {
  std::vector<EpochLog> a(4), b(2);
  const double ia[] = {0.1, 0.5, 0.5, 0.2}, ib[] = {0.3, 0.2};
  for (int i = 0; i < 4; ++i) a[i] = {i + 1, 0, ia[i]};
  for (int i = 0; i < 2; ++i) b[i] = {i + 1, 0, ib[i]};
  const auto text = render_report({{"adapter", a}, {"unet", b}});
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() >= 6);
  CHECK(lines[2].find("0.300*") != std::string::npos);
  CHECK(lines[3].find("0.500*") != std::string::npos);
  CHECK(lines[4].find('*') == std::string::npos);
  CHECK(lines[5].find(" -") != std::string::npos);
  CHECK(text.find("adapter: best epoch 2") != std::string::npos);
  CHECK(text.find("unet: best epoch 1") != std::string::npos);
}

TEST_CASE("steps before prepare fail with IoFailure") {
  TempDir dir("early");
  const auto cfg = load_config(write_config(dir, kBase));
  CHECK(code_of([&] { cmd_train(cfg); }) == ErrorCode::IoFailure);
  CHECK(code_of([&] { cmd_infer(cfg); }) == ErrorCode::IoFailure);
}

TEST_CASE("end-to-end run on a small synthetic scene") {
  TempDir dir("e2e");
  const auto cfg = load_config(write_config(dir, kBase));
  const RunPaths paths{cfg.out};

  cmd_prepare(cfg);
  const auto img0 = slurp(paths.scene_image());
  const auto man0 = slurp(paths.patches("train_large") / "manifest.txt");
  cmd_prepare(cfg);
  CHECK(slurp(paths.scene_image()) == img0);
  CHECK(slurp(paths.patches("train_large") / "manifest.txt") == man0);

  // 96x48 at patch 16, default training stride 8 -> 11x5; the small region is tiled at 4 px.
  CHECK(load_patch_set(paths.patches("train_large")).size() == 55);
  const auto lr = load_patch_set(paths.patches("train_small_lr"));
  REQUIRE_FALSE(lr.empty());
  CHECK(lr[0].image.width() == 4);

  cmd_upscale(cfg);
  const auto up = load_patch_set(paths.patches("train_small"));
  REQUIRE(up.size() == lr.size());
  CHECK(up[0].image.width() == 16);
  CHECK(up[0].mask->width() == 16);

  cmd_train(cfg);
  CHECK(fs::exists(paths.best_checkpoint()));
  CHECK(fs::exists(paths.last_checkpoint()));
  CHECK(read_epoch_csv(paths.epochs_csv()).size() == 2);

  cmd_infer(cfg);
  cmd_eval(cfg);
  cmd_vectorize(cfg);
  CHECK(fs::exists(paths.prediction("hold")));
  CHECK(fs::exists(paths.vector_base("hold").replace_extension(".shp")));
  const auto metrics = slurp(paths.metrics_csv());
  CHECK(metrics.starts_with("scene,model,dataset,iou,f1,precision,recall\n"));
  CHECK(metrics.find(",unet,") != std::string::npos);

  const auto report = cmd_report(cfg);
  CHECK(report.find('*') != std::string::npos);
  CHECK(slurp(paths.report()) == report);
}
