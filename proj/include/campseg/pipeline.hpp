#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "campseg/infer.hpp"
#include "campseg/nn/models.hpp"
#include "campseg/synthcamp.hpp"
#include "campseg/tiler.hpp"
#include "campseg/trainer.hpp"
#include "campseg/upscale.hpp"

namespace campseg {

struct SceneSource {
  std::string name = "synthcamp";
  bool synthetic = true;
  SceneConfig synth;
  std::filesystem::path image;  // GeoTIFF inputs when not synthetic
  std::filesystem::path mask;
};

struct UpscaleSettings {
  UpscaleMethod method = UpscaleMethod::None;
  int factor = 4;
  nn::EdsrConfig edsr;
  EdsrTrainConfig edsr_train;
  int edsr_patch = 64;  // high-resolution side of EDSR training tiles
  std::optional<std::filesystem::path> edsr_checkpoint;  // skip training, load this
};

struct ReportRun {
  std::string label;
  std::filesystem::path epochs_csv;
};

struct PipelineConfig {
  std::filesystem::path source;  // the config file itself
  std::uint64_t seed = 1;
  std::filesystem::path out = "campseg_out";
  SceneSource scene;
  std::vector<RegionSpec> regions;
  int patch = 128;
  std::optional<int> train_stride;
  std::optional<int> test_stride;
  EdgePolicy edge = EdgePolicy::Snap;
  UpscaleSettings upscale;
  nn::SegmenterConfig model;
  TrainConfig train;
  double threshold = 0.5;
  double simplify_tolerance = 0.0;
  std::vector<ReportRun> report_runs;

  TileSpec tile_spec(RegionRole role, int patch_size) const;
  StitchSpec stitch_spec() const;
};

/// Parses and fully validates an INI config. Unknown sections or keys, bad
/// values and missing input files fail with ConfigInvalid before any work.
/// `seed` and `out` override [run] seed / out.
PipelineConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed = std::nullopt,
                           std::optional<std::filesystem::path> out = std::nullopt);

/// Output layout under cfg.out.
struct RunPaths {
  std::filesystem::path root;
  std::filesystem::path scene_image() const { return root / "scene" / "image.tif"; }
  std::filesystem::path scene_truth() const { return root / "scene" / "truth.tif"; }
  std::filesystem::path patches(const std::string& set) const { return root / "patches" / set; }
  std::filesystem::path edsr_checkpoint() const { return root / "edsr.ckpt"; }
  std::filesystem::path upscale_csv() const { return root / "upscale.csv"; }
  std::filesystem::path best_checkpoint() const { return root / "best.ckpt"; }
  std::filesystem::path last_checkpoint() const { return root / "last.ckpt"; }
  std::filesystem::path epochs_csv() const { return root / "epochs.csv"; }
  std::filesystem::path prediction(const std::string& region) const { return root / "pred" / (region + ".tif"); }
  std::filesystem::path metrics_csv() const { return root / "metrics.csv"; }
  std::filesystem::path vector_base(const std::string& region) const { return root / "vector" / region; }
  std::filesystem::path report() const { return root / "report.txt"; }
};

void cmd_prepare(const PipelineConfig& cfg);
void cmd_upscale(const PipelineConfig& cfg);
void cmd_train(const PipelineConfig& cfg);
void cmd_infer(const PipelineConfig& cfg);
void cmd_eval(const PipelineConfig& cfg);
void cmd_vectorize(const PipelineConfig& cfg);
/// Returns the rendered report (also written to report.txt).
std::string cmd_report(const PipelineConfig& cfg);

/// Per-epoch IoU matrix, one column per run, the best epoch of each run marked
/// with '*' (earliest on ties).
std::string render_report(const std::vector<std::pair<std::string, std::vector<EpochLog>>>& runs);

}  // namespace campseg
