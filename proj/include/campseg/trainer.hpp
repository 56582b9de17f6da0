#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "campseg/nn/checkpoint.hpp"
#include "campseg/nn/models.hpp"
#include "campseg/tiler.hpp"

namespace campseg {

enum class LrSchedule { Cosine, Plateau };
std::string to_string(LrSchedule s);
LrSchedule parse_lr_schedule(const std::string& text);

struct TrainConfig {
  int epochs = 15;
  int batch_size = 1;
  std::uint64_t seed = 1;
  double lr_init = 2e-4;
  double lr_min = 1e-7;
  double weight_decay = 0.01;
  LrSchedule schedule = LrSchedule::Cosine;
  int plateau_patience = 5;
  double plateau_factor = 0.2;
  bool freeze_encoder = true;
  std::vector<AugmentOp> augment_ops;
  double loss_iou_weight = 1.0;

  void validate() const;
};

/// lr_min + (lr_init - lr_min)(1 + cos(pi e / (E - 1))) / 2; lr_init when E == 1.
double cosine_lr(int epoch, const TrainConfig& cfg);

struct PlateauState {
  double lr = 0.0;
  double best = -1.0;  // below any IoU, so the first epoch always counts as an improvement
  int stall = 0;
};

/// Feeds one epoch's validation IoU. After `plateau_patience` consecutive epochs
/// without an improvement above 1e-4 the rate drops by `plateau_factor`
/// (floored at lr_min) and the counter restarts. Returns the new rate.
double plateau_lr(PlateauState& state, double metric, const TrainConfig& cfg);

constexpr double kPlateauThreshold = 1e-4;

/// One row per epoch; epoch is 1-based. Undefined metrics are NaN.
struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_iou = 0.0;
  double val_f1 = 0.0;
  double val_precision = 0.0;
  double val_recall = 0.0;
  double lr = 0.0;
  double wall_time = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> logs;
  nn::ModelCheckpoint best;
  nn::ModelCheckpoint last;
  int best_epoch = 0;
};

/// Trains `ckpt` (a segmenter from init_segmenter) in place. Training patches
/// are expanded once with `augment_ops`; every epoch shuffles them with a seeded
/// stream, runs mini-batches with gradients averaged over the batch, then scores
/// the full validation set. Best is the first epoch reaching the maximum IoU.
TrainResult train(nn::ModelCheckpoint& ckpt, const std::vector<PatchRecord>& train_set,
                  const std::vector<PatchRecord>& val_set, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch = nullptr);

/// Columns: epoch, train_loss, val_iou, val_f1, val_precision, val_recall, lr, wall_time.
void write_epoch_csv(const std::vector<EpochLog>& logs, const std::filesystem::path& path);
std::vector<EpochLog> read_epoch_csv(const std::filesystem::path& path);

}  // namespace campseg
