#include "campseg/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "campseg/error.hpp"
#include "campseg/metrics.hpp"
#include "campseg/nn/ops.hpp"
#include "campseg/nn/optim.hpp"
#include "campseg/random.hpp"

namespace campseg {

std::string to_string(LrSchedule s) { return s == LrSchedule::Cosine ? "cosine" : "plateau"; }

LrSchedule parse_lr_schedule(const std::string& text) {
  if (text == "cosine") return LrSchedule::Cosine;
  if (text == "plateau") return LrSchedule::Plateau;
  fail(ErrorCode::ConfigInvalid, "unknown schedule '" + text + "'");
}

void TrainConfig::validate() const {
  if (epochs < 1) fail(ErrorCode::ConfigInvalid, "epochs must be >= 1");
  if (batch_size < 1) fail(ErrorCode::ConfigInvalid, "batch_size must be >= 1");
  if (!(lr_min >= 0.0 && lr_min <= lr_init)) fail(ErrorCode::ConfigInvalid, "need 0 <= lr_min <= lr_init");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) fail(ErrorCode::ConfigInvalid, "plateau_factor must lie in (0, 1)");
  if (plateau_patience < 1) fail(ErrorCode::ConfigInvalid, "plateau_patience must be >= 1");
  if (!(loss_iou_weight >= 0.0)) fail(ErrorCode::ConfigInvalid, "loss_iou_weight must be >= 0");
}

double cosine_lr(int epoch, const TrainConfig& cfg) {
  if (cfg.epochs <= 1) return cfg.lr_init;
  return cfg.lr_min +
         0.5 * (cfg.lr_init - cfg.lr_min) * (1.0 + std::cos(std::numbers::pi * epoch / (cfg.epochs - 1)));
}

double plateau_lr(PlateauState& state, double metric, const TrainConfig& cfg) {
  if (metric > state.best + kPlateauThreshold) {
    state.best = metric;
    state.stall = 0;
  } else if (++state.stall >= cfg.plateau_patience) {
    state.lr = std::max(state.lr * cfg.plateau_factor, cfg.lr_min);
    state.stall = 0;
  }
  return state.lr;
}

namespace {

struct Sample {
  nn::Tensor image;
  nn::Tensor mask;
  RasterGrid truth;
};

std::vector<Sample> to_samples(const std::vector<PatchRecord>& patches, int size) {
  std::vector<Sample> out;
  out.reserve(patches.size());
  for (const auto& p : patches) {
    if (!p.mask) fail(ErrorCode::EmptyDataset, "patch from '" + p.parent_region + "' has no mask");
    if (p.image.width() != size || p.image.height() != size)
      fail(ErrorCode::ShapeMismatch, "patch size " + std::to_string(p.image.width()) + " differs from model input " +
                                         std::to_string(size));
    out.push_back({nn::normalize_image(nn::raster_to_tensor(p.image)), nn::mask_to_tensor(*p.mask), *p.mask});
  }
  return out;
}

double nan_if_undefined(const std::optional<double>& v) {
  return v ? *v : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

TrainResult train(nn::ModelCheckpoint& ckpt, const std::vector<PatchRecord>& train_set,
                  const std::vector<PatchRecord>& val_set, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  if (train_set.empty()) fail(ErrorCode::EmptyDataset, "training set is empty");
  if (val_set.empty()) fail(ErrorCode::EmptyDataset, "validation set is empty");
  const auto model_cfg = nn::SegmenterConfig::parse(ckpt.config);
  if (model_cfg.kind == "adapter") ckpt.set_frozen_prefix("encoder.", cfg.freeze_encoder);

  Rng rng(cfg.seed);
  Rng aug_rng = rng.fork(1), order_rng = rng.fork(2);
  std::vector<PatchRecord> expanded;
  for (const auto& p : train_set) {
    auto variants = augment(p, cfg.augment_ops, aug_rng.next_u64());
    for (auto& v : variants) expanded.push_back(std::move(v));
  }
  const auto train_samples = to_samples(expanded, model_cfg.input_size());
  const auto val_samples = to_samples(val_set, model_cfg.input_size());

  TrainResult result;
  PlateauState plateau{cfg.lr_init};
  double lr = cfg.lr_init;
  std::vector<std::size_t> order(train_samples.size());
  const auto iou_weight = static_cast<nn::real>(cfg.loss_iou_weight);

  for (int e = 0; e < cfg.epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.schedule == LrSchedule::Cosine) lr = cosine_lr(e, cfg);

    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      ckpt.zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        const Sample& s = train_samples[order[i]];
        const nn::Tensor loss = nn::loss_bce_soft_iou(nn::segment_forward(s.image, ckpt, model_cfg), s.mask, iou_weight);
        loss_sum += loss.item();
        nn::backward(nn::scale(loss, static_cast<nn::real>(1.0 / static_cast<double>(end - start))));
      }
      nn::adamw_step(ckpt, {.lr = lr, .weight_decay = cfg.weight_decay});
    }

    // Validation on a detached, frozen copy so no graph is recorded.
    nn::ModelCheckpoint view;
    for (const auto& [name, t] : ckpt.params()) view.add(name, t.detach(), true);
    ConfusionCounts counts;
    for (const auto& s : val_samples) {
      const nn::Tensor logits = nn::segment_forward(s.image, view, model_cfg);
      RasterGrid pred(s.truth.width(), s.truth.height(), 1, SampleType::UInt8);
      auto px = pred.samples<std::uint8_t>();
      for (std::size_t i = 0; i < px.size(); ++i) px[i] = logits.data()[i] >= 0 ? 255 : 0;
      counts = accumulate(pred, s.truth, counts);
    }

    EpochLog log;
    log.epoch = e + 1;
    log.train_loss = loss_sum / static_cast<double>(train_samples.size());
    log.val_iou = nan_if_undefined(iou(counts));
    log.val_f1 = nan_if_undefined(f1(counts));
    log.val_precision = nan_if_undefined(precision(counts));
    log.val_recall = nan_if_undefined(recall(counts));
    log.lr = lr;
    log.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.logs.push_back(log);

    ckpt.epoch = log.epoch;
    ckpt.val_metric = log.val_iou;
    ckpt.seed = cfg.seed;
    // NaN ranks below every defined IoU.
    double best_iou = -std::numeric_limits<double>::infinity();
    if (result.best_epoch && !std::isnan(result.logs[result.best_epoch - 1].val_iou))
      best_iou = result.logs[result.best_epoch - 1].val_iou;
    if (result.best_epoch == 0 || log.val_iou > best_iou) {
      result.best = ckpt.clone();
      result.best_epoch = log.epoch;
    }
    if (on_epoch) on_epoch(log);

    if (cfg.schedule == LrSchedule::Plateau)
      lr = plateau_lr(plateau, std::isnan(log.val_iou) ? 0.0 : log.val_iou, cfg);
  }
  result.last = ckpt.clone();
  return result;
}

void write_epoch_csv(const std::vector<EpochLog>& logs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path.string());
  out << "epoch,train_loss,val_iou,val_f1,val_precision,val_recall,lr,wall_time\n";
  char buf[512];
  for (const auto& l : logs) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.3f\n", l.epoch, l.train_loss, l.val_iou,
                  l.val_f1, l.val_precision, l.val_recall, l.lr, l.wall_time);
    out << buf;
  }
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + path.string());
}

std::vector<EpochLog> read_epoch_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || !line.starts_with("epoch,"))
    fail(ErrorCode::MalformedFile, path.string() + " lacks the epoch log header");
  std::vector<EpochLog> logs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) v.push_back(std::strtod(cell.c_str(), nullptr));
    if (v.size() != 8) fail(ErrorCode::MalformedFile, "epoch log row has " + std::to_string(v.size()) + " fields");
    logs.push_back({static_cast<int>(v[0]), v[1], v[2], v[3], v[4], v[5], v[6], v[7]});
  }
  return logs;
}

}  // namespace campseg
