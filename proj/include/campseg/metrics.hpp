#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "campseg/raster.hpp"

namespace campseg {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Adds the per-pixel outcome of single-band {0, 255} masks to `counts`.
/// Throws ShapeMismatch or NonBinaryInput.
ConfusionCounts accumulate(const RasterGrid& pred, const RasterGrid& truth, ConfusionCounts counts = {});

// Each returns nullopt when its denominator is zero.
std::optional<double> precision(const ConfusionCounts& c);
std::optional<double> recall(const ConfusionCounts& c);
std::optional<double> f1(const ConfusionCounts& c);
std::optional<double> iou(const ConfusionCounts& c);

struct MetricRow {
  std::string scene;
  std::string model;
  std::string dataset;
  ConfusionCounts counts;
};

/// "nan" for undefined values, otherwise fixed 6 decimals.
std::string format_metric(const std::optional<double>& v);

/// Columns: scene, model, dataset, iou, f1, precision, recall.
void write_metrics_csv(const std::vector<MetricRow>& rows, const std::filesystem::path& path);

}  // namespace campseg
