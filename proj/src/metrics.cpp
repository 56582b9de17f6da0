#include "campseg/metrics.hpp"

#include <cstdio>
#include <fstream>

#include "campseg/error.hpp"
#include "campseg/kernels.hpp"

namespace campseg {

ConfusionCounts accumulate(const RasterGrid& pred, const RasterGrid& truth, ConfusionCounts counts) {
  if (pred.width() != truth.width() || pred.height() != truth.height() || pred.bands() != 1 || truth.bands() != 1)
    fail(ErrorCode::ShapeMismatch, "prediction and truth must be congruent single-band masks");
  if (pred.sample_type() != SampleType::UInt8 || truth.sample_type() != SampleType::UInt8)
    fail(ErrorCode::NonBinaryInput, "masks must be uint8 with values 0 and 255");
  const auto t = kernels::confusion(pred.width(), pred.height(), pred.samples<std::uint8_t>().data(),
                                    truth.samples<std::uint8_t>().data());
  if (t.invalid) fail(ErrorCode::NonBinaryInput, std::to_string(t.invalid) + " pixels are neither 0 nor 255");
  counts += ConfusionCounts{t.tp, t.fp, t.fn, t.tn};
  return counts;
}

namespace {

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::optional<double> precision(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp); }
std::optional<double> recall(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn); }

std::optional<double> f1(const ConfusionCounts& c) {
  const auto p = precision(c), r = recall(c);
  if (!p || !r || *p + *r == 0.0) return std::nullopt;
  return 2.0 * *p * *r / (*p + *r);
}

std::optional<double> iou(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp + c.fn); }

std::string format_metric(const std::optional<double>& v) {
  if (!v) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

void write_metrics_csv(const std::vector<MetricRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path.string());
  out << "scene,model,dataset,iou,f1,precision,recall\n";
  for (const auto& r : rows)
    out << r.scene << ',' << r.model << ',' << r.dataset << ',' << format_metric(iou(r.counts)) << ','
        << format_metric(f1(r.counts)) << ',' << format_metric(precision(r.counts)) << ','
        << format_metric(recall(r.counts)) << '\n';
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + path.string());
}

}  // namespace campseg
