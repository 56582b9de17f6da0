#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "campseg/metrics.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"

using namespace campseg;
using campseg::testing::code_of;
using campseg::testing::TempDir;

TEST_CASE("worked example tp 6, fp 2, fn 2") {
  const ConfusionCounts c{6, 2, 2, 0};
  CHECK(*precision(c) == 0.75);
  CHECK(*recall(c) == 0.75);
  CHECK(*f1(c) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(*iou(c) == 0.6);
}

TEST_CASE("reference adapter row is internally consistent") {
  const double p = 0.879, r = 0.815, f = 0.846, i = 0.733;
  CHECK(std::abs(2 * p * r / (p + r) - f) <= 0.0005);
  CHECK(std::abs(2 * i / (1 + i) - f) <= 0.0005);
}

TEST_CASE("undefined metrics are reported as absent") {
  const ConfusionCounts none{0, 0, 5, 10};
  CHECK_FALSE(precision(none).has_value());
  CHECK(*recall(none) == 0.0);
  CHECK_FALSE(f1(none).has_value());
  CHECK(*iou(none) == 0.0);
  const ConfusionCounts empty{0, 0, 0, 7};
  CHECK_FALSE(recall(empty).has_value());
  CHECK_FALSE(iou(empty).has_value());
  CHECK(format_metric(std::nullopt) == "nan");
  CHECK(format_metric(0.6) == "0.600000");
}

TEST_CASE("F1 = 2 IoU / (1 + IoU) on random counts; values in [0, 1]") {
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    const ConfusionCounts c{static_cast<std::uint64_t>(rng.uniform_int(0, 1000)),
                            static_cast<std::uint64_t>(rng.uniform_int(0, 1000)),
                            static_cast<std::uint64_t>(rng.uniform_int(0, 1000)),
                            static_cast<std::uint64_t>(rng.uniform_int(0, 1000))};
    const auto f = f1(c), j = iou(c);
    if (!f || !j) continue;
    CHECK(std::abs(*f - 2 * *j / (1 + *j)) <= 1e-12);
    for (const auto& m : {precision(c), recall(c), f, j})
      if (m) CHECK((*m >= 0.0 && *m <= 1.0));
  }
}

TEST_CASE("accumulate agrees with a double loop and with itself") {
  Rng rng(2);
  const auto pred = campseg::testing::random_mask(rng, 16, 16, 0.4);
  const auto truth = campseg::testing::random_mask(rng, 16, 16, 0.3);
  ConfusionCounts expect;
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) {
      const bool p = pred.at<std::uint8_t>(r, c) == 255, t = truth.at<std::uint8_t>(r, c) == 255;
      (p && t ? expect.tp : p ? expect.fp : t ? expect.fn : expect.tn)++;
    }
  const auto got = accumulate(pred, truth);
  CHECK(got == expect);
  CHECK(got.total() == 256);

  std::uint64_t fg = 0;
  for (auto v : truth.samples<std::uint8_t>()) fg += v != 0;
  const auto self = accumulate(truth, truth);
  CHECK(self.tp == fg);
  CHECK(self.fp == 0);
  CHECK(self.fn == 0);
  CHECK(*iou(self) == 1.0);
  const auto blank = accumulate(RasterGrid(16, 16, 1, SampleType::UInt8), truth);
  CHECK(blank.fn == fg);
  CHECK(blank.tp == 0);
}

TEST_CASE("accumulation over tiles in any order matches the whole") {
  Rng rng(3);
  const auto pred = campseg::testing::random_mask(rng, 40, 30, 0.5);
  const auto truth = campseg::testing::random_mask(rng, 40, 30, 0.5);
  const auto whole = accumulate(pred, truth);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::pair<int, int>> tiles;
    for (int r = 0; r < 30; r += 10)
      for (int c = 0; c < 40; c += 8) tiles.emplace_back(r, c);
    rng.shuffle(tiles);
    ConfusionCounts sum;
    for (auto [r, c] : tiles) sum = accumulate(pred.crop(c, r, 8, 10), truth.crop(c, r, 8, 10), sum);
    CHECK(sum == whole);
  }
}

TEST_CASE("accumulate rejects mismatched or non-binary input") {
  const RasterGrid a(4, 4, 1, SampleType::UInt8), b(4, 5, 1, SampleType::UInt8);
  CHECK(code_of([&] { accumulate(a, b); }) == ErrorCode::ShapeMismatch);
  CHECK(code_of([&] { accumulate(RasterGrid(4, 4, 3, SampleType::UInt8), RasterGrid(4, 4, 3, SampleType::UInt8)); }) ==
        ErrorCode::ShapeMismatch);
  auto c = a;
  c.set_value(1, 1, 0, 7);
  CHECK(code_of([&] { accumulate(c, a); }) == ErrorCode::NonBinaryInput);
  CHECK(code_of([&] { accumulate(RasterGrid(4, 4, 1, SampleType::Float32), RasterGrid(4, 4, 1, SampleType::Float32)); }) ==
        ErrorCode::NonBinaryInput);
}

TEST_CASE("metrics CSV layout") {
  TempDir dir("metrics");
  write_metrics_csv({{"camp", "adapter", "test", {6, 2, 2, 0}}, {"camp", "unet", "test", {0, 0, 3, 1}}},
                    dir / "m.csv");
  std::ifstream in(dir / "m.csv");
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() ==
        "scene,model,dataset,iou,f1,precision,recall\n"
        "camp,adapter,test,0.600000,0.750000,0.750000,0.750000\n"
        "camp,unet,test,0.000000,nan,nan,0.000000\n");
}
