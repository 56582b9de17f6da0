#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "campseg/nn/ops.hpp"
#include "campseg/synthcamp.hpp"
#include "campseg/upscale.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"

using namespace campseg;
using campseg::testing::code_of;

namespace {

// Bilinear with the half-pixel-centre convention, evaluated in double.
double bilinear_oracle(const RasterGrid& g, int band, int f, int r, int c) {
  auto src = [&](int d, int len, int& i0, int& i1) {
    double s = (d + 0.5) / f - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(len - 1));
    i0 = static_cast<int>(std::floor(s));
    i1 = std::min(i0 + 1, len - 1);
    return s - i0;
  };
  int r0, r1, c0, c1;
  const double fy = src(r, g.height(), r0, r1), fx = src(c, g.width(), c0, c1);
  const double top = g.value(r0, c0, band) * (1 - fx) + g.value(r0, c1, band) * fx;
  const double bot = g.value(r1, c0, band) * (1 - fx) + g.value(r1, c1, band) * fx;
  return top * (1 - fy) + bot * fy;
}

nn::Tensor conv_from(const nn::Tensor& x, const nn::ModelCheckpoint& ck, const std::string& p) {
  return nn::conv2d(x, ck.at(p + ".weight"), ck.at(p + ".bias"), static_cast<int>(ck.at(p + ".weight").dim(2) / 2));
}

}  // namespace

TEST_CASE("nearest: identity at factor 1, blocks at factor 2, index-map oracle") {
  Rng rng(1);
  const auto g = campseg::testing::random_grid(rng, 8, 8, 3, SampleType::UInt8);
  CHECK(identical(upscale_nearest(g, 1), g));

  const auto two = RasterGrid::from_samples<std::uint8_t>(2, 2, 1, {1, 2, 3, 4});
  const auto up = upscale_nearest(two, 2);
  const std::vector<std::uint8_t> expect = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  CHECK(std::vector<std::uint8_t>(up.samples<std::uint8_t>().begin(), up.samples<std::uint8_t>().end()) == expect);

  const auto u3 = upscale_nearest(g, 3);
  REQUIRE(u3.width() == 24);
  REQUIRE(u3.height() == 24);
  for (int r = 0; r < 24; ++r)
    for (int c = 0; c < 24; ++c)
      for (int b = 0; b < 3; ++b) REQUIRE(u3.value(r, c, b) == g.value(r / 3, c / 3, b));
}

TEST_CASE("bilinear worked example [0, 4] x2") {
  const auto row = RasterGrid::from_samples<std::uint8_t>(2, 1, 1, {0, 4});
  const auto up = upscale_bilinear(row, 2);
  REQUIRE(up.width() == 4);
  REQUIRE(up.height() == 2);
  for (int r = 0; r < 2; ++r) {
    CHECK(up.at<std::uint8_t>(r, 0) == 0);
    CHECK(up.at<std::uint8_t>(r, 1) == 1);
    CHECK(up.at<std::uint8_t>(r, 2) == 3);
    CHECK(up.at<std::uint8_t>(r, 3) == 4);
  }
}

TEST_CASE("bilinear and nearest keep constants exactly") {
  for (int f : {1, 2, 3, 4, 7}) {
    RasterGrid g(5, 3, 2, SampleType::UInt8);
    for (auto& v : g.samples<std::uint8_t>()) v = 7;
    for (const auto& up : {upscale_bilinear(g, f), upscale_nearest(g, f)}) {
      CHECK(up.width() == 5 * f);
      CHECK(up.height() == 3 * f);
      for (auto v : up.samples<std::uint8_t>()) REQUIRE(v == 7);
    }
    RasterGrid fl(4, 4, 1, SampleType::Float32);
    for (auto& v : fl.samples<float>()) v = 0.3f;
    const auto ufl = upscale_bilinear(fl, f);
    for (auto v : ufl.samples<float>()) REQUIRE(v == 0.3f);
  }
}

TEST_CASE("bilinear matches a double-precision oracle within one level and stays in range") {
  Rng rng(2);
  for (int i = 0; i < 30; ++i) {
    const int w = static_cast<int>(rng.uniform_int(1, 20)), h = static_cast<int>(rng.uniform_int(1, 20));
    const int f = static_cast<int>(rng.uniform_int(1, 5));
    const auto g = campseg::testing::random_grid(rng, w, h, 3, i % 2 ? SampleType::UInt8 : SampleType::UInt16);
    const auto up = upscale_bilinear(g, f);
    REQUIRE(up.width() == w * f);
    REQUIRE(up.height() == h * f);
    for (int b = 0; b < 3; ++b) {
      double lo = std::numeric_limits<double>::max(), hi = -lo;
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) lo = std::min(lo, g.value(r, c, b)), hi = std::max(hi, g.value(r, c, b));
      for (int r = 0; r < h * f; ++r)
        for (int c = 0; c < w * f; ++c) {
          const double v = up.value(r, c, b);
          REQUIRE(std::abs(v - bilinear_oracle(g, b, f, r, c)) <= 1.0);
          REQUIRE(v >= lo - 1);
          REQUIRE(v <= hi + 1);
        }
    }
  }
}

TEST_CASE("psnr") {
  Rng rng(3);
  const auto a = campseg::testing::random_grid(rng, 6, 6, 3, SampleType::UInt8);
  CHECK(std::isinf(psnr(a, a)));
  auto b = a;
  for (auto& v : b.samples<std::uint8_t>()) v = static_cast<std::uint8_t>(v ^ 1);  // every sample off by 1
  CHECK(psnr(a, b) == doctest::Approx(20.0 * std::log10(255.0)).epsilon(1e-12));
  CHECK(code_of([&] { psnr(a, upscale_nearest(a, 2)); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("pixel_shuffle index law") {
  const nn::Tensor x({4, 1, 1}, {1, 2, 3, 4});
  const auto y = nn::pixel_shuffle(x, 2);
  REQUIRE(y.shape() == nn::Shape{1, 2, 2});
  CHECK(std::vector<nn::real>(y.values().begin(), y.values().end()) == std::vector<nn::real>{1, 2, 3, 4});

  Rng rng(4);
  const int c = 3, r = 3, h = 4, w = 5;
  std::vector<nn::real> v(c * r * r * h * w);
  for (auto& e : v) e = static_cast<nn::real>(rng.normal());
  const nn::Tensor t({c * r * r, h, w}, v);
  const auto same = nn::pixel_shuffle(t, 1);
  CHECK(std::equal(same.values().begin(), same.values().end(), v.begin(), v.end()));

  // Invert with the stated index map.
  const auto s = nn::pixel_shuffle(t, r);
  REQUIRE(s.shape() == nn::Shape{c, h * r, w * r});
  std::vector<nn::real> back(v.size());
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h * r; ++y)
      for (int x = 0; x < w * r; ++x)
        back[((ch * r * r + (y % r) * r + x % r) * h + y / r) * w + x / r] = s.values()[(ch * h * r + y) * w * r + x];
  CHECK(back == v);

  CHECK(code_of([] { nn::pixel_shuffle(nn::Tensor({3, 2, 2}), 2); }) == ErrorCode::IndivisibleChannels);
}

TEST_CASE("EDSR with all-zero parameters outputs zeros") {
  const nn::EdsrConfig cfg;
  auto ck = nn::init_edsr_checkpoint(cfg, 1);
  for (const auto& name : ck.names()) std::fill(ck.at(name).values().begin(), ck.at(name).values().end(), 0);
  Rng rng(5);
  std::vector<nn::real> v(3 * 6 * 5);
  for (auto& e : v) e = static_cast<nn::real>(rng.uniform());
  const auto out = nn::edsr_tensor_forward(nn::Tensor({3, 6, 5}, v), ck, cfg);
  REQUIRE(out.shape() == nn::Shape{3, 24, 20});
  for (auto e : out.values()) REQUIRE(e == 0);

  const auto g = campseg::testing::random_grid(rng, 5, 6, 3, SampleType::UInt8);
  const auto r = edsr_forward(g, ck, cfg);
  CHECK(r.width() == 20);
  CHECK(r.height() == 24);
  for (auto e : r.samples<std::uint8_t>()) REQUIRE(e == 0);
}

TEST_CASE("a residual block with zero convolutions passes its input through") {
  nn::EdsrConfig cfg;
  cfg.residual_blocks = 1;
  cfg.feature_channels = 6;
  auto ck = nn::init_edsr_checkpoint(cfg, 3);
  for (const char* n : {"edsr.body.0.conv1.weight", "edsr.body.0.conv1.bias", "edsr.body.0.conv2.weight",
                        "edsr.body.0.conv2.bias"})
    std::fill(ck.at(n).values().begin(), ck.at(n).values().end(), 0);
  Rng rng(6);
  for (const auto& name : ck.names())
    if (name.find("body") == std::string::npos)
      for (auto& e : ck.at(name).values()) e += static_cast<nn::real>(0.1 * rng.normal());
  std::vector<nn::real> v(3 * 4 * 4);
  for (auto& e : v) e = static_cast<nn::real>(rng.uniform());
  const nn::Tensor x({3, 4, 4}, v);

  const auto head = conv_from(x, ck, "edsr.head");
  auto y = nn::add(head, head);  // block is the identity, then the global skip
  for (int s = 0; s < 2; ++s) y = nn::pixel_shuffle(conv_from(y, ck, "edsr.up." + std::to_string(s)), 2);
  const auto expect = conv_from(y, ck, "edsr.tail");
  const auto got = nn::edsr_tensor_forward(x, ck, cfg);
  REQUIRE(got.shape() == expect.shape());
  for (std::size_t i = 0; i < got.numel(); ++i) REQUIRE(got.values()[i] == expect.values()[i]);
}

TEST_CASE("untrained EDSR upsamples by pixel replication") {
  const nn::EdsrConfig cfg;
  const auto ck = nn::init_edsr_checkpoint(cfg, 9);
  Rng rng(7);
  const auto g = campseg::testing::random_grid(rng, 6, 5, 3, SampleType::UInt8);
  CHECK(identical(edsr_forward(g, ck, cfg), upscale_nearest(g, 4)));
  CHECK(identical(upscale(g, UpscaleMethod::Edsr, 4, &ck), upscale_nearest(g, 4)));
  CHECK(identical(edsr_forward(g, ck, cfg), edsr_forward(g, ck, cfg)));
}

TEST_CASE("upscale dispatch and method names") {
  Rng rng(8);
  const auto g = campseg::testing::random_grid(rng, 4, 4, 3, SampleType::UInt8);
  CHECK(identical(upscale(g, UpscaleMethod::Nearest, 4), upscale_nearest(g, 4)));
  CHECK(identical(upscale(g, UpscaleMethod::Bilinear, 4), upscale_bilinear(g, 4)));
  for (UpscaleMethod m : {UpscaleMethod::None, UpscaleMethod::Nearest, UpscaleMethod::Bilinear, UpscaleMethod::Edsr})
    CHECK(parse_upscale_method(to_string(m)) == m);
  CHECK(code_of([] { parse_upscale_method("lanczos"); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("EDSR config validation") {
  nn::EdsrConfig c;
  c.scale = 2;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::ConfigInvalid);
  c = {};
  c.residual_blocks = 0;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::ConfigInvalid);
  c = {};
  c.residual_scaling = 0;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::ConfigInvalid);
  c = {};
  c.residual_scaling = 0.1f;
  c.feature_channels = 5;
  CHECK(nn::parse_edsr_config(nn::serialize(c)).residual_scaling == c.residual_scaling);
}

TEST_CASE("EDSR training lowers its loss on a tiny pair set") {
  const nn::EdsrConfig cfg{.feature_channels = 8, .residual_blocks = 2};
  auto ck = nn::init_edsr_checkpoint(cfg, 2);
  Rng rng(10);
  std::vector<SrPair> pairs;
  for (int i = 0; i < 4; ++i) {
    SceneConfig sc;
    sc.width = sc.height = 32;
    sc.dwelling_count = 4;
    sc.seed = 100 + i;
    const auto hr = generate_scene(sc).image;
    pairs.emplace_back(degrade(hr, 4), hr);
  }
  EdsrTrainConfig t;
  t.epochs = 6;
  const auto losses = train_edsr(ck, cfg, pairs, t);
  REQUIRE(losses.size() == 6);
  CHECK(losses.back() < losses.front());
}
