#pragma once

#include <optional>

#include "campseg/nn/tensor.hpp"

namespace campseg::nn {
inline namespace CAMPSEG_NN_NAMESPACE {

// Elementwise.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, real s);
/// x[R, D] + b[D], broadcast over rows.
Tensor add_row(const Tensor& x, const Tensor& b);
/// x[C, ...] + b[C], broadcast over the trailing dimensions.
Tensor add_channel(const Tensor& x, const Tensor& b);

/// x * Phi(x) with Phi the standard normal CDF (erf form).
Tensor gelu(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);
/// x[T, in] * w[out, in]^T + b[out]; b may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor transpose2d(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

// Normalisation and attention.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, real eps = 1e-6);
Tensor softmax_rows(const Tensor& x);

/// Restricts attention to square windows of `window` tokens on a
/// grid_h x grid_w token grid. Border windows may be partial.
struct WindowSpec {
  int grid_h = 0;
  int grid_w = 0;
  int window = 0;
};

/// Multi-head scaled dot-product attention over already projected q[Tq, D],
/// k[Tk, D], v[Tk, D]. Without a window every query sees every key.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads,
                 std::optional<WindowSpec> window = std::nullopt);

// Image operators on single images laid out [C, H, W].
/// Stride-1 convolution, w[O, C, k, k], zero padding `pad`.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int pad);
/// Kernel-2 stride-2 transposed convolution, w[C, O, 2, 2]; doubles H and W.
Tensor conv_transpose2x2(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor maxpool2x2(const Tensor& x);
Tensor concat_channels(const Tensor& a, const Tensor& b);
/// out(c, h*r+i, w*r+j) = in(c*r*r + i*r + j, h, w).
Tensor pixel_shuffle(const Tensor& x, int r);
/// [C, H, W] -> [T, C*p*p] non-overlapping p x p patches, row-major token order.
Tensor patchify(const Tensor& x, int p);

// Reductions and losses.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// sum_i x_i * weights_i with constant weights.
Tensor weighted_sum(const Tensor& x, std::span<const real> weights);
/// mean BCE-with-logits + iou_weight * (1 - soft IoU), soft IoU over sigmoid(logits).
Tensor loss_bce_soft_iou(const Tensor& logits, const Tensor& target, real iou_weight);
Tensor mse_loss(const Tensor& pred, const Tensor& target);

constexpr double kSoftIouEps = 1e-6;

}  // namespace CAMPSEG_NN_NAMESPACE
}  // namespace campseg::nn
