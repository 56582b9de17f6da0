#pragma once

#include "campseg/nn/checkpoint.hpp"

namespace campseg::nn {
inline namespace CAMPSEG_NN_NAMESPACE {

struct AdamWConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// One decoupled-weight-decay Adam step over every unfrozen parameter:
///   p <- p - lr*wd*p - lr * m_hat / (sqrt(v_hat) + eps)
/// Frozen parameters are skipped. Throws MissingGrad when an unfrozen
/// parameter has no gradient.
void adamw_step(ModelCheckpoint& ckpt, const AdamWConfig& cfg);

}  // namespace CAMPSEG_NN_NAMESPACE
}  // namespace campseg::nn
