#include "campseg/nn/optim.hpp"

#include <cmath>

#include "campseg/error.hpp"

namespace campseg::nn {
inline namespace CAMPSEG_NN_NAMESPACE {

void adamw_step(ModelCheckpoint& ckpt, const AdamWConfig& cfg) {
  for (const auto& [name, t] : ckpt.params())
    if (!ckpt.frozen(name) && !t.has_grad()) fail(ErrorCode::MissingGrad, "parameter '" + name + "' has no gradient");

  ++ckpt.adam_step;
  const double step = static_cast<double>(ckpt.adam_step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, step);
  const double bc2 = 1.0 - std::pow(cfg.beta2, step);
  for (const auto& name : ckpt.names()) {
    if (ckpt.frozen(name)) continue;
    Tensor& p = ckpt.at(name);
    auto& state = ckpt.moments[name];
    if (state.m.size() != p.numel()) {
      state.m.assign(p.numel(), 0.0);
      state.v.assign(p.numel(), 0.0);
    }
    real* w = p.data();
    const auto g = p.grad();
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double gi = g[i];
      const double m = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * gi;
      const double v = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * gi * gi;
      state.m[i] = static_cast<real>(m);
      state.v[i] = static_cast<real>(v);
      double wi = w[i];
      wi -= cfg.lr * cfg.weight_decay * wi;
      wi -= cfg.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.eps);
      w[i] = static_cast<real>(wi);
    }
  }
}

}  // namespace CAMPSEG_NN_NAMESPACE
}  // namespace campseg::nn
