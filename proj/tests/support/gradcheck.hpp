#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "campseg/nn/ops.hpp"
#include "campseg/random.hpp"

namespace campseg::testing {

struct GradCheckResult {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst = 0.0;
  std::string worst_where;
};

/// Central finite differences against reverse-mode gradients for the scalar
/// L = sum_i r_i * f(inputs)_i with fixed random r. Up to `samples` entries are
/// drawn across all inputs that require a gradient.
///
/// relative error = |analytic - numeric| / max(|analytic|, |numeric|, floor)
inline GradCheckResult grad_check(const std::function<nn::Tensor(const std::vector<nn::Tensor>&)>& f,
                                  std::vector<nn::Tensor> inputs, std::size_t samples, std::uint64_t seed,
                                  double step = 1e-3, double tol = 1e-3, double floor = 1e-6) {
  Rng rng(seed);
  nn::Tensor probe = f(inputs);
  std::vector<nn::real> r(probe.numel());
  for (auto& x : r) x = static_cast<nn::real>(rng.uniform(-1.0, 1.0));

  auto loss_value = [&]() {
    nn::Tensor out = f(inputs);
    double s = 0.0;
    for (std::size_t i = 0; i < out.numel(); ++i) s += static_cast<double>(out.data()[i]) * r[i];
    return s;
  };

  for (auto& t : inputs)
    if (t.requires_grad()) t.zero_grad();
  nn::backward(nn::weighted_sum(f(inputs), r));

  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  for (std::size_t k = 0; k < inputs.size(); ++k)
    if (inputs[k].requires_grad())
      for (std::size_t i = 0; i < inputs[k].numel(); ++i) candidates.emplace_back(k, i);
  rng.shuffle(candidates);
  if (candidates.size() > samples) candidates.resize(samples);

  GradCheckResult res;
  for (auto [k, i] : candidates) {
    nn::real* x = inputs[k].data();
    const nn::real orig = x[i];
    x[i] = orig + static_cast<nn::real>(step);
    const double hi_x = x[i];
    const double hi = loss_value();
    x[i] = orig - static_cast<nn::real>(step);
    const double lo_x = x[i];
    const double lo = loss_value();
    x[i] = orig;
    const double numeric = (hi - lo) / (hi_x - lo_x);
    const double analytic = inputs[k].grad()[i];
    const double err = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
    ++res.checked;
    if (err > tol) ++res.failed;
    if (err > res.worst) {
      res.worst = err;
      res.worst_where = "input " + std::to_string(k) + "[" + std::to_string(i) + "] analytic " +
                        std::to_string(analytic) + " numeric " + std::to_string(numeric);
    }
  }
  return res;
}

inline nn::Tensor random_tensor(nn::Shape shape, Rng& rng, double scale = 1.0, bool requires_grad = true) {
  std::vector<nn::real> v(nn::numel(shape));
  for (auto& x : v) x = static_cast<nn::real>(rng.uniform(-scale, scale));
  return nn::Tensor(std::move(shape), std::move(v), requires_grad);
}

/// Values bounded away from zero by `gap`, for ops with a kink at 0.
inline nn::Tensor away_from_zero(nn::Shape shape, Rng& rng, double gap, bool requires_grad = true) {
  std::vector<nn::real> v(nn::numel(shape));
  for (auto& x : v) {
    const double m = rng.uniform(gap, 1.0);
    x = static_cast<nn::real>(rng.uniform() < 0.5 ? -m : m);
  }
  return nn::Tensor(std::move(shape), std::move(v), requires_grad);
}

}  // namespace campseg::testing
