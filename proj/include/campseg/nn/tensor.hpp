#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

// The engine's scalar type. The library ships with float; the gradient tests
// compile the same sources with CAMPSEG_NN_REAL=double, in their own inline
// namespace, so finite differences are not limited by float32 rounding.
#ifndef CAMPSEG_NN_REAL
#define CAMPSEG_NN_REAL float
#define CAMPSEG_NN_NAMESPACE f32
#endif

namespace campseg::nn {
inline namespace CAMPSEG_NN_NAMESPACE {

using real = CAMPSEG_NN_REAL;
using Shape = std::vector<std::int64_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

struct TensorImpl {
  Shape shape;
  std::vector<real> values;
  std::vector<real> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(TensorImpl&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0f);
  }
};

/// Dense float32 array with optional gradient. Copies share storage; use
/// clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, real fill = 0);
  Tensor(Shape shape, std::vector<real> values, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::int64_t dim(std::size_t i) const { return impl_->shape.at(i); }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->values.size(); }

  std::span<real> values() { return impl_->values; }
  std::span<const real> values() const { return impl_->values; }
  real* data() { return impl_->values.data(); }
  const real* data() const { return impl_->values.data(); }
  real item() const;

  bool has_grad() const { return impl_ && impl_->grad.size() == impl_->values.size(); }
  std::span<real> grad() { return impl_->grad; }
  std::span<const real> grad() const { return impl_->grad; }
  void zero_grad();
  void clear_grad() { impl_->grad.clear(); }

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  void set_requires_grad(bool on);
  /// True for results of recorded operations (as opposed to leaves).
  bool has_graph() const { return impl_ && static_cast<bool>(impl_->backward_fn); }

  /// Deep copy of values (and grad, if any) without graph history.
  Tensor clone() const;
  /// Same values, no history, no gradient requirement.
  Tensor detach() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  static Tensor wrap(std::shared_ptr<TensorImpl> impl) {
    Tensor t;
    t.impl_ = std::move(impl);
    return t;
  }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

/// Builds the result of an operation. The backward closure and parent links are
/// kept only when some parent requires a gradient.
Tensor make_result(Shape shape, std::vector<real> values, std::vector<Tensor> parents,
                   std::function<void(TensorImpl&)> backward_fn);

/// Reverse-mode sweep from a scalar. Gradients accumulate into every leaf that
/// requires them; frozen leaves are never touched. The graph is released
/// afterwards.
void backward(const Tensor& loss);

}  // namespace CAMPSEG_NN_NAMESPACE
}  // namespace campseg::nn
