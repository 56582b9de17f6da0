#include "campseg/nn/tensor.hpp"

#include <algorithm>
#include <unordered_set>

#include "campseg/error.hpp"

namespace campseg::nn {
inline namespace CAMPSEG_NN_NAMESPACE {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) {
    if (d < 0) fail(ErrorCode::ShapeMismatch, "negative dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, real fill) : impl_(std::make_shared<TensorImpl>()) {
  impl_->values.assign(nn::numel(shape), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<real> values, bool requires_grad) : impl_(std::make_shared<TensorImpl>()) {
  if (values.size() != nn::numel(shape))
    fail(ErrorCode::ShapeMismatch, "value count " + std::to_string(values.size()) + " does not match shape " +
                                       nn::to_string(shape));
  impl_->shape = std::move(shape);
  impl_->values = std::move(values);
  impl_->requires_grad = requires_grad;
}

real Tensor::item() const {
  if (numel() != 1) fail(ErrorCode::ShapeMismatch, "item() needs a single-element tensor");
  return impl_->values[0];
}

void Tensor::zero_grad() {
  if (impl_->requires_grad) impl_->grad.assign(impl_->values.size(), 0.0);
}

void Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  if (!on) impl_->grad.clear();
}

Tensor Tensor::clone() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->values = impl_->values;
  impl->grad = impl_->grad;
  impl->requires_grad = impl_->requires_grad;
  return wrap(std::move(impl));
}

Tensor Tensor::detach() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->values = impl_->values;
  return wrap(std::move(impl));
}

Tensor make_result(Shape shape, std::vector<real> values, std::vector<Tensor> parents,
                   std::function<void(TensorImpl&)> backward_fn) {
  Tensor out(std::move(shape), std::move(values));
  const bool tracked = std::any_of(parents.begin(), parents.end(), [](const Tensor& p) { return p.requires_grad(); });
  if (tracked) {
    auto& impl = *out.impl();
    impl.requires_grad = true;
    impl.backward_fn = std::move(backward_fn);
    for (auto& p : parents) impl.parents.push_back(p.impl());
  }
  return out;
}

void backward(const Tensor& loss) {
  if (!loss.defined() || !loss.has_graph())
    fail(ErrorCode::GraphMissing, "backward() needs a tensor produced by recorded operations");
  if (loss.numel() != 1) fail(ErrorCode::ShapeMismatch, "backward() needs a scalar loss");

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> seen;
  std::vector<std::pair<TensorImpl*, std::size_t>> stack{{loss.impl().get(), 0}};
  seen.insert(loss.impl().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorImpl* p = node->parents[next++].get();
      if (p->requires_grad && !seen.contains(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  TensorImpl& root = *loss.impl();
  root.ensure_grad();
  root.grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* node = *it;
    if (node->backward_fn && node->grad.size() == node->values.size()) node->backward_fn(*node);
  }
  for (TensorImpl* node : order) {
    if (node->backward_fn) {
      node->backward_fn = nullptr;
      node->parents.clear();
    }
  }
}

}  // namespace CAMPSEG_NN_NAMESPACE
}  // namespace campseg::nn
