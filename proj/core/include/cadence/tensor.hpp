#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cadence/errors.hpp"

namespace cadence {

template <typename S>
struct TensorImpl;

// One reverse-mode tape node. `backward` reads the output's gradient and
// accumulates into the parents' gradients. Parents are held by shared_ptr so
// the reachable subgraph stays alive; the output impl owns this node, so the
// node only keeps a raw pointer back to it (no ownership cycle).
template <typename S>
struct TapeNode {
  std::vector<std::shared_ptr<TensorImpl<S>>> parents;
  std::function<void(TensorImpl<S>&)> backward;
};

template <typename S>
struct TensorImpl {
  std::vector<int> shape;
  std::vector<S> data;
  std::vector<S> grad;  // sized like data iff requires_grad
  bool requires_grad{false};
  std::shared_ptr<TapeNode<S>> node;  // null for leaves and constants
};

inline std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

// Value-semantics handle onto a shared buffer; copying a Tensor aliases the
// same storage.
template <typename S>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    Tensor t;
    t.impl_ = std::make_shared<TensorImpl<S>>();
    t.impl_->shape = std::move(shape);
    t.impl_->data.assign(shape_numel(t.impl_->shape), S(0));
    t.impl_->requires_grad = requires_grad;
    if (requires_grad) t.impl_->grad.assign(t.impl_->data.size(), S(0));
    return t;
  }

  static Tensor from(std::vector<int> shape, std::vector<S> values,
                     bool requires_grad = false) {
    if (shape_numel(shape) != values.size()) {
      throw ConfigError("tensor: shape does not match value count");
    }
    Tensor t = zeros(std::move(shape), requires_grad);
    t.impl_->data = std::move(values);
    return t;
  }

  static Tensor scalar(S v, bool requires_grad = false) {
    return from({1}, {v}, requires_grad);
  }

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const { return impl_->shape; }
  int dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  std::size_t numel() const { return impl_->data.size(); }
  bool requires_grad() const { return impl_->requires_grad; }

  S* data() { return impl_->data.data(); }
  const S* data() const { return impl_->data.data(); }
  std::vector<S>& values() { return impl_->data; }
  const std::vector<S>& values() const { return impl_->data; }

  S* grad() { return impl_->grad.data(); }
  const S* grad() const { return impl_->grad.data(); }
  std::vector<S>& grad_values() { return impl_->grad; }
  const std::vector<S>& grad_values() const { return impl_->grad; }

  S item() const {
    if (numel() != 1) throw ConfigError("tensor: item() on non-scalar");
    return impl_->data[0];
  }

  void zero_grad() {
    if (impl_->requires_grad) {
      std::fill(impl_->grad.begin(), impl_->grad.end(), S(0));
    }
  }

  std::shared_ptr<TensorImpl<S>>& impl() { return impl_; }
  const std::shared_ptr<TensorImpl<S>>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl<S>> impl_;
};

// Thread-local switch; inference paths disable tape construction.
inline bool& grad_enabled_flag() {
  thread_local bool enabled = true;
  return enabled;
}

inline bool grad_enabled() { return grad_enabled_flag(); }

struct NoGradGuard {
  NoGradGuard() : prev_(grad_enabled_flag()) { grad_enabled_flag() = false; }
  ~NoGradGuard() { grad_enabled_flag() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Runs the tape in reverse topological order starting from `root` (typically
// the scalar loss). Iterative DFS; LSTM graphs get deep enough that recursion
// would be a stack-overflow hazard.
template <typename S>
void backward(Tensor<S>& root) {
  if (!root.requires_grad() || !root.impl()->node) {
    throw ConfigError("backward: root does not require grad or has no tape");
  }
  if (root.numel() != 1) {
    throw ConfigError("backward: root must be scalar");
  }
  root.impl()->grad[0] = S(1);

  std::vector<TensorImpl<S>*> order;
  std::vector<std::pair<TensorImpl<S>*, std::size_t>> stack;
  std::unordered_set<TensorImpl<S>*> visited;
  stack.emplace_back(root.impl().get(), 0);
  visited.insert(root.impl().get());
  while (!stack.empty()) {
    auto& [impl, next_child] = stack.back();
    if (!impl->node || next_child >= impl->node->parents.size()) {
      order.push_back(impl);
      stack.pop_back();
      continue;
    }
    TensorImpl<S>* child = impl->node->parents[next_child].get();
    ++next_child;
    if (child->node && child->requires_grad && visited.insert(child).second) {
      stack.emplace_back(child, 0);
    }
  }
  // order is post-order: parents before children; reverse for backprop
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl<S>* impl = *it;
    if (impl->node && impl->node->backward) impl->node->backward(*impl);
  }
}

}  // namespace cadence
