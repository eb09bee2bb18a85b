#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cosim/common.hpp"

namespace cosim {

using Shape = std::vector<int>;

inline std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first backward touches this node
  bool requires_grad = false;
  // Producer record: inputs this node was computed from, and the closure
  // that scatters this node's adjoint into theirs.
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backprop;

  bool is_leaf() const { return parents.empty(); }
  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
  }
};

// When grad recording is off, ops skip building the tape (frozen-model
// inference). Thread-local so concurrent readers don't interfere.
inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

struct NoGradGuard {
  NoGradGuard() : prev_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
  ~NoGradGuard() { detail::grad_mode_flag() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

inline bool grad_enabled() { return detail::grad_mode_flag(); }

// Dense row-major tensor of 64-bit reals with an optional gradient slot.
// Tensor is a cheap handle: copies share the underlying storage, so the
// computation graph can reference the same node from several operations.
//
// Gradient semantics: backward() accumulates into leaf tensors across calls
// (an explicit zero_grad is required between optimizer steps); non-leaf
// tensors hold the adjoints of the most recent backward pass.
class Tensor {
 public:
  Tensor() : node_(std::make_shared<detail::TensorNode>()) {}

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return filled(std::move(shape), 0.0, requires_grad);
  }

  static Tensor filled(Shape shape, double v, bool requires_grad = false) {
    for (int d : shape) COSIM_CHECK_ARG(d > 0, "tensor extent must be positive, got ", d);
    Tensor t;
    t.node_->shape = std::move(shape);
    t.node_->value.assign(static_cast<std::size_t>(shape_numel(t.node_->shape)), v);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false) {
    COSIM_CHECK_ARG(static_cast<std::int64_t>(data.size()) == shape_numel(shape),
                    "data length ", data.size(), " does not match shape ", shape_str(shape));
    Tensor t;
    t.node_->shape = std::move(shape);
    t.node_->value = std::move(data);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return from_data({1}, {v}, requires_grad);
  }

  const Shape& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape[static_cast<std::size_t>(i)]; }
  int ndim() const { return static_cast<int>(node_->shape.size()); }
  std::int64_t numel() const { return static_cast<std::int64_t>(node_->value.size()); }
  bool defined() const { return !node_->shape.empty(); }

  double* data() { return node_->value.data(); }
  const double* data() const { return node_->value.data(); }
  std::vector<double>& values() { return node_->value; }
  const std::vector<double>& values() const { return node_->value; }

  double item() const {
    COSIM_CHECK_ARG(numel() == 1, "item() requires a scalar tensor, shape is ",
                    shape_str(node_->shape));
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool b) {
    node_->requires_grad = b;
    return *this;
  }

  bool has_grad() const { return !node_->grad.empty(); }
  const std::vector<double>& grad() const { return node_->grad; }
  std::vector<double>& grad() { return node_->grad; }

  void zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }
  void clear_grad() { node_->grad.clear(); }

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  // Deep copy of values only; the copy is a fresh leaf.
  Tensor clone_detached(bool requires_grad = false) const {
    return from_data(node_->shape, node_->value, requires_grad);
  }

  std::shared_ptr<detail::TensorNode> node() const { return node_; }

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

namespace detail {

// Helper used by every op that records the tape: creates the output node
// and, when recording is active and any input needs gradients, attaches the
// producer record.
inline Tensor make_op_output(Shape shape, std::vector<double> value,
                             std::vector<Tensor> inputs,
                             std::function<void(TensorNode&)> backprop) {
  Tensor out = Tensor::from_data(std::move(shape), std::move(value));
  if (!grad_mode_flag()) return out;
  bool any = false;
  for (const Tensor& t : inputs) any = any || t.requires_grad();
  if (!any) return out;
  auto node = out.node();
  node->requires_grad = true;
  node->parents.reserve(inputs.size());
  for (const Tensor& t : inputs) node->parents.push_back(t.node());
  node->backprop = std::move(backprop);
  return out;
}

}  // namespace detail

// Reverse-mode sweep from a scalar loss. Adjoints are propagated in reverse
// topological order; the traversal only descends into subgraphs that require
// gradients. Non-leaf adjoint buffers are reset at the start of each sweep,
// leaf buffers accumulate.
inline void backward(const Tensor& loss) {
  COSIM_CHECK_ARG(loss.numel() == 1, "backward() requires a scalar loss, shape is ",
                  shape_str(loss.shape()));
  using detail::TensorNode;
  auto root = loss.node();
  if (!root->requires_grad) return;

  // Iterative DFS post-order; reversed it is a topological order in which a
  // node appears before all of its producers.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> visited;
  std::vector<std::pair<TensorNode*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode* parent = node->parents[next++].get();
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* n = *it;
    if (!n->is_leaf()) n->grad.assign(n->value.size(), 0.0);
  }
  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

namespace detail {

// Accumulates `src` scaled contributions into a parent's grad buffer,
// allocating it on first touch.
inline std::vector<double>& parent_grad(TensorNode& op_node, std::size_t i) {
  TensorNode& p = *op_node.parents[i];
  p.ensure_grad();
  return p.grad;
}

}  // namespace detail

// Trainable tensor with a name, an optimizer group, and the momentum state
// that SGD updates in place.
struct Parameter {
  enum class Group { backbone, head };

  std::string name;
  Tensor value;
  std::vector<double> momentum;
  Group group = Group::backbone;

  Parameter() = default;
  Parameter(std::string n, Tensor v, Group g = Group::backbone)
      : name(std::move(n)), value(std::move(v)), momentum(value.values().size(), 0.0), group(g) {
    value.set_requires_grad(true);
  }
};

inline void zero_grads(std::vector<Parameter>& params) {
  for (auto& p : params) p.value.zero_grad();
}

}  // namespace cosim
