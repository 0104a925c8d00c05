// dkdssd/tensor.hpp

// Copyright 2026  The dkdssd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace dkd {

/// Raised for any shape or rank violation; the message carries both shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when the autodiff graph is used incorrectly (non-scalar loss,
/// repeated backward on a consumed graph).
class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

using Shape = std::vector<int>;

inline std::size_t NumElements(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
}

inline std::string ShapeString(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

namespace detail {
inline bool& GradModeFlag() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

/// While alive, ops on this thread record no graph.
class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::GradModeFlag()) { detail::GradModeFlag() = false; }
  ~NoGradGuard() { detail::GradModeFlag() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

inline bool GradEnabled() { return detail::GradModeFlag(); }

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  bool retain_grad = false;
  bool consumed = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents that require grad.
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return !backward_fn; }

  std::vector<T>& grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

/// Handle to a dense row-major n-d array that may participate in a
/// reverse-mode graph. Copies share the underlying node.
template <typename T>
class Tensor {
 public:
  using value_type = T;
  using NodePtr = std::shared_ptr<Node<T>>;

  Tensor() = default;
  explicit Tensor(NodePtr n) : node_(std::move(n)) {}

  static Tensor FromData(Shape shape, std::vector<T> data, bool requires_grad = false) {
    if (NumElements(shape) != data.size())
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + ShapeString(shape));
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }
  static Tensor Full(Shape shape, T value, bool requires_grad = false) {
    std::vector<T> d(NumElements(shape), value);
    return FromData(std::move(shape), std::move(d), requires_grad);
  }
  static Tensor Zeros(Shape shape, bool requires_grad = false) {
    return Full(std::move(shape), T(0), requires_grad);
  }
  static Tensor Scalar(T v, bool requires_grad = false) { return FromData({1}, {v}, requires_grad); }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int dim(int i) const { return node_->shape.at(i < 0 ? i + rank() : i); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<const T> data() const { return node_->data; }
  std::span<T> mutable_data() { return node_->data; }
  const std::vector<T>& vec() const { return node_->data; }
  T item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + ShapeString(shape()));
    return node_->data[0];
  }
  T operator[](std::size_t i) const { return node_->data[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient buffer; zeros of matching size if nothing was accumulated.
  std::vector<T> grad() const {
    return node_->grad.empty() ? std::vector<T>(numel(), T(0)) : node_->grad;
  }
  void zero_grad() { node_->grad.clear(); }
  /// Keep this intermediate's gradient after backward().
  Tensor& retain_grad() {
    node_->retain_grad = true;
    return *this;
  }

  /// Same values, cut from the graph.
  Tensor detach() const { return FromData(shape(), node_->data, false); }

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

/// Creates the result node of an op. The graph link and backward closure are
/// only kept when grad mode is on and some parent requires grad.
template <typename T>
Tensor<T> MakeResult(Shape shape, std::vector<T> data, std::vector<Tensor<T>> parents,
                     const char* op, std::function<void(Node<T>&)> backward_fn) {
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->op = op;
  if (NumElements(n->shape) != n->data.size())
    throw ShapeError(std::string(op) + ": internal size mismatch for shape " + ShapeString(n->shape));
  bool any = false;
  for (const auto& p : parents) any = any || p.requires_grad();
  if (any && GradEnabled()) {
    n->requires_grad = true;
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node());
    n->backward_fn = std::move(backward_fn);
  }
  return Tensor<T>(std::move(n));
}

/// Runs reverse-mode accumulation from a scalar loss. Leaf gradients
/// accumulate across calls; intermediate state is released afterwards, so a
/// second call on the same graph is rejected.
template <typename T>
void Backward(const Tensor<T>& loss) {
  if (loss.numel() != 1)
    throw GraphError("backward() requires a scalar loss, got shape " + ShapeString(loss.shape()));
  auto root = loss.node();
  if (root->consumed) throw GraphError("backward() called twice on the same graph");
  if (!root->requires_grad) throw GraphError("loss does not depend on any tensor requiring grad");

  // Iterative post-order DFS; reverse of post-order is a topological order.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
  for (Node<T>* n : order) {
    if (n->is_leaf()) continue;
    n->backward_fn = nullptr;
    n->parents.clear();
    n->consumed = true;
    if (!n->retain_grad) {
      n->grad.clear();
      n->grad.shrink_to_fit();
    }
  }
}

template <typename T>
void RequireSameShape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + ShapeString(a.shape()) + " vs " +
                     ShapeString(b.shape()));
}

template <typename T>
void RequireRank(const Tensor<T>& a, int rank, const char* op) {
  if (a.rank() != rank)
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     ShapeString(a.shape()));
}

}  // namespace dkd
