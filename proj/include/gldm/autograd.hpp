#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "gldm/tensor.hpp"

namespace gldm {
inline namespace GLDM_ABI {

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One value in the computation graph. `backward` reads `grad` and pushes
/// contributions into the inputs' grads.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<NodePtr> inputs;
  std::function<void(Node&)> backward;

  void accumulate_grad(Tensor g);
  /// Adds into grad, allocating zeros on first use; returns the grad buffer.
  Tensor& grad_buffer();
};

/// Handle to a graph node. Copies alias the same node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  const Shape& shape() const { return node_->value.shape(); }
  index_t dim(int axis) const { return node_->value.dim(axis); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  void zero_grad() { node_->grad = Tensor(); }
  const NodePtr& node() const { return node_; }

  /// Reverse-mode sweep from a scalar; the graph is released afterwards.
  void backward() const;
  /// Same, seeding with an explicit output gradient.
  void backward(const Tensor& seed) const;

 private:
  NodePtr node_;
};

bool grad_enabled();

/// Disables graph recording for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Wraps `value` as the output of an op over `inputs`. The closure is kept
/// only when recording is on and some input requires a gradient.
Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward);

}  // namespace GLDM_ABI
}  // namespace gldm
