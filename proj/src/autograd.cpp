#include "gldm/autograd.hpp"

#include <unordered_set>

#include "gldm/errors.hpp"

namespace gldm {
inline namespace GLDM_ABI {
namespace {

thread_local bool g_grad_enabled = true;

// Owning handles: releasing a parent's inputs during the sweep must not free
// children that are still pending.
std::vector<NodePtr> topological_order(const NodePtr& root) {
  std::vector<NodePtr> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<NodePtr, std::size_t>> stack{{root, 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    Node* node = stack.back().first.get();
    std::size_t& next = stack.back().second;
    if (next < node->inputs.size()) {
      NodePtr child = node->inputs[next++];
      if (child->requires_grad && seen.insert(child.get()).second) stack.emplace_back(std::move(child), 0);
    } else {
      order.push_back(std::move(stack.back().first));
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace

void Node::accumulate_grad(Tensor g) {
  if (!requires_grad) return;
  if (grad.empty()) {
    grad = std::move(g);
    return;
  }
  if (!grad.same_shape(g)) {
    throw ShapeError("gradient shape " + shape_str(g.shape()) + " does not match " +
                     shape_str(grad.shape()));
  }
  real* dst = grad.data();
  const real* src = g.data();
  for (index_t i = 0; i < grad.numel(); ++i) dst[i] += src[i];
}

Tensor& Node::grad_buffer() {
  if (grad.empty()) grad = Tensor(value.shape());
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

void Var::backward() const {
  if (node_->value.numel() != 1) {
    throw ShapeError("backward() without a seed needs a scalar, got " + shape_str(shape()));
  }
  backward(Tensor(node_->value.shape(), real(1)));
}

void Var::backward(const Tensor& seed) const {
  if (!node_->requires_grad) return;
  if (!seed.same_shape(node_->value)) {
    throw ShapeError("backward seed " + shape_str(seed.shape()) + " vs value " + shape_str(shape()));
  }
  node_->accumulate_grad(seed);
  const std::vector<NodePtr> order = topological_order(node_);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = it->get();
    if (n->backward && !n->grad.empty()) n->backward(*n);
    if (!n->inputs.empty()) {
      // Interior node: drop the closure and its saved tensors.
      n->backward = nullptr;
      n->inputs.clear();
      if (n != node_.get()) n->grad = Tensor();
    }
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool any = false;
    for (const Var& v : inputs) any = any || v.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->inputs.reserve(inputs.size());
      for (const Var& v : inputs) node->inputs.push_back(v.node());
      node->backward = std::move(backward);
    }
  }
  return Var(std::move(node));
}

}  // namespace GLDM_ABI
}  // namespace gldm
