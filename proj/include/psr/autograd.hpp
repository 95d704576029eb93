#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "psr/tensor.hpp"

namespace psr {

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One recorded value in the computation graph. `backward` reads `grad`
/// and accumulates into the parents' gradients.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward;

  Tensor& grad_buffer();
};

/// Handle to a graph node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  static Var make(Tensor value, const char* op, std::vector<Var> inputs,
                  std::function<void(Node&)> backward);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  int dim(int axis) const { return node_->value.dim(axis); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  /// Gradient accumulated by the last backward pass (zeros if none).
  const Tensor& grad() const;
  void zero_grad();

  Node& node() const { return *node_; }
  const NodePtr& node_ptr() const { return node_; }

 private:
  explicit Var(NodePtr node) : node_(std::move(node)) {}
  NodePtr node_;
};

/// Reverse sweep from a scalar (single-element) output. Gradients of leaves
/// accumulate across calls until zeroed.
void backward(const Var& output);

bool grad_enabled();

/// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace psr
