#include "psr/autograd.hpp"

#include <unordered_set>

#include "psr/errors.hpp"

namespace psr {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

Tensor& Node::grad_buffer() {
  if (grad.size() != value.size() || grad.shape() != value.shape()) {
    grad = Tensor(value.shape(), 0.0);
  }
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
  if (requires_grad) node_->grad_buffer();
}

Var Var::make(Tensor value, const char* op, std::vector<Var> inputs,
              std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  if (g_grad_enabled) {
    bool any = false;
    for (const Var& in : inputs) any = any || in.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(inputs.size());
      for (const Var& in : inputs) node->parents.push_back(in.node_ptr());
      node->backward = std::move(backward);
    }
  }
  return Var(std::move(node));
}

const Tensor& Var::grad() const { return node_->grad_buffer(); }

void Var::zero_grad() { node_->grad_buffer().fill(0.0); }

void backward(const Var& output) {
  if (output.size() != 1) {
    throw DimensionError("backward requires a single-element output, got " +
                         shape_str(output.shape()));
  }
  if (!output.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(&output.node(), 0);
  visited.insert(&output.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior gradients are per-sweep; leaves accumulate.
  for (Node* n : order) {
    if (!n->parents.empty()) n->grad_buffer().fill(0.0);
  }
  output.node().grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n);
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace psr
