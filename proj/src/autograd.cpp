#include "uta/autograd.hpp"

#include <unordered_set>

namespace uta {

namespace {
bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

bool track(const std::vector<Var>& inputs) {
  if (!g_grad_enabled) return false;
  for (const auto& v : inputs)
    if (v && v->requires_grad) return true;
  return false;
}

void backward(const Var& root) {
  if (!root) throw std::runtime_error("backward on null var");
  // Iterative post-order DFS to get a topological ordering.
  std::vector<Node*> topo;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }

  root->accum_grad(Tensor::full(root->value.shape(), 1.0));
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Node* n = *it;
    if (n->backprop && n->has_grad) n->backprop(*n);
  }
  // Free interior closures so the tape releases promptly; leaf params have
  // no closures and keep their grads.
  for (Node* n : topo) n->backprop = nullptr;
}

}  // namespace uta
