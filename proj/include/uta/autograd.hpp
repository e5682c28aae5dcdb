#ifndef UTA_AUTOGRAD_HPP
#define UTA_AUTOGRAD_HPP

#include <functional>
#include <memory>
#include <vector>

#include "uta/tensor.hpp"

namespace uta {

/// One value in the reverse-mode tape. Ops allocate a fresh node per output;
/// parameters are long-lived leaf nodes whose grads persist until zeroed.
class Node {
 public:
  Tensor value;
  Tensor grad;            // allocated on first accumulation
  bool has_grad = false;  // true once grad holds data for this pass
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;  // scatter this->grad into parents

  explicit Node(Tensor v) : value(std::move(v)) {}

  void accum_grad(const Tensor& g) {
    if (!has_grad) {
      grad = g;
      has_grad = true;
    } else {
      double* d = grad.data();
      const double* s = g.data();
      const std::int64_t n = grad.numel();
      for (std::int64_t i = 0; i < n; ++i) d[i] += s[i];
    }
  }
  Tensor& ensure_grad() {
    if (!has_grad) {
      grad = Tensor::zeros(value.shape());
      has_grad = true;
    }
    return grad;
  }
  void zero_grad() {
    has_grad = false;
    grad = Tensor();
  }
};

using Var = std::shared_ptr<Node>;

inline Var make_var(Tensor v) { return std::make_shared<Node>(std::move(v)); }
inline Var make_param(Tensor v) {
  Var p = make_var(std::move(v));
  p->requires_grad = true;
  return p;
}

/// Tape construction can be disabled for inference to skip closure bookkeeping.
bool grad_enabled();

struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

/// Whether building an op on these inputs should record a backward closure.
bool track(const std::vector<Var>& inputs);

/// Reverse-mode sweep from `root` (grad seeded with ones). Iterative
/// topological order, so arbitrarily deep graphs are fine.
void backward(const Var& root);

}  // namespace uta

#endif  // UTA_AUTOGRAD_HPP
