#ifndef UTA_LAYERS_HPP
#define UTA_LAYERS_HPP

#include <string>
#include <utility>
#include <vector>

#include "uta/nn.hpp"

namespace uta {

/// Flat registry of named parameters and buffers, filled by Module::collect.
/// Names are dotted paths ("backbone.stage1.conv.weight"); the optimizer
/// assigns learning-rate groups by prefix and the checkpoint stores entries
/// under these names.
struct NamedVars {
  std::vector<std::pair<std::string, Var>> params;
  std::vector<std::pair<std::string, Tensor*>> buffers;

  void add(const std::string& name, const Var& v) {
    params.emplace_back(name, v);
  }
  void add_buffer(const std::string& name, Tensor* t) {
    buffers.emplace_back(name, t);
  }
};

/// Plain 2-D convolution layer. Kaiming-normal weight init, zero bias.
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int cin, int cout, int k, int stride, int pad, int dilation,
         bool bias, Rng& rng);

  Var forward(const Var& x) const;
  void collect(const std::string& prefix, NamedVars& out);

  Var weight, bias;  // bias null when disabled
  int stride = 1, pad = 0, dilation = 1;
};

class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(int c);

  Var forward(const Var& x, bool train) const;
  void collect(const std::string& prefix, NamedVars& out);

  Var gamma, beta;
  // Running statistics live outside the tape; mutable so a const forward in
  // training mode can still fold the batch stats in.
  mutable Tensor running_mean, running_var;
  double momentum = 0.1;
};

/// conv -> batch norm -> (optional) ReLU; the building block every fusion
/// module in this network is made of.
class ConvBlock {
 public:
  ConvBlock() = default;
  ConvBlock(int cin, int cout, int k, Rng& rng, int stride = 1, int pad = -1,
            int dilation = 1, bool relu_after = true);

  Var forward(const Var& x, bool train) const;
  void collect(const std::string& prefix, NamedVars& out);

  Conv2d conv;
  BatchNorm2d bn;
  bool relu_after = true;
};

}  // namespace uta

#endif  // UTA_LAYERS_HPP
