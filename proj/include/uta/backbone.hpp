#ifndef UTA_BACKBONE_HPP
#define UTA_BACKBONE_HPP

#include <map>
#include <string>
#include <vector>

#include "uta/layers.hpp"

namespace uta {

/// Weight-sharing encoder: five stage features, shallowest first, spatial
/// size non-increasing stage to stage.
class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual std::vector<Var> extract_stages(const Var& rgb, bool train) const = 0;
  virtual const std::vector<int>& stage_channels() const = 0;
  /// Input height/width must be divisible by this (product of the strides).
  virtual int size_divisor() const = 0;
  virtual void collect(const std::string& prefix, NamedVars& out) = 0;
};

/// Five conv blocks, strides [1,2,2,2,2], channels [8,16,32,64,64].
/// Deliberately small encoder for tests and smoke-scale training.
class TinyBackbone : public Backbone {
 public:
  explicit TinyBackbone(Rng& rng);

  std::vector<Var> extract_stages(const Var& rgb, bool train) const override;
  const std::vector<int>& stage_channels() const override { return channels_; }
  int size_divisor() const override { return 16; }
  void collect(const std::string& prefix, NamedVars& out) override;

  std::vector<ConvBlock> stages;

 private:
  std::vector<int> channels_{8, 16, 32, 64, 64};
};

/// Bottleneck residual unit: 1x1 reduce, 3x3 (carries the stride), 1x1
/// expand, plus a projection shortcut when the geometry changes. Layout
/// matches the widely published 50-layer residual network so converted
/// pretrained weights drop in by name.
struct Bottleneck {
  Bottleneck() = default;
  Bottleneck(int cin, int width, int stride, Rng& rng);

  Var forward(const Var& x, bool train) const;
  void collect(const std::string& prefix, NamedVars& out);

  Conv2d conv1, conv2, conv3;
  BatchNorm2d bn1, bn2, bn3;
  bool has_down = false;
  Conv2d down_conv;
  BatchNorm2d down_bn;
};

/// 50-layer residual encoder; stage strides [2,4,8,16,32], channels
/// [64,256,512,1024,2048]. Constructed with seeded random weights; real
/// pretrained weights are loaded by name via load_state.
class ResNet50 : public Backbone {
 public:
  explicit ResNet50(Rng& rng);

  std::vector<Var> extract_stages(const Var& rgb, bool train) const override;
  const std::vector<int>& stage_channels() const override { return channels_; }
  int size_divisor() const override { return 32; }
  void collect(const std::string& prefix, NamedVars& out) override;

  /// Overwrite every parameter and running statistic from `state`, matching
  /// by dotted name ("conv1.weight", "layer3.2.bn1.gamma", ...). Throws
  /// IoError when a name is missing, unknown, or has the wrong shape.
  void load_state(const std::map<std::string, Tensor>& state);

  Conv2d conv1;
  BatchNorm2d bn1;
  std::vector<Bottleneck> layer1, layer2, layer3, layer4;

 private:
  std::vector<int> channels_{64, 256, 512, 1024, 2048};
};

/// Context head on the deepest stage: parallel 1x1, three 3x3 dilated
/// convolutions (rates 2/4/6) and a broadcast global-average branch,
/// concatenated and projected down to `cprime` channels. Spatial size is
/// preserved.
class Aspp {
 public:
  Aspp() = default;
  Aspp(int cin, int cprime, Rng& rng);

  Var forward(const Var& x, bool train) const;
  void collect(const std::string& prefix, NamedVars& out);

  ConvBlock local, rate2, rate4, rate6;
  Conv2d pool_conv;  // 1x1 with bias, applied to the pooled vector
  ConvBlock project;
};

}  // namespace uta

#endif  // UTA_BACKBONE_HPP
