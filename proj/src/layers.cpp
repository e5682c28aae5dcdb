#include "uta/layers.hpp"

namespace uta {

Conv2d::Conv2d(int cin, int cout, int k, int stride_, int pad_, int dilation_,
               bool with_bias, Rng& rng)
    : stride(stride_), pad(pad_), dilation(dilation_) {
  const double std = std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
  weight = make_param(Tensor::randn({cout, cin, k, k}, rng, std));
  if (with_bias) bias = make_param(Tensor::zeros({1, cout, 1, 1}));
}

Var Conv2d::forward(const Var& x) const {
  return nn::conv2d(x, weight, bias, stride, pad, dilation);
}

void Conv2d::collect(const std::string& prefix, NamedVars& out) {
  out.add(prefix + ".weight", weight);
  if (bias) out.add(prefix + ".bias", bias);
}

BatchNorm2d::BatchNorm2d(int c)
    : gamma(make_param(Tensor::full({1, c, 1, 1}, 1.0))),
      beta(make_param(Tensor::zeros({1, c, 1, 1}))),
      running_mean(Tensor::zeros({1, c, 1, 1})),
      running_var(Tensor::full({1, c, 1, 1}, 1.0)) {}

Var BatchNorm2d::forward(const Var& x, bool train) const {
  return nn::batch_norm(x, gamma, beta, running_mean, running_var, train,
                        momentum);
}

void BatchNorm2d::collect(const std::string& prefix, NamedVars& out) {
  out.add(prefix + ".gamma", gamma);
  out.add(prefix + ".beta", beta);
  out.add_buffer(prefix + ".running_mean", &running_mean);
  out.add_buffer(prefix + ".running_var", &running_var);
}

ConvBlock::ConvBlock(int cin, int cout, int k, Rng& rng, int stride, int pad,
                     int dilation, bool relu_after_)
    : conv(cin, cout, k, stride,
           pad < 0 ? dilation * (k - 1) / 2 : pad,  // same-size default
           dilation, /*bias=*/false, rng),
      bn(cout),
      relu_after(relu_after_) {}

Var ConvBlock::forward(const Var& x, bool train) const {
  Var y = bn.forward(conv.forward(x), train);
  return relu_after ? nn::relu(y) : y;
}

void ConvBlock::collect(const std::string& prefix, NamedVars& out) {
  conv.collect(prefix + ".conv", out);
  bn.collect(prefix + ".bn", out);
}

}  // namespace uta
