#include "uta/backbone.hpp"

#include "uta/nn.hpp"

namespace uta {

TinyBackbone::TinyBackbone(Rng& rng) {
  int cin = 3;
  for (std::size_t k = 0; k < channels_.size(); ++k) {
    const int stride = k == 0 ? 1 : 2;
    stages.emplace_back(cin, channels_[k], 3, rng, stride);
    cin = channels_[k];
  }
}

std::vector<Var> TinyBackbone::extract_stages(const Var& rgb,
                                              bool train) const {
  const Shape s = rgb->value.shape();
  if (s.c != 3 || s.h % size_divisor() != 0 || s.w % size_divisor() != 0)
    throw ShapeError("tiny backbone wants (B,3,16k,16k), got " + s.str());
  std::vector<Var> out;
  Var x = rgb;
  for (const ConvBlock& st : stages) {
    x = st.forward(x, train);
    out.push_back(x);
  }
  return out;
}

void TinyBackbone::collect(const std::string& prefix, NamedVars& out) {
  for (std::size_t k = 0; k < stages.size(); ++k)
    stages[k].collect(prefix + ".stage" + std::to_string(k + 1), out);
}

Bottleneck::Bottleneck(int cin, int width, int stride, Rng& rng)
    : conv1(cin, width, 1, 1, 0, 1, false, rng),
      bn1(width),
      conv2(width, width, 3, stride, 1, 1, false, rng),
      bn2(width),
      conv3(width, width * 4, 1, 1, 0, 1, false, rng),
      bn3(width * 4) {
  if (stride != 1 || cin != width * 4) {
    has_down = true;
    down_conv = Conv2d(cin, width * 4, 1, stride, 0, 1, false, rng);
    down_bn = BatchNorm2d(width * 4);
  }
}

Var Bottleneck::forward(const Var& x, bool train) const {
  Var out = nn::relu(bn1.forward(conv1.forward(x), train));
  out = nn::relu(bn2.forward(conv2.forward(out), train));
  out = bn3.forward(conv3.forward(out), train);
  Var idn = has_down ? down_bn.forward(down_conv.forward(x), train) : x;
  return nn::relu(nn::add(out, idn));
}

void Bottleneck::collect(const std::string& prefix, NamedVars& out) {
  conv1.collect(prefix + ".conv1", out);
  bn1.collect(prefix + ".bn1", out);
  conv2.collect(prefix + ".conv2", out);
  bn2.collect(prefix + ".bn2", out);
  conv3.collect(prefix + ".conv3", out);
  bn3.collect(prefix + ".bn3", out);
  if (has_down) {
    down_conv.collect(prefix + ".downsample.0", out);
    down_bn.collect(prefix + ".downsample.1", out);
  }
}

namespace {

std::vector<Bottleneck> make_layer(int& cin, int width, int blocks,
                                   int stride, Rng& rng) {
  std::vector<Bottleneck> layer;
  layer.emplace_back(cin, width, stride, rng);
  cin = width * 4;
  for (int i = 1; i < blocks; ++i) layer.emplace_back(cin, width, 1, rng);
  return layer;
}

}  // namespace

ResNet50::ResNet50(Rng& rng)
    : conv1(3, 64, 7, 2, 3, 1, false, rng), bn1(64) {
  int cin = 64;
  layer1 = make_layer(cin, 64, 3, 1, rng);
  layer2 = make_layer(cin, 128, 4, 2, rng);
  layer3 = make_layer(cin, 256, 6, 2, rng);
  layer4 = make_layer(cin, 512, 3, 2, rng);
}

std::vector<Var> ResNet50::extract_stages(const Var& rgb, bool train) const {
  const Shape s = rgb->value.shape();
  if (s.c != 3 || s.h % size_divisor() != 0 || s.w % size_divisor() != 0)
    throw ShapeError("resnet50 backbone wants (B,3,32k,32k), got " + s.str());
  std::vector<Var> out;
  Var x = nn::relu(bn1.forward(conv1.forward(rgb), train));
  out.push_back(x);  // stride 2
  x = nn::max_pool2d(x, 3, 2, 1);
  for (const auto* layer : {&layer1, &layer2, &layer3, &layer4}) {
    for (const Bottleneck& b : *layer) x = b.forward(x, train);
    out.push_back(x);
  }
  return out;
}

void ResNet50::collect(const std::string& prefix, NamedVars& out) {
  conv1.collect(prefix + ".conv1", out);
  bn1.collect(prefix + ".bn1", out);
  const char* names[4] = {".layer1.", ".layer2.", ".layer3.", ".layer4."};
  std::vector<Bottleneck>* layers[4] = {&layer1, &layer2, &layer3, &layer4};
  for (int l = 0; l < 4; ++l)
    for (std::size_t i = 0; i < layers[l]->size(); ++i)
      (*layers[l])[i].collect(prefix + names[l] + std::to_string(i), out);
}

void ResNet50::load_state(const std::map<std::string, Tensor>& state) {
  NamedVars named;
  collect("", named);  // names come out as ".conv1.weight" etc.
  std::size_t used = 0;
  auto fetch = [&](const std::string& dotted) -> const Tensor& {
    const auto it = state.find(dotted.substr(1));  // drop the leading dot
    if (it == state.end())
      throw IoError("backbone weights missing entry: " + dotted.substr(1));
    ++used;
    return it->second;
  };
  for (auto& [name, var] : named.params) {
    const Tensor& src = fetch(name);
    if (!(src.shape() == var->value.shape()))
      throw IoError("backbone weight shape mismatch for " + name.substr(1) +
                    ": " + src.shape().str() + " vs " +
                    var->value.shape().str());
    var->value = src;
  }
  for (auto& [name, buf] : named.buffers) {
    const Tensor& src = fetch(name);
    if (!(src.shape() == buf->shape()))
      throw IoError("backbone buffer shape mismatch for " + name.substr(1));
    *buf = src;
  }
  if (used != state.size())
    throw IoError("backbone weights contain " +
                  std::to_string(state.size() - used) + " unknown entries");
}

Aspp::Aspp(int cin, int cprime, Rng& rng)
    : local(cin, cprime, 1, rng),
      rate2(cin, cprime, 3, rng, 1, -1, 2),
      rate4(cin, cprime, 3, rng, 1, -1, 4),
      rate6(cin, cprime, 3, rng, 1, -1, 6),
      pool_conv(cin, cprime, 1, 1, 0, 1, true, rng),
      project(5 * cprime, cprime, 1, rng) {}

Var Aspp::forward(const Var& x, bool train) const {
  const Shape s = x->value.shape();
  Var pooled = nn::relu(pool_conv.forward(nn::global_avg_pool(x)));
  pooled = nn::resize_bilinear(pooled, s.h, s.w);
  Var cat = nn::concat_channels({local.forward(x, train), rate2.forward(x, train),
                             rate4.forward(x, train), rate6.forward(x, train),
                             pooled});
  return project.forward(cat, train);
}

void Aspp::collect(const std::string& prefix, NamedVars& out) {
  local.collect(prefix + ".local", out);
  rate2.collect(prefix + ".rate2", out);
  rate4.collect(prefix + ".rate4", out);
  rate6.collect(prefix + ".rate6", out);
  pool_conv.collect(prefix + ".pool", out);
  project.collect(prefix + ".project", out);
}

}  // namespace uta
