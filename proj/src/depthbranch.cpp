#include "uta/depthbranch.hpp"

#include "uta/core.hpp"

namespace uta {

Var multiply_merge(const Var& running, const Var& stage, const ConvBlock& proj,
                   bool train) {
  const Shape s = stage->value.shape();
  Var up = nn::resize_bilinear(running, s.h, s.w);
  return nn::mul(up, proj.forward(stage, train));
}

DepthDecoder::DepthDecoder(const std::vector<int>& stage_channels, int cprime,
                           Rng& rng, bool caf)
    : stem(cprime, cprime, 3, rng),
      head(cprime, 1, 1, 1, 0, 1, /*bias=*/true, rng),
      use_caf(caf) {
  if (use_caf) {
    merge4 = Caf(cprime, stage_channels.at(3), cprime, rng);
    merge3 = Caf(cprime, stage_channels.at(2), cprime, rng);
    merge2 = Caf(cprime, stage_channels.at(1), cprime, rng);
    merge1 = Caf(cprime, stage_channels.at(0), cprime, rng);
  } else {
    for (int k = 0; k < 4; ++k)
      projs.emplace_back(stage_channels.at(k), cprime, 1, rng);
  }
}

DepthDecoder::Out DepthDecoder::forward(const std::vector<Var>& stages,
                                        const Var& top, int in_h, int in_w,
                                        bool train) const {
  if (stages.size() != 5)
    throw ShapeError("depth decoder expects 5 encoder stages, got " +
                     std::to_string(stages.size()));
  Out o;
  Var d5 = stem.forward(top, train);
  Var d4, d3, d2, d1;
  if (use_caf) {
    d4 = merge4.forward(d5, stages[3], train);
    d3 = merge3.forward(d4, stages[2], train);
    d2 = merge2.forward(d3, stages[1], train);
    d1 = merge1.forward(d2, stages[0], train);
  } else {
    d4 = multiply_merge(d5, stages[3], projs[3], train);
    d3 = multiply_merge(d4, stages[2], projs[2], train);
    d2 = multiply_merge(d3, stages[1], projs[1], train);
    d1 = multiply_merge(d2, stages[0], projs[0], train);
  }
  o.feats = {d2, d3, d4, d5};
  // 1-channel projection, squashed into [eps_d, 1] so log-depth is defined.
  Var p = nn::sigmoid(head.forward(d1));
  p = nn::affine(p, 1.0 - kEpsDepth, kEpsDepth);
  o.p_d = nn::resize_bilinear(p, in_h, in_w);
  return o;
}

void DepthDecoder::collect(const std::string& prefix, NamedVars& out) {
  stem.collect(prefix + ".stem", out);
  if (use_caf) {
    merge4.collect(prefix + ".merge4", out);
    merge3.collect(prefix + ".merge3", out);
    merge2.collect(prefix + ".merge2", out);
    merge1.collect(prefix + ".merge1", out);
  } else {
    for (int k = 0; k < 4; ++k)
      projs[k].collect(prefix + ".proj" + std::to_string(k + 1), out);
  }
  head.collect(prefix + ".head", out);
}

Tensor dec_weights(const Tensor& p_d, const Tensor& y_d, int window) {
  if (!p_d.same_shape(y_d))
    throw ShapeError("dec_weights: shape mismatch " + p_d.shape().str() +
                     " vs " + y_d.shape().str());
  if (window < 1 || window % 2 == 0)
    throw ConfigError("dec_weights: window must be odd, got " +
                      std::to_string(window));
  const Shape s = p_d.shape();
  Tensor raw(s);
  for (std::int64_t i = 0; i < raw.numel(); ++i)
    raw[i] = std::abs(std::log(p_d[i]) - std::log(y_d[i]));

  if (window > 1) {
    // Zero-padded box mean of the pointwise errors.
    const int r = window / 2;
    Tensor sm(s);
    for (int b = 0; b < s.b; ++b)
      for (int c = 0; c < s.c; ++c) {
        const double* src = raw.data() + raw.idx(b, c, 0, 0);
        double* dst = sm.data() + sm.idx(b, c, 0, 0);
        for (int y = 0; y < s.h; ++y)
          for (int x = 0; x < s.w; ++x) {
            double acc = 0.0;
            for (int dy = -r; dy <= r; ++dy) {
              const int yy = y + dy;
              if (yy < 0 || yy >= s.h) continue;
              for (int dx = -r; dx <= r; ++dx) {
                const int xx = x + dx;
                if (xx >= 0 && xx < s.w) acc += src[yy * s.w + xx];
              }
            }
            dst[y * s.w + x] = acc / (window * window);
          }
      }
    raw = std::move(sm);
  }

  const std::int64_t per = static_cast<std::int64_t>(s.c) * s.h * s.w;
  for (int b = 0; b < s.b; ++b) {
    double* p = raw.data() + b * per;
    double mx = 0.0;
    for (std::int64_t i = 0; i < per; ++i) mx = std::max(mx, p[i]);
    if (mx == 0.0) continue;  // perfect depth: weights stay zero
    for (std::int64_t i = 0; i < per; ++i) p[i] /= mx;
  }
  return raw;
}

}  // namespace uta
