#include "uta/spm.hpp"

namespace uta {

Spm::Spm(int cprime, Rng& rng)
    : edge1(2 * cprime, cprime, 1, rng),
      edge2(cprime, cprime, 3, rng),
      edge3(cprime, 1, 1, 1, 0, 1, /*bias=*/true, rng),
      reduce(2 * cprime, cprime, 3, rng) {}

Spm::Out Spm::forward(const Var& f_rgb, const Var& f_depth, bool train) const {
  if (!f_rgb->value.same_shape(f_depth->value))
    throw ShapeError("spm: inputs must share shape, got " +
                     f_rgb->value.shape().str() + " vs " +
                     f_depth->value.shape().str());
  // Depth spatial attention with residual: rgb * sigmoid(depth) + rgb.
  Var attended = nn::add(nn::mul(f_rgb, nn::sigmoid(f_depth)), f_rgb);
  Var dsa = nn::concat_channels({attended, f_depth});  // 2C'

  Out o;
  o.edge_logits = edge3.forward(edge2.forward(edge1.forward(dsa, train), train));
  Var rs = reduce.forward(dsa, train);
  o.fused = nn::add(nn::mul_spatial_gate(rs, nn::sigmoid(o.edge_logits)), rs);
  return o;
}

void Spm::collect(const std::string& prefix, NamedVars& out) {
  edge1.collect(prefix + ".edge1", out);
  edge2.collect(prefix + ".edge2", out);
  edge3.collect(prefix + ".edge3", out);
  reduce.collect(prefix + ".reduce", out);
}

Tensor make_edge_target(const Tensor& mask, int dilate) {
  const Shape s = mask.shape();
  if (s.c != 1)
    throw ShapeError("make_edge_target: expected (B,1,H,W), got " + s.str());
  if (dilate < 1 || dilate % 2 == 0)
    throw ConfigError("make_edge_target: dilation size must be odd, got " +
                      std::to_string(dilate));
  const int r = dilate / 2;
  Tensor out = Tensor::zeros(s);
  for (int b = 0; b < s.b; ++b) {
    const double* m = mask.data() + mask.idx(b, 0, 0, 0);
    auto fg = [&](int y, int x) {
      return y >= 0 && y < s.h && x >= 0 && x < s.w && m[y * s.w + x] != 0.0;
    };
    double* e = out.data() + out.idx(b, 0, 0, 0);
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) {
        if (!fg(y, x)) continue;
        if (fg(y - 1, x) && fg(y + 1, x) && fg(y, x - 1) && fg(y, x + 1))
          continue;  // interior pixel
        // Boundary pixel: stamp the dilation footprint around it.
        for (int dy = -r; dy <= r; ++dy) {
          const int yy = y + dy;
          if (yy < 0 || yy >= s.h) continue;
          for (int dx = -r; dx <= r; ++dx) {
            const int xx = x + dx;
            if (xx >= 0 && xx < s.w) e[yy * s.w + xx] = 1.0;
          }
        }
      }
  }
  return out;
}

}  // namespace uta
