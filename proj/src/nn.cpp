#include "uta/nn.hpp"

#include <Eigen/Dense>

namespace uta::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a->value.same_shape(b->value))
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     a->value.shape().str() + " vs " + b->value.shape().str());
}

Var finish(Tensor out, std::vector<Var> inputs,
           std::function<void(Node&)> bwd) {
  Var o = make_var(std::move(out));
  if (track(inputs)) {
    o->requires_grad = true;
    o->parents = std::move(inputs);
    o->backprop = std::move(bwd);
  }
  return o;
}

}  // namespace

// ---- elementwise -----------------------------------------------------------

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out = a->value;
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] += b->value[i];
  return finish(std::move(out), {a, b}, [a, b](Node& o) {
    if (a->requires_grad) a->accum_grad(o.grad);
    if (b->requires_grad) b->accum_grad(o.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a->value;
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] -= b->value[i];
  return finish(std::move(out), {a, b}, [a, b](Node& o) {
    if (a->requires_grad) a->accum_grad(o.grad);
    if (b->requires_grad) {
      Tensor g = o.grad;
      for (std::int64_t i = 0; i < g.numel(); ++i) g[i] = -g[i];
      b->accum_grad(g);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out = a->value;
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] *= b->value[i];
  return finish(std::move(out), {a, b}, [a, b, n](Node& o) {
    if (a->requires_grad) {
      Tensor g = o.grad;
      for (std::int64_t i = 0; i < n; ++i) g[i] *= b->value[i];
      a->accum_grad(g);
    }
    if (b->requires_grad) {
      Tensor g = o.grad;
      for (std::int64_t i = 0; i < n; ++i) g[i] *= a->value[i];
      b->accum_grad(g);
    }
  });
}

Var div(const Var& a, const Var& b) {
  check_same_shape(a, b, "div");
  Tensor out = a->value;
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] /= b->value[i];
  return finish(std::move(out), {a, b}, [a, b, n](Node& o) {
    if (a->requires_grad) {
      Tensor g = o.grad;
      for (std::int64_t i = 0; i < n; ++i) g[i] /= b->value[i];
      a->accum_grad(g);
    }
    if (b->requires_grad) {
      Tensor g = o.grad;
      for (std::int64_t i = 0; i < n; ++i) {
        const double bv = b->value[i];
        g[i] *= -a->value[i] / (bv * bv);
      }
      b->accum_grad(g);
    }
  });
}

Var affine(const Var& x, double s, double t) {
  Tensor out = x->value;
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] = s * out[i] + t;
  return finish(std::move(out), {x}, [x, s, n](Node& o) {
    Tensor g = o.grad;
    for (std::int64_t i = 0; i < n; ++i) g[i] *= s;
    x->accum_grad(g);
  });
}

Var mul_tensor(const Var& x, const Tensor& t) {
  if (!x->value.same_shape(t))
    throw ShapeError("mul_tensor: shape mismatch " + x->value.shape().str() +
                     " vs " + t.shape().str());
  Tensor out = x->value;
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] *= t[i];
  return finish(std::move(out), {x}, [x, t, n](Node& o) {
    Tensor g = o.grad;
    for (std::int64_t i = 0; i < n; ++i) g[i] *= t[i];
    x->accum_grad(g);
  });
}

Var mul_channel_gate(const Var& x, const Var& gate) {
  const Shape& xs = x->value.shape();
  const Shape& gs = gate->value.shape();
  if (gs.b != xs.b || gs.c != xs.c || gs.h != 1 || gs.w != 1)
    throw ShapeError("mul_channel_gate: gate must be (B,C,1,1), got " +
                     gs.str() + " for x " + xs.str());
  Tensor out = x->value;
  const int hw = xs.h * xs.w;
  for (int b = 0; b < xs.b; ++b)
    for (int c = 0; c < xs.c; ++c) {
      const double g = gate->value.at(b, c, 0, 0);
      double* p = out.data() + out.idx(b, c, 0, 0);
      for (int i = 0; i < hw; ++i) p[i] *= g;
    }
  return finish(std::move(out), {x, gate}, [x, gate, xs, hw](Node& o) {
    if (x->requires_grad) {
      Tensor gx = o.grad;
      for (int b = 0; b < xs.b; ++b)
        for (int c = 0; c < xs.c; ++c) {
          const double g = gate->value.at(b, c, 0, 0);
          double* p = gx.data() + gx.idx(b, c, 0, 0);
          for (int i = 0; i < hw; ++i) p[i] *= g;
        }
      x->accum_grad(gx);
    }
    if (gate->requires_grad) {
      Tensor gg = Tensor::zeros(gate->value.shape());
      for (int b = 0; b < xs.b; ++b)
        for (int c = 0; c < xs.c; ++c) {
          const double* go = o.grad.data() + o.grad.idx(b, c, 0, 0);
          const double* xv = x->value.data() + x->value.idx(b, c, 0, 0);
          double s = 0.0;
          for (int i = 0; i < hw; ++i) s += go[i] * xv[i];
          gg.at(b, c, 0, 0) = s;
        }
      gate->accum_grad(gg);
    }
  });
}

Var mul_spatial_gate(const Var& x, const Var& gate) {
  const Shape& xs = x->value.shape();
  const Shape& gs = gate->value.shape();
  if (gs.b != xs.b || gs.c != 1 || gs.h != xs.h || gs.w != xs.w)
    throw ShapeError("mul_spatial_gate: gate must be (B,1,H,W), got " +
                     gs.str() + " for x " + xs.str());
  const int hw = xs.h * xs.w;
  Tensor out = x->value;
  for (int b = 0; b < xs.b; ++b) {
    const double* g = gate->value.data() + gate->value.idx(b, 0, 0, 0);
    for (int c = 0; c < xs.c; ++c) {
      double* p = out.data() + out.idx(b, c, 0, 0);
      for (int i = 0; i < hw; ++i) p[i] *= g[i];
    }
  }
  return finish(std::move(out), {x, gate}, [x, gate, xs, hw](Node& o) {
    if (x->requires_grad) {
      Tensor gx = o.grad;
      for (int b = 0; b < xs.b; ++b) {
        const double* g = gate->value.data() + gate->value.idx(b, 0, 0, 0);
        for (int c = 0; c < xs.c; ++c) {
          double* p = gx.data() + gx.idx(b, c, 0, 0);
          for (int i = 0; i < hw; ++i) p[i] *= g[i];
        }
      }
      x->accum_grad(gx);
    }
    if (gate->requires_grad) {
      Tensor gg = Tensor::zeros(gate->value.shape());
      for (int b = 0; b < xs.b; ++b) {
        double* acc = gg.data() + gg.idx(b, 0, 0, 0);
        for (int c = 0; c < xs.c; ++c) {
          const double* go = o.grad.data() + o.grad.idx(b, c, 0, 0);
          const double* xv = x->value.data() + x->value.idx(b, c, 0, 0);
          for (int i = 0; i < hw; ++i) acc[i] += go[i] * xv[i];
        }
      }
      gate->accum_grad(gg);
    }
  });
}

Var relu(const Var& x) {
  Tensor out = x->value;
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
  return finish(std::move(out), {x}, [x, n](Node& o) {
    Tensor g = o.grad;
    for (std::int64_t i = 0; i < n; ++i)
      if (x->value[i] <= 0.0) g[i] = 0.0;
    x->accum_grad(g);
  });
}

Var sigmoid(const Var& x, double eps) {
  const std::int64_t n = x->value.numel();
  Tensor out(x->value.shape());
  Tensor dfactor(x->value.shape());
  for (std::int64_t i = 0; i < n; ++i) {
    const double s = 1.0 / (1.0 + std::exp(-x->value[i]));
    if (s < eps) {
      out[i] = eps;
      dfactor[i] = 0.0;
    } else if (s > 1.0 - eps) {
      out[i] = 1.0 - eps;
      dfactor[i] = 0.0;
    } else {
      out[i] = s;
      dfactor[i] = s * (1.0 - s);
    }
  }
  return finish(std::move(out), {x},
                [x, dfactor = std::move(dfactor), n](Node& o) {
    Tensor g = o.grad;
    for (std::int64_t i = 0; i < n; ++i) g[i] *= dfactor[i];
    x->accum_grad(g);
  });
}

Var vlog(const Var& x) {
  const std::int64_t n = x->value.numel();
  Tensor out(x->value.shape());
  for (std::int64_t i = 0; i < n; ++i) {
    if (x->value[i] <= 0.0)
      throw std::domain_error("vlog: non-positive input");
    out[i] = std::log(x->value[i]);
  }
  return finish(std::move(out), {x}, [x, n](Node& o) {
    Tensor g = o.grad;
    for (std::int64_t i = 0; i < n; ++i) g[i] /= x->value[i];
    x->accum_grad(g);
  });
}

Var detach(const Var& x) { return make_var(x->value); }

// ---- structure -------------------------------------------------------------

Var concat_channels(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeError("concat_channels: no inputs");
  const Shape& s0 = xs[0]->value.shape();
  int ctot = 0;
  for (const auto& x : xs) {
    const Shape& s = x->value.shape();
    if (s.b != s0.b || s.h != s0.h || s.w != s0.w)
      throw ShapeError("concat_channels: spatial/batch mismatch " + s.str() +
                       " vs " + s0.str());
    ctot += s.c;
  }
  Tensor out({s0.b, ctot, s0.h, s0.w});
  const int hw = s0.h * s0.w;
  for (int b = 0; b < s0.b; ++b) {
    int coff = 0;
    for (const auto& x : xs) {
      const int c = x->value.shape().c;
      std::copy_n(x->value.data() + x->value.idx(b, 0, 0, 0),
                  static_cast<std::size_t>(c) * hw,
                  out.data() + out.idx(b, coff, 0, 0));
      coff += c;
    }
  }
  return finish(std::move(out), xs, [xs, s0, hw](Node& o) {
    for (int b = 0; b < s0.b; ++b) {
      int coff = 0;
      for (const auto& x : xs) {
        const int c = x->value.shape().c;
        if (x->requires_grad) {
          Tensor& g = x->ensure_grad();
          const double* src = o.grad.data() + o.grad.idx(b, coff, 0, 0);
          double* dst = g.data() + g.idx(b, 0, 0, 0);
          const std::int64_t count = static_cast<std::int64_t>(c) * hw;
          for (std::int64_t i = 0; i < count; ++i) dst[i] += src[i];
        }
        coff += c;
      }
    }
  });
}

namespace {

// Precomputed 1-D interpolation taps for align-corners-off bilinear resize.
struct Taps {
  std::vector<int> i0, i1;
  std::vector<double> w1;  // weight of i1; weight of i0 is 1-w1
};

Taps make_taps(int in, int out) {
  Taps t;
  t.i0.resize(out);
  t.i1.resize(out);
  t.w1.resize(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    if (src > in - 1) src = in - 1;
    const int i0 = static_cast<int>(src);
    t.i0[o] = i0;
    t.i1[o] = std::min(i0 + 1, in - 1);
    t.w1[o] = src - i0;
  }
  return t;
}

}  // namespace

Tensor resize_bilinear(const Tensor& x, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1)
    throw ShapeError("resize_bilinear: target size must be positive, got " +
                     std::to_string(out_h) + "x" + std::to_string(out_w));
  const Shape s = x.shape();
  if (s.h == out_h && s.w == out_w) return x;
  Tensor out({s.b, s.c, out_h, out_w});
  const Taps ty = make_taps(s.h, out_h);
  const Taps tx = make_taps(s.w, out_w);
  for (int b = 0; b < s.b; ++b)
    for (int c = 0; c < s.c; ++c) {
      const double* in = x.data() + x.idx(b, c, 0, 0);
      double* op = out.data() + out.idx(b, c, 0, 0);
      for (int oy = 0; oy < out_h; ++oy) {
        const double* r0 = in + static_cast<std::size_t>(ty.i0[oy]) * s.w;
        const double* r1 = in + static_cast<std::size_t>(ty.i1[oy]) * s.w;
        const double fy = ty.w1[oy];
        for (int ox = 0; ox < out_w; ++ox) {
          const double fx = tx.w1[ox];
          const double top = r0[tx.i0[ox]] * (1 - fx) + r0[tx.i1[ox]] * fx;
          const double bot = r1[tx.i0[ox]] * (1 - fx) + r1[tx.i1[ox]] * fx;
          op[oy * out_w + ox] = top * (1 - fy) + bot * fy;
        }
      }
    }
  return out;
}

Var resize_bilinear(const Var& x, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1)
    throw ShapeError("resize_bilinear: target size must be positive, got " +
                     std::to_string(out_h) + "x" + std::to_string(out_w));
  const Shape s = x->value.shape();
  if (s.h == out_h && s.w == out_w) {
    // Identity size: bit-exact copy.
    return finish(x->value, {x}, [x](Node& o) { x->accum_grad(o.grad); });
  }
  Tensor out = resize_bilinear(x->value, out_h, out_w);
  return finish(std::move(out), {x}, [x, s, out_h, out_w](Node& o) {
    Tensor g = Tensor::zeros(s);
    const Taps ty = make_taps(s.h, out_h);
    const Taps tx = make_taps(s.w, out_w);
    for (int b = 0; b < s.b; ++b)
      for (int c = 0; c < s.c; ++c) {
        double* gp = g.data() + g.idx(b, c, 0, 0);
        const double* op = o.grad.data() + o.grad.idx(b, c, 0, 0);
        for (int oy = 0; oy < out_h; ++oy) {
          const double fy = ty.w1[oy];
          double* r0 = gp + static_cast<std::size_t>(ty.i0[oy]) * s.w;
          double* r1 = gp + static_cast<std::size_t>(ty.i1[oy]) * s.w;
          for (int ox = 0; ox < out_w; ++ox) {
            const double fx = tx.w1[ox];
            const double go = op[oy * out_w + ox];
            r0[tx.i0[ox]] += go * (1 - fx) * (1 - fy);
            r0[tx.i1[ox]] += go * fx * (1 - fy);
            r1[tx.i0[ox]] += go * (1 - fx) * fy;
            r1[tx.i1[ox]] += go * fx * fy;
          }
        }
      }
    x->accum_grad(g);
  });
}

// ---- reductions ------------------------------------------------------------

Var sum_all(const Var& x) {
  Tensor out({1, 1, 1, 1});
  out[0] = x->value.sum();
  const Shape s = x->value.shape();
  return finish(std::move(out), {x}, [x, s](Node& o) {
    x->accum_grad(Tensor::full(s, o.grad[0]));
  });
}

Var mean_all(const Var& x) {
  const double n = static_cast<double>(x->value.numel());
  Tensor out({1, 1, 1, 1});
  out[0] = x->value.sum() / n;
  const Shape s = x->value.shape();
  return finish(std::move(out), {x}, [x, s, n](Node& o) {
    x->accum_grad(Tensor::full(s, o.grad[0] / n));
  });
}

Var sum_per_image(const Var& x) {
  const Shape s = x->value.shape();
  const std::int64_t chw = static_cast<std::int64_t>(s.c) * s.h * s.w;
  Tensor out({s.b, 1, 1, 1});
  for (int b = 0; b < s.b; ++b) {
    const double* p = x->value.data() + b * chw;
    double acc = 0.0;
    for (std::int64_t i = 0; i < chw; ++i) acc += p[i];
    out[b] = acc;
  }
  return finish(std::move(out), {x}, [x, s, chw](Node& o) {
    Tensor g(s);
    for (int b = 0; b < s.b; ++b)
      std::fill_n(g.data() + b * chw, chw, o.grad[b]);
    x->accum_grad(g);
  });
}

Var global_avg_pool(const Var& x) {
  const Shape s = x->value.shape();
  const int hw = s.h * s.w;
  Tensor out({s.b, s.c, 1, 1});
  for (int b = 0; b < s.b; ++b)
    for (int c = 0; c < s.c; ++c) {
      const double* p = x->value.data() + x->value.idx(b, c, 0, 0);
      double acc = 0.0;
      for (int i = 0; i < hw; ++i) acc += p[i];
      out.at(b, c, 0, 0) = acc / hw;
    }
  return finish(std::move(out), {x}, [x, s, hw](Node& o) {
    Tensor g(s);
    for (int b = 0; b < s.b; ++b)
      for (int c = 0; c < s.c; ++c)
        std::fill_n(g.data() + g.idx(b, c, 0, 0), hw,
                    o.grad.at(b, c, 0, 0) / hw);
    x->accum_grad(g);
  });
}

// ---- convolution -----------------------------------------------------------

namespace {

// Unpack one image into a (Cin*k*k) x (Ho*Wo) row-major patch matrix.
void im2col(const Tensor& x, int b, int k, int stride, int pad, int dil,
            int out_h, int out_w, RowMat& cols) {
  const Shape s = x.shape();
  cols.setZero(static_cast<Eigen::Index>(s.c) * k * k,
               static_cast<Eigen::Index>(out_h) * out_w);
  for (int c = 0; c < s.c; ++c) {
    const double* in = x.data() + x.idx(b, c, 0, 0);
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols.data() +
                      static_cast<std::size_t>((c * k + ky) * k + kx) *
                          (static_cast<std::size_t>(out_h) * out_w);
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky * dil;
          if (iy < 0 || iy >= s.h) continue;
          const double* irow = in + static_cast<std::size_t>(iy) * s.w;
          double* orow = row + static_cast<std::size_t>(oy) * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx * dil;
            if (ix >= 0 && ix < s.w) orow[ox] = irow[ix];
          }
        }
      }
  }
}

// Scatter a patch-matrix gradient back into image b of g.
void col2im(const RowMat& cols, int b, int k, int stride, int pad, int dil,
            int out_h, int out_w, Tensor& g) {
  const Shape s = g.shape();
  for (int c = 0; c < s.c; ++c) {
    double* gp = g.data() + g.idx(b, c, 0, 0);
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const double* row = cols.data() +
                            static_cast<std::size_t>((c * k + ky) * k + kx) *
                                (static_cast<std::size_t>(out_h) * out_w);
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky * dil;
          if (iy < 0 || iy >= s.h) continue;
          double* grow = gp + static_cast<std::size_t>(iy) * s.w;
          const double* orow = row + static_cast<std::size_t>(oy) * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx * dil;
            if (ix >= 0 && ix < s.w) grow[ix] += orow[ox];
          }
        }
      }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride,
           int pad, int dilation) {
  const Shape xs = x->value.shape();
  const Shape ws = weight->value.shape();
  if (ws.h != ws.w) throw ShapeError("conv2d: kernel must be square");
  if (xs.c != ws.c)
    throw ShapeError("conv2d: input channels " + std::to_string(xs.c) +
                     " do not match weight " + ws.str());
  if (bias && !(bias->value.shape() == Shape{1, ws.b, 1, 1}))
    throw ShapeError("conv2d: bias must be (1,Cout,1,1)");
  const int k = ws.h;
  const int out_h = conv_out_dim(xs.h, k, stride, pad, dilation);
  const int out_w = conv_out_dim(xs.w, k, stride, pad, dilation);
  if (out_h < 1 || out_w < 1)
    throw ShapeError("conv2d: input " + xs.str() + " too small for kernel");

  const Eigen::Index ckk = static_cast<Eigen::Index>(xs.c) * k * k;
  const Eigen::Index hw = static_cast<Eigen::Index>(out_h) * out_w;
  ConstRowMap wmat(weight->value.data(), ws.b, ckk);

  Tensor out({xs.b, ws.b, out_h, out_w});
  RowMat cols;
  for (int b = 0; b < xs.b; ++b) {
    im2col(x->value, b, k, stride, pad, dilation, out_h, out_w, cols);
    RowMap omat(out.data() + out.idx(b, 0, 0, 0), ws.b, hw);
    omat.noalias() = wmat * cols;
    if (bias)
      for (int c = 0; c < ws.b; ++c)
        omat.row(c).array() += bias->value[c];
  }

  auto bwd = [x, weight, bias, stride, pad, dilation, k, out_h, out_w, xs, ws,
              ckk, hw](Node& o) {
    RowMat cols, dcols;
    ConstRowMap wm(weight->value.data(), ws.b, ckk);
    const bool need_dx = x->requires_grad;
    const bool need_dw = weight->requires_grad;
    Tensor* gx = need_dx ? &x->ensure_grad() : nullptr;
    Tensor* gw = need_dw ? &weight->ensure_grad() : nullptr;
    for (int b = 0; b < xs.b; ++b) {
      ConstRowMap gom(o.grad.data() + o.grad.idx(b, 0, 0, 0), ws.b, hw);
      if (need_dw) {
        im2col(x->value, b, k, stride, pad, dilation, out_h, out_w, cols);
        RowMap gwm(gw->data(), ws.b, ckk);
        gwm.noalias() += gom * cols.transpose();
      }
      if (need_dx) {
        dcols.noalias() = wm.transpose() * gom;
        col2im(dcols, b, k, stride, pad, dilation, out_h, out_w, *gx);
      }
    }
    if (bias && bias->requires_grad) {
      Tensor gb = Tensor::zeros(bias->value.shape());
      for (int b = 0; b < xs.b; ++b) {
        ConstRowMap gom(o.grad.data() + o.grad.idx(b, 0, 0, 0), ws.b, hw);
        for (int c = 0; c < ws.b; ++c) gb[c] += gom.row(c).sum();
      }
      bias->accum_grad(gb);
    }
  };
  std::vector<Var> inputs = bias ? std::vector<Var>{x, weight, bias}
                                 : std::vector<Var>{x, weight};
  return finish(std::move(out), std::move(inputs), std::move(bwd));
}

Var max_pool2d(const Var& x, int kernel, int stride, int pad) {
  const Shape s = x->value.shape();
  const int out_h = conv_out_dim(s.h, kernel, stride, pad, 1);
  const int out_w = conv_out_dim(s.w, kernel, stride, pad, 1);
  if (out_h < 1 || out_w < 1)
    throw ShapeError("max_pool2d: input too small");
  Tensor out({s.b, s.c, out_h, out_w});
  std::vector<std::int64_t> argmax(
      static_cast<std::size_t>(out.numel()));
  std::size_t oi = 0;
  for (int b = 0; b < s.b; ++b)
    for (int c = 0; c < s.c; ++c) {
      const double* in = x->value.data() + x->value.idx(b, c, 0, 0);
      const std::int64_t base = static_cast<std::int64_t>(
          x->value.idx(b, c, 0, 0));
      for (int oy = 0; oy < out_h; ++oy)
        for (int ox = 0; ox < out_w; ++ox, ++oi) {
          double best = -1e308;
          std::int64_t besti = -1;
          for (int ky = 0; ky < kernel; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= s.h) continue;
            for (int kx = 0; kx < kernel; ++kx) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= s.w) continue;
              const double v = in[iy * s.w + ix];
              if (v > best) {
                best = v;
                besti = base + iy * s.w + ix;
              }
            }
          }
          out[oi] = best;
          argmax[oi] = besti;
        }
    }
  return finish(std::move(out), {x},
                [x, argmax = std::move(argmax)](Node& o) {
    Tensor& g = x->ensure_grad();
    for (std::size_t i = 0; i < argmax.size(); ++i)
      g[static_cast<std::size_t>(argmax[i])] += o.grad[i];
  });
}

// ---- batch norm ------------------------------------------------------------

Var batch_norm(const Var& x, const Var& gamma, const Var& beta,
               Tensor& running_mean, Tensor& running_var, bool training,
               double momentum, double eps) {
  const Shape s = x->value.shape();
  if (gamma->value.shape() != Shape{1, s.c, 1, 1} ||
      beta->value.shape() != Shape{1, s.c, 1, 1})
    throw ShapeError("batch_norm: gamma/beta must be (1,C,1,1)");
  const int hw = s.h * s.w;
  const std::int64_t n = static_cast<std::int64_t>(s.b) * hw;

  std::vector<double> mean_c(s.c), invstd_c(s.c);
  if (training) {
    for (int c = 0; c < s.c; ++c) {
      double m = 0.0;
      for (int b = 0; b < s.b; ++b) {
        const double* p = x->value.data() + x->value.idx(b, c, 0, 0);
        for (int i = 0; i < hw; ++i) m += p[i];
      }
      m /= n;
      double v = 0.0;
      for (int b = 0; b < s.b; ++b) {
        const double* p = x->value.data() + x->value.idx(b, c, 0, 0);
        for (int i = 0; i < hw; ++i) {
          const double d = p[i] - m;
          v += d * d;
        }
      }
      v /= n;
      mean_c[c] = m;
      invstd_c[c] = 1.0 / std::sqrt(v + eps);
      const double unbiased = n > 1 ? v * n / (n - 1.0) : v;
      running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * m;
      running_var[c] = (1.0 - momentum) * running_var[c] + momentum * unbiased;
    }
  } else {
    for (int c = 0; c < s.c; ++c) {
      mean_c[c] = running_mean[c];
      invstd_c[c] = 1.0 / std::sqrt(running_var[c] + eps);
    }
  }

  Tensor xhat(s);
  Tensor out(s);
  for (int b = 0; b < s.b; ++b)
    for (int c = 0; c < s.c; ++c) {
      const double* p = x->value.data() + x->value.idx(b, c, 0, 0);
      double* xh = xhat.data() + xhat.idx(b, c, 0, 0);
      double* op = out.data() + out.idx(b, c, 0, 0);
      const double g = gamma->value[c], bb = beta->value[c];
      const double m = mean_c[c], is = invstd_c[c];
      for (int i = 0; i < hw; ++i) {
        xh[i] = (p[i] - m) * is;
        op[i] = g * xh[i] + bb;
      }
    }

  auto bwd = [x, gamma, beta, s, hw, n, training,
              invstd = std::move(invstd_c), xhat = std::move(xhat)](Node& o) {
    // d_beta and d_gamma are shared between modes.
    if (beta->requires_grad) {
      Tensor gb = Tensor::zeros({1, s.c, 1, 1});
      for (int b = 0; b < s.b; ++b)
        for (int c = 0; c < s.c; ++c) {
          const double* go = o.grad.data() + o.grad.idx(b, c, 0, 0);
          for (int i = 0; i < hw; ++i) gb[c] += go[i];
        }
      beta->accum_grad(gb);
    }
    if (gamma->requires_grad) {
      Tensor gg = Tensor::zeros({1, s.c, 1, 1});
      for (int b = 0; b < s.b; ++b)
        for (int c = 0; c < s.c; ++c) {
          const double* go = o.grad.data() + o.grad.idx(b, c, 0, 0);
          const double* xh = xhat.data() + xhat.idx(b, c, 0, 0);
          for (int i = 0; i < hw; ++i) gg[c] += go[i] * xh[i];
        }
      gamma->accum_grad(gg);
    }
    if (!x->requires_grad) return;
    Tensor gx(s);
    if (training) {
      // Full backward through the batch statistics.
      for (int c = 0; c < s.c; ++c) {
        double sum_go = 0.0, sum_go_xh = 0.0;
        for (int b = 0; b < s.b; ++b) {
          const double* go = o.grad.data() + o.grad.idx(b, c, 0, 0);
          const double* xh = xhat.data() + xhat.idx(b, c, 0, 0);
          for (int i = 0; i < hw; ++i) {
            sum_go += go[i];
            sum_go_xh += go[i] * xh[i];
          }
        }
        const double mean_go = sum_go / n;
        const double mean_go_xh = sum_go_xh / n;
        const double k = gamma->value[c] * invstd[c];
        for (int b = 0; b < s.b; ++b) {
          const double* go = o.grad.data() + o.grad.idx(b, c, 0, 0);
          const double* xh = xhat.data() + xhat.idx(b, c, 0, 0);
          double* gp = gx.data() + gx.idx(b, c, 0, 0);
          for (int i = 0; i < hw; ++i)
            gp[i] = k * (go[i] - mean_go - xh[i] * mean_go_xh);
        }
      }
    } else {
      for (int b = 0; b < s.b; ++b)
        for (int c = 0; c < s.c; ++c) {
          const double k = gamma->value[c] * invstd[c];
          const double* go = o.grad.data() + o.grad.idx(b, c, 0, 0);
          double* gp = gx.data() + gx.idx(b, c, 0, 0);
          for (int i = 0; i < hw; ++i) gp[i] = k * go[i];
        }
    }
    x->accum_grad(gx);
  };
  return finish(std::move(out), {x, gamma, beta}, std::move(bwd));
}

}  // namespace uta::nn
