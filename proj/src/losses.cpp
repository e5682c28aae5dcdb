#include "uta/losses.hpp"

namespace uta {

namespace {

// Elementwise -[y log p + (1-y) log(1-p)] as a graph node.
Var bce_pixelwise(const Var& p, const Tensor& y, bool single_term) {
  if (!p->value.same_shape(y))
    throw ShapeError("bce: shape mismatch " + p->value.shape().str() + " vs " +
                     y.shape().str());
  Var pos = nn::mul_tensor(nn::vlog(p), y);
  if (single_term) return nn::scale(pos, -1.0);
  Tensor ynot = y;
  for (std::int64_t i = 0; i < ynot.numel(); ++i) ynot[i] = 1.0 - ynot[i];
  Var neg = nn::mul_tensor(nn::vlog(nn::affine(p, -1.0, 1.0)), ynot);
  return nn::scale(nn::add(pos, neg), -1.0);
}

}  // namespace

Var bce_loss(const Var& p, const Tensor& y, bool single_term) {
  return nn::mean_all(bce_pixelwise(p, y, single_term));
}

Var iou_loss(const Var& p, const Tensor& y) {
  if (!p->value.same_shape(y))
    throw ShapeError("iou: shape mismatch " + p->value.shape().str() + " vs " +
                     y.shape().str());
  Var inter = nn::sum_per_image(nn::mul_tensor(p, y));  // (B,1,1,1)
  Var psum = nn::sum_per_image(p);
  const Shape s = p->value.shape();
  Tensor ysum({s.b, 1, 1, 1});
  const std::int64_t per = static_cast<std::int64_t>(s.c) * s.h * s.w;
  for (int b = 0; b < s.b; ++b) {
    double acc = 0.0;
    const double* yp = y.data() + b * per;
    for (std::int64_t i = 0; i < per; ++i) acc += yp[i];
    ysum[b] = acc;
  }
  // union = sum(y) + sum(p) - sum(y*p); +1 smoothing on both sides.
  Var uni = nn::sub(nn::add(psum, make_var(ysum)), inter);
  Var frac = nn::div(nn::affine(inter, 1.0, 1.0), nn::affine(uni, 1.0, 1.0));
  return nn::mean_all(nn::affine(frac, -1.0, 1.0));
}

Var depth_loss(const Var& p_d, const Tensor& y_d) {
  if (!p_d->value.same_shape(y_d))
    throw ShapeError("depth_loss: shape mismatch " + p_d->value.shape().str() +
                     " vs " + y_d.shape().str());
  Tensor logy = y_d;
  for (std::int64_t i = 0; i < logy.numel(); ++i) {
    if (logy[i] <= 0.0)
      throw std::domain_error("depth_loss: non-positive target depth");
    logy[i] = std::log(logy[i]);
  }
  Var d = nn::sub(nn::vlog(p_d), make_var(std::move(logy)));
  return nn::mean_all(nn::mul(d, d));
}

Tensor downsample_mask_max(const Tensor& mask, int out_h, int out_w) {
  const Shape s = mask.shape();
  if (s.h == out_h && s.w == out_w) return mask;
  Tensor out({s.b, s.c, out_h, out_w});
  if (s.h % out_h == 0 && s.w % out_w == 0) {
    const int fy = s.h / out_h, fx = s.w / out_w;
    for (int b = 0; b < s.b; ++b)
      for (int c = 0; c < s.c; ++c) {
        const double* src = mask.data() + mask.idx(b, c, 0, 0);
        for (int y = 0; y < out_h; ++y)
          for (int x = 0; x < out_w; ++x) {
            double m = 0.0;
            for (int dy = 0; dy < fy; ++dy)
              for (int dx = 0; dx < fx; ++dx)
                m = std::max(m, src[(y * fy + dy) * s.w + (x * fx + dx)]);
            out.at(b, c, y, x) = m;
          }
      }
    return out;
  }
  Tensor r = nn::resize_bilinear(mask, out_h, out_w);
  for (std::int64_t i = 0; i < r.numel(); ++i) r[i] = r[i] >= 0.5 ? 1.0 : 0.0;
  return r;
}

Var edge_loss(const std::vector<Var>& edge_logits, const Tensor& y_e,
              bool single_term) {
  if (edge_logits.size() != 4)
    throw ShapeError("edge_loss: expected exactly 4 logit maps, got " +
                     std::to_string(edge_logits.size()));
  Var total;
  for (const Var& logit : edge_logits) {
    const Shape ls = logit->value.shape();
    Tensor target = downsample_mask_max(y_e, ls.h, ls.w);
    Var term = bce_loss(nn::sigmoid(logit), target, single_term);
    total = total ? nn::add(total, term) : term;
  }
  return total;
}

Var dec_loss(const Var& p, const Tensor& y, const Tensor& e,
             bool single_term) {
  if (!p->value.same_shape(e))
    throw ShapeError("dec_loss: weight shape mismatch " +
                     p->value.shape().str() + " vs " + e.shape().str());
  const double esum = e.sum();
  if (esum == 0.0) return make_var(Tensor::zeros({1, 1, 1, 1}));
  Var weighted = nn::mul_tensor(bce_pixelwise(p, y, single_term), e);
  return nn::scale(nn::sum_all(weighted), 1.0 / esum);
}

Var mls_loss(const std::vector<Var>& side_probs, const Tensor& y,
             const Tensor& e, const std::vector<double>& lambdas,
             bool single_term) {
  if (side_probs.size() != lambdas.size())
    throw ShapeError("mls_loss: " + std::to_string(side_probs.size()) +
                     " side outputs vs " + std::to_string(lambdas.size()) +
                     " weights");
  Var total;
  for (std::size_t i = 0; i < side_probs.size(); ++i) {
    Var term = nn::scale(gms_loss(side_probs[i], y, e, single_term),
                         lambdas[i]);
    total = total ? nn::add(total, term) : term;
  }
  return total;
}

Var gms_loss(const Var& p, const Tensor& y, const Tensor& e,
             bool single_term) {
  return nn::add(nn::add(bce_loss(p, y, single_term), iou_loss(p, y)),
                 dec_loss(p, y, e, single_term));
}

}  // namespace uta
