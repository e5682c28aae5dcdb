#ifndef UTA_LOSSES_HPP
#define UTA_LOSSES_HPP

#include "uta/nn.hpp"

namespace uta {

/// Scalar components of one training step, in the order they are summed.
/// l_bce / l_iou / l_dec are the constituents of l_gms (the loss on the final
/// fused prediction); l_sum = l_depth + l_edge + l_mls + l_gms exactly.
struct LossBundle {
  double l_bce = 0, l_iou = 0, l_depth = 0, l_edge = 0, l_dec = 0, l_mls = 0,
         l_gms = 0, l_sum = 0;
};

/// Binary cross entropy, mean over all pixels and images. `p` must already be
/// clamped inside (0,1). The single-term variant keeps only -y*log(p) (for
/// ablating the full form) and is degenerate on purpose.
Var bce_loss(const Var& p, const Tensor& y, bool single_term = false);

/// 1 - (|y*p| + 1) / (|y + p - y*p| + 1), per image, then batch mean.
Var iou_loss(const Var& p, const Tensor& y);

/// Mean squared log-depth error; both maps must be strictly positive.
Var depth_loss(const Var& p_d, const Tensor& y_d);

/// Sum of BCE over exactly four edge-logit maps; the binary target is
/// block-max downsampled to each map's resolution.
Var edge_loss(const std::vector<Var>& edge_logits, const Tensor& y_e,
              bool single_term = false);

/// Error-weighted BCE: sum(e * bce_pixelwise) / sum(e); 0 when e vanishes.
/// `e` is a constant weight map (no gradient flows through it).
Var dec_loss(const Var& p, const Tensor& y, const Tensor& e,
             bool single_term = false);

/// Multi-level supervision: sum_i lambda_i * (bce + iou + dec) over the side
/// outputs, which must already be at mask resolution.
Var mls_loss(const std::vector<Var>& side_probs, const Tensor& y,
             const Tensor& e, const std::vector<double>& lambdas,
             bool single_term = false);

/// bce + iou + dec on the final fused prediction.
Var gms_loss(const Var& p, const Tensor& y, const Tensor& e,
             bool single_term = false);

/// Block-max downsample of a binary map to (out_h, out_w). Falls back to
/// bilinear + 0.5 threshold when the sizes do not divide evenly.
Tensor downsample_mask_max(const Tensor& mask, int out_h, int out_w);

}  // namespace uta

#endif  // UTA_LOSSES_HPP
