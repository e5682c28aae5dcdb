#ifndef UTA_SPM_HPP
#define UTA_SPM_HPP

#include "uta/layers.hpp"

namespace uta {

/// Spatial perceptive fusion of an RGB-branch feature with a depth-branch
/// feature: depth spatial attention with a residual path, then an edge head
/// whose sigmoid re-weights the reduced stack (again residually). The edge
/// logits are supervised externally.
class Spm {
 public:
  Spm() = default;
  Spm(int cprime, Rng& rng);

  struct Out {
    Var fused;        // (B,C',H,W)
    Var edge_logits;  // (B,1,H,W)
  };

  /// Inputs must share shape (B,C',H,W); the caller resizes beforehand.
  Out forward(const Var& f_rgb, const Var& f_depth, bool train) const;
  void collect(const std::string& prefix, NamedVars& out);

  ConvBlock edge1;    // 1x1, 2C'->C'
  ConvBlock edge2;    // 3x3, C'->C'
  Conv2d edge3;       // 1x1, C'->1 logit (no norm/activation)
  ConvBlock reduce;   // 3x3, 2C'->C'
};

/// Binary boundary band for edge supervision: mark foreground pixels with a
/// 4-neighbor background transition (frame border counts as background), then
/// dilate with a square structuring element (default 5x5 -> ~5 px band).
Tensor make_edge_target(const Tensor& mask, int dilate = 5);

}  // namespace uta

#endif  // UTA_SPM_HPP
