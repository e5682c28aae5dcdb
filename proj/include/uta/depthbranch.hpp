#ifndef UTA_DEPTHBRANCH_HPP
#define UTA_DEPTHBRANCH_HPP

#include "uta/caf.hpp"

namespace uta {

/// Top-down depth decoder. Starting from the context head's output (level 5),
/// each step fuses the running feature with the next shallower encoder stage;
/// the level-1 feature is projected to one channel and squashed into the
/// log-safe depth range. The level 2..5 features feed the cross-modal fusion
/// of the saliency decoder.
class DepthDecoder {
 public:
  DepthDecoder() = default;
  /// stage_channels: encoder channels of f1..f5 (5 entries). With
  /// `use_caf` off, each merge degrades to projection + multiplication
  /// (the ablation baseline fusion).
  DepthDecoder(const std::vector<int>& stage_channels, int cprime, Rng& rng,
               bool use_caf = true);

  struct Out {
    Var p_d;                 // (B,1,in_h,in_w), values in (eps_d, 1)
    std::vector<Var> feats;  // levels [2,3,4,5]: feats[0]=level 2 ... feats[3]=level 5
  };

  /// stages = encoder features f1..f5; top = context feature over f5 (C').
  Out forward(const std::vector<Var>& stages, const Var& top, int in_h,
              int in_w, bool train) const;
  void collect(const std::string& prefix, NamedVars& out);

  ConvBlock stem;                      // level-5 transition off the context head
  Caf merge4, merge3, merge2, merge1;  // level k: fuse(level k+1 feature, f_k)
  std::vector<ConvBlock> projs;        // multiply-fallback stage projections
  Conv2d head;                         // 1x1 C'->1
  bool use_caf = true;
};

/// Baseline cross-level fusion: upsample the running feature to the stage
/// grid, project the stage to C', multiply.
Var multiply_merge(const Var& running, const Var& stage, const ConvBlock& proj,
                   bool train);

/// Per-pixel depth ambiguity weights: |log p_d - log y_d| (optionally averaged
/// over a zero-padded window), normalized by the per-image maximum. The result
/// is data, not part of any gradient graph. All-correct depth gives all zeros.
Tensor dec_weights(const Tensor& p_d, const Tensor& y_d, int window = 1);

}  // namespace uta

#endif  // UTA_DEPTHBRANCH_HPP
