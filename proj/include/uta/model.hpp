#ifndef UTA_MODEL_HPP
#define UTA_MODEL_HPP

#include <memory>
#include <string>
#include <vector>

#include "uta/backbone.hpp"
#include "uta/core.hpp"
#include "uta/depthbranch.hpp"
#include "uta/gms.hpp"
#include "uta/spm.hpp"

namespace uta {

/// The full network. An RGB encoder feeds a context head; a top-down depth
/// decoder (training-time supervision only) and a top-down saliency decoder
/// share the encoder stages. At levels 5..2 the saliency path cross-modally
/// fuses with the matching depth feature and emits an edge logit map; five
/// side heads give multi-level supervision and the gated multi-scale
/// predictor produces the main output from the level-1 feature.
///
/// Every block can be switched off via the Config ablation flags; with all of
/// them off the model reduces to encoder + multiplicative cross-level fusion
/// + a single plain classifier.
///
/// `dual_input = true` builds the auxiliary variant for the depth-consistency
/// experiment: a parallel depth encoder whose stage features are summed into
/// the RGB encoder's before decoding.
class UtaNet {
 public:
  UtaNet(const Config& cfg, Rng& rng, bool dual_input = false);

  struct Forward {
    Var logits;  // (B,1,H,W) main logits at input resolution
    Var prob;    // (B,1,H,W) main probability map at input resolution
    std::vector<Var> side_probs;   // levels 1..5 at input res; empty w/o MLS
    std::vector<Var> edge_logits;  // levels 2..5 at stage res; empty w/o SPM
    Var p_d;                       // (B,1,H,W) depth; null w/o depth branch
  };

  /// scale_index gates the multi-scale predictor during training; pass -1
  /// (with train=false) for the inference-time ensemble.
  Forward forward(const Var& rgb, bool train, int scale_index = -1) const;
  /// Dual-input forward; `depth` is (B,1,H,W) in the normalized depth range.
  Forward forward(const Var& rgb, const Var& depth, bool train,
                  int scale_index = -1) const;

  void collect(NamedVars& out);
  int size_divisor() const { return encoder->size_divisor(); }
  bool dual_input() const { return depth_encoder != nullptr; }

  Config cfg;

  std::unique_ptr<Backbone> encoder;
  std::unique_ptr<Backbone> depth_encoder;  // dual-input variant only
  Aspp aspp;
  DepthDecoder depth_dec;              // when use_dac
  Caf merge4, merge3, merge2, merge1;  // saliency cross-level fusion
  std::vector<ConvBlock> projs;        // multiply-fallback projections
  Spm spm5, spm4, spm3, spm2;          // cross-modal fusion, levels 5..2
  std::vector<Conv2d> sides;           // 1x1 C'->1 side heads, levels 1..5
  Gms gms;                             // when use_gms
  Conv2d classifier;                   // plain head when gms is off

 private:
  std::vector<Var> saliency_stack(const std::vector<Var>& stages,
                                  const Var& top,
                                  const std::vector<Var>& depth_feats,
                                  bool train,
                                  std::vector<Var>* edge_logits) const;
};

std::unique_ptr<Backbone> make_backbone(const std::string& name, Rng& rng);

}  // namespace uta

#endif  // UTA_MODEL_HPP
