#ifndef UTA_GMS_HPP
#define UTA_GMS_HPP

#include "uta/layers.hpp"

namespace uta {

/// Gated multi-scale predictor. One plain conv classifier plus one head per
/// configured scale; each head resizes the feature by scale/base, convolves,
/// and resizes back. Training activates exactly one head (picked by the
/// batch's scale index) so the others receive no gradient; inference blends
/// all heads with fixed weights.
class Gms {
 public:
  Gms() = default;
  Gms(int cprime, std::vector<int> scales, std::vector<double> weights,
      int kernel, bool prob_fusion, Rng& rng);

  Var forward_train(const Var& feat, int scale_index) const;
  /// Weighted ensemble in logit space: classifier + sum_k w_k * head_k.
  Var forward_infer(const Var& feat) const;
  /// Final probability map; honours the probability-space fusion switch.
  Var infer_prob(const Var& feat) const;

  Var classifier_out(const Var& feat) const;
  Var head_out(const Var& feat, int k) const;
  void collect(const std::string& prefix, NamedVars& out);
  int num_heads() const { return static_cast<int>(heads.size()); }

  Conv2d classifier;          // kxk C'->1
  std::vector<Conv2d> heads;  // kxk C'->1 each
  std::vector<int> scales;
  std::vector<double> weights;
  bool prob_fusion = false;
};

}  // namespace uta

#endif  // UTA_GMS_HPP
