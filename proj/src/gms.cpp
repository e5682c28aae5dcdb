#include "uta/gms.hpp"

namespace uta {

Gms::Gms(int cprime, std::vector<int> scales_, std::vector<double> weights_,
         int kernel, bool prob_fusion_, Rng& rng)
    : classifier(cprime, 1, kernel, 1, kernel / 2, 1, /*bias=*/true, rng),
      scales(std::move(scales_)),
      weights(std::move(weights_)),
      prob_fusion(prob_fusion_) {
  if (scales.empty() || weights.size() != scales.size())
    throw ConfigError("gms: need one weight per scale");
  heads.reserve(scales.size());
  for (std::size_t i = 0; i < scales.size(); ++i)
    heads.emplace_back(cprime, 1, kernel, 1, kernel / 2, 1, /*bias=*/true,
                       rng);
}

Var Gms::classifier_out(const Var& feat) const {
  return classifier.forward(feat);
}

Var Gms::head_out(const Var& feat, int k) const {
  if (k < 0 || k >= num_heads())
    throw std::out_of_range("gms: scale index " + std::to_string(k) +
                            " out of range [0," +
                            std::to_string(num_heads()) + ")");
  const Shape s = feat->value.shape();
  const double factor =
      static_cast<double>(scales[k]) / static_cast<double>(scales.back());
  const int th = std::max(1, static_cast<int>(std::lround(s.h * factor)));
  const int tw = std::max(1, static_cast<int>(std::lround(s.w * factor)));
  Var y = nn::resize_bilinear(feat, th, tw);
  y = heads[k].forward(y);
  return nn::resize_bilinear(y, s.h, s.w);
}

Var Gms::forward_train(const Var& feat, int scale_index) const {
  return nn::add(classifier_out(feat), head_out(feat, scale_index));
}

Var Gms::forward_infer(const Var& feat) const {
  Var logits = classifier_out(feat);
  for (int k = 0; k < num_heads(); ++k)
    logits = nn::add(logits, nn::scale(head_out(feat, k), weights[k]));
  return logits;
}

Var Gms::infer_prob(const Var& feat) const {
  if (!prob_fusion) return nn::sigmoid(forward_infer(feat));
  // Probability-space variant: weighted mean of per-head probabilities, the
  // classifier carrying unit weight.
  double total = 1.0;
  Var p = nn::sigmoid(classifier_out(feat));
  for (int k = 0; k < num_heads(); ++k) {
    p = nn::add(p, nn::scale(nn::sigmoid(head_out(feat, k)), weights[k]));
    total += weights[k];
  }
  return nn::scale(p, 1.0 / total);
}

void Gms::collect(const std::string& prefix, NamedVars& out) {
  classifier.collect(prefix + ".classifier", out);
  for (std::size_t k = 0; k < heads.size(); ++k)
    heads[k].collect(prefix + ".head" + std::to_string(k), out);
}

}  // namespace uta
