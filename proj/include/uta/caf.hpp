#ifndef UTA_CAF_HPP
#define UTA_CAF_HPP

#include "uta/layers.hpp"

namespace uta {

/// Channel-aware fusion of two feature maps carrying the same semantics.
/// Both inputs are encoded to C' channels, their elementwise product is
/// appended as a consensus term, and a global channel gate re-weights the
/// stack before two residual decoders and an output head merge everything
/// back to C'.
class Caf {
 public:
  Caf() = default;
  Caf(int c_alpha, int c_beta, int cprime, Rng& rng);

  struct Parts {
    Var f_ca;  // concat(enc_a, enc_b, enc_a*enc_b), 3C'
    Var a;     // global average of f_ca, (B,3C',1,1)
    Var u;     // channel-gated f_ca
    Var out;   // fused map, C'
  };

  /// Inputs of different spatial size are bilinearly upsampled to the larger
  /// grid first.
  Var forward(const Var& f_alpha, const Var& f_beta, bool train) const;
  Parts forward_parts(const Var& f_alpha, const Var& f_beta, bool train) const;
  void collect(const std::string& prefix, NamedVars& out);

  // Test hook: bypass the input encoders so the fusion arithmetic can be
  // checked against hand-computed values. Inputs must then already have C'
  // channels.
  bool identity_encoders = false;

  ConvBlock enc_a, enc_b;    // 3x3, ->C' each
  Conv2d attn;               // 1x1 linear map on pooled stats, 3C'->3C'
  ConvBlock dec_u1, dec_u2;  // 3C'->C'
  ConvBlock enc_v1, enc_v2;  // C'->C'
  ConvBlock head;            // 2C'->C'
};

}  // namespace uta

#endif  // UTA_CAF_HPP
