#include "uta/caf.hpp"

namespace uta {

Caf::Caf(int c_alpha, int c_beta, int cprime, Rng& rng)
    : enc_a(c_alpha, cprime, 3, rng),
      enc_b(c_beta, cprime, 3, rng),
      attn(3 * cprime, 3 * cprime, 1, 1, 0, 1, /*bias=*/true, rng),
      dec_u1(3 * cprime, cprime, 3, rng),
      dec_u2(3 * cprime, cprime, 3, rng),
      enc_v1(cprime, cprime, 3, rng),
      enc_v2(cprime, cprime, 3, rng),
      head(2 * cprime, cprime, 3, rng) {}

Caf::Parts Caf::forward_parts(const Var& fa_in, const Var& fb_in,
                              bool train) const {
  const Shape& sa = fa_in->value.shape();
  const Shape& sb = fb_in->value.shape();
  const int h = std::max(sa.h, sb.h);
  const int w = std::max(sa.w, sb.w);
  Var fa = nn::resize_bilinear(fa_in, h, w);
  Var fb = nn::resize_bilinear(fb_in, h, w);

  Var ea = identity_encoders ? fa : enc_a.forward(fa, train);
  Var eb = identity_encoders ? fb : enc_b.forward(fb, train);

  Parts p;
  p.f_ca = nn::concat_channels({ea, eb, nn::mul(ea, eb)});
  p.a = nn::global_avg_pool(p.f_ca);
  Var gate = nn::sigmoid(attn.forward(p.a));
  p.u = nn::mul_channel_gate(p.f_ca, gate);

  Var v1 = enc_v1.forward(nn::add(ea, dec_u1.forward(p.u, train)), train);
  Var v2 = enc_v2.forward(nn::add(eb, dec_u2.forward(p.u, train)), train);
  p.out = head.forward(nn::concat_channels({v1, v2}), train);
  return p;
}

Var Caf::forward(const Var& f_alpha, const Var& f_beta, bool train) const {
  return forward_parts(f_alpha, f_beta, train).out;
}

void Caf::collect(const std::string& prefix, NamedVars& out) {
  enc_a.collect(prefix + ".enc_a", out);
  enc_b.collect(prefix + ".enc_b", out);
  attn.collect(prefix + ".attn", out);
  dec_u1.collect(prefix + ".dec_u1", out);
  dec_u2.collect(prefix + ".dec_u2", out);
  enc_v1.collect(prefix + ".enc_v1", out);
  enc_v2.collect(prefix + ".enc_v2", out);
  head.collect(prefix + ".head", out);
}

}  // namespace uta
