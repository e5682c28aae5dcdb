#include "uta/model.hpp"

namespace uta {

std::unique_ptr<Backbone> make_backbone(const std::string& name, Rng& rng) {
  if (name == "tiny") return std::make_unique<TinyBackbone>(rng);
  if (name == "resnet50") return std::make_unique<ResNet50>(rng);
  throw ConfigError("unknown backbone: " + name);
}

UtaNet::UtaNet(const Config& cfg_, Rng& rng, bool dual_input) : cfg(cfg_) {
  validate(cfg);
  encoder = make_backbone(cfg.backbone, rng);
  if (dual_input) depth_encoder = make_backbone(cfg.backbone, rng);
  const std::vector<int>& ch = encoder->stage_channels();
  const int cp = cfg.cprime;
  aspp = Aspp(ch[4], cp, rng);
  if (cfg.use_dac) depth_dec = DepthDecoder(ch, cp, rng, cfg.use_caf);
  if (cfg.use_caf) {
    merge4 = Caf(cp, ch[3], cp, rng);
    merge3 = Caf(cp, ch[2], cp, rng);
    merge2 = Caf(cp, ch[1], cp, rng);
    merge1 = Caf(cp, ch[0], cp, rng);
  } else {
    for (int k = 0; k < 4; ++k) projs.emplace_back(ch[k], cp, 1, rng);
  }
  if (cfg.use_spm) {
    spm5 = Spm(cp, rng);
    spm4 = Spm(cp, rng);
    spm3 = Spm(cp, rng);
    spm2 = Spm(cp, rng);
  }
  if (cfg.use_mls) {
    for (int k = 0; k < 5; ++k)
      sides.emplace_back(cp, 1, 1, 1, 0, 1, /*bias=*/true, rng);
  }
  if (cfg.use_gms) {
    gms = Gms(cp, cfg.scales, cfg.gamma, cfg.gms_kernel, cfg.gms_prob_fusion,
              rng);
  } else {
    classifier = Conv2d(cp, 1, cfg.gms_kernel, 1, cfg.gms_kernel / 2, 1,
                        /*bias=*/true, rng);
  }
}

// Top-down saliency decoder. Returns the per-level features s1..s5
// (index 0 = level 1); when cross-modal fusion is on, also fills the four
// edge logit maps (levels 2..5).
std::vector<Var> UtaNet::saliency_stack(const std::vector<Var>& stages,
                                        const Var& top,
                                        const std::vector<Var>& depth_feats,
                                        bool train,
                                        std::vector<Var>* edge_logits) const {
  auto merge = [&](const Var& running, int k) {  // k = stage index 0..3
    if (cfg.use_caf) {
      const Caf* cafs[4] = {&merge1, &merge2, &merge3, &merge4};
      return cafs[k]->forward(running, stages[k], train);
    }
    return multiply_merge(running, stages[k], projs[k], train);
  };
  // depth_feats holds levels [2,3,4,5]; depth_feats[k-2] is level k.
  auto fuse = [&](const Spm& spm, const Var& t, int level,
                  std::vector<Var>& edges) {
    Spm::Out o = spm.forward(t, depth_feats[level - 2], train);
    edges.push_back(o.edge_logits);
    return o.fused;
  };

  std::vector<Var> s(5);
  std::vector<Var> edges;  // collected deepest-first: levels 5,4,3,2
  Var t5 = top;
  s[4] = cfg.use_spm ? fuse(spm5, t5, 5, edges) : t5;
  Var t4 = merge(s[4], 3);
  s[3] = cfg.use_spm ? fuse(spm4, t4, 4, edges) : t4;
  Var t3 = merge(s[3], 2);
  s[2] = cfg.use_spm ? fuse(spm3, t3, 3, edges) : t3;
  Var t2 = merge(s[2], 1);
  s[1] = cfg.use_spm ? fuse(spm2, t2, 2, edges) : t2;
  s[0] = merge(s[1], 0);
  if (edge_logits) {
    edge_logits->assign(edges.rbegin(), edges.rend());  // levels 2..5
  }
  return s;
}

UtaNet::Forward UtaNet::forward(const Var& rgb, bool train,
                                int scale_index) const {
  return forward(rgb, Var(), train, scale_index);
}

UtaNet::Forward UtaNet::forward(const Var& rgb, const Var& depth, bool train,
                                int scale_index) const {
  const Shape in = rgb->value.shape();
  std::vector<Var> stages = encoder->extract_stages(rgb, train);
  if (depth_encoder) {
    if (!depth)
      throw ShapeError("dual-input model needs a depth map");
    // The depth encoder shares the RGB stem layout; replicate the single
    // channel.
    Var d3 = nn::concat_channels({depth, depth, depth});
    std::vector<Var> dstages = depth_encoder->extract_stages(d3, train);
    for (int k = 0; k < 5; ++k) stages[k] = nn::add(stages[k], dstages[k]);
  } else if (depth) {
    throw ShapeError("single-input model got a depth map");
  }
  Var top = aspp.forward(stages[4], train);

  Forward out;
  std::vector<Var> depth_feats;
  if (cfg.use_dac) {
    DepthDecoder::Out dd = depth_dec.forward(stages, top, in.h, in.w, train);
    out.p_d = dd.p_d;
    depth_feats = dd.feats;
  }

  std::vector<Var> s = saliency_stack(stages, top, depth_feats, train,
                                      cfg.use_spm ? &out.edge_logits : nullptr);

  if (cfg.use_mls) {
    out.side_probs.reserve(5);
    for (int k = 0; k < 5; ++k) {
      Var l = sides[k].forward(s[k]);
      out.side_probs.push_back(nn::sigmoid(nn::resize_bilinear(l, in.h, in.w)));
    }
  }

  const Var& feat = s[0];
  if (cfg.use_gms) {
    if (train) {
      out.logits = nn::resize_bilinear(gms.forward_train(feat, scale_index),
                                       in.h, in.w);
      out.prob = nn::sigmoid(out.logits);
    } else {
      out.logits = nn::resize_bilinear(gms.forward_infer(feat), in.h, in.w);
      out.prob = gms.prob_fusion
                     ? nn::resize_bilinear(gms.infer_prob(feat), in.h, in.w)
                     : nn::sigmoid(out.logits);
    }
  } else {
    out.logits = nn::resize_bilinear(classifier.forward(feat), in.h, in.w);
    out.prob = nn::sigmoid(out.logits);
  }
  return out;
}

void UtaNet::collect(NamedVars& out) {
  encoder->collect("backbone", out);
  if (depth_encoder) depth_encoder->collect("depth_backbone", out);
  aspp.collect("aspp", out);
  if (cfg.use_dac) depth_dec.collect("depth", out);
  if (cfg.use_caf) {
    merge4.collect("sal.merge4", out);
    merge3.collect("sal.merge3", out);
    merge2.collect("sal.merge2", out);
    merge1.collect("sal.merge1", out);
  } else {
    for (int k = 0; k < 4; ++k)
      projs[k].collect("sal.proj" + std::to_string(k + 1), out);
  }
  if (cfg.use_spm) {
    spm5.collect("sal.spm5", out);
    spm4.collect("sal.spm4", out);
    spm3.collect("sal.spm3", out);
    spm2.collect("sal.spm2", out);
  }
  if (cfg.use_mls) {
    for (int k = 0; k < 5; ++k)
      sides[k].collect("sal.side" + std::to_string(k + 1), out);
  }
  if (cfg.use_gms) {
    gms.collect("gms", out);
  } else {
    classifier.collect("gms.classifier", out);
  }
}

}  // namespace uta
