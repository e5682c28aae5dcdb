#include <algorithm>
#include <map>
#include <set>

#include "doctest.h"
#include "testutil.hpp"
#include "uta/losses.hpp"
#include "uta/model.hpp"

using namespace uta;
using namespace uta::test;
using namespace uta::nn;

namespace {

Config tiny_config(int cprime = 4) {
  Config c;
  c.backbone = "tiny";
  c.cprime = cprime;
  c.scales = {32, 48, 64};
  c.gamma = {0.25, 0.25, 1.0};
  return c;
}

std::map<std::string, Var> named_params(UtaNet& net) {
  NamedVars nv;
  net.collect(nv);
  std::map<std::string, Var> m;
  for (auto& [name, v] : nv.params) {
    REQUIRE(!m.count(name));  // no duplicate names
    m.emplace(name, v);
  }
  return m;
}

}  // namespace

TEST_CASE("model: full forward shape contract") {
  Rng rng(7);
  Config cfg = tiny_config();
  UtaNet net(cfg, rng);
  CHECK(net.size_divisor() == 16);
  Var rgb = make_var(make_input({2, 3, 64, 48}, 11));

  auto out = net.forward(rgb, /*train=*/true, /*scale_index=*/1);
  CHECK(out.logits->value.shape() == Shape{2, 1, 64, 48});
  CHECK(out.prob->value.shape() == Shape{2, 1, 64, 48});
  REQUIRE(out.side_probs.size() == 5);
  for (const Var& sp : out.side_probs) {
    CHECK(sp->value.shape() == Shape{2, 1, 64, 48});
    for (std::int64_t i = 0; i < sp->value.numel(); ++i) {
      CHECK(sp->value[i] > 0.0);
      CHECK(sp->value[i] < 1.0);
    }
  }
  // Edge maps live on the stage grids of levels 2..5.
  REQUIRE(out.edge_logits.size() == 4);
  const int eh[4] = {32, 16, 8, 4}, ew[4] = {24, 12, 6, 3};
  for (int k = 0; k < 4; ++k)
    CHECK(out.edge_logits[k]->value.shape() == Shape{2, 1, eh[k], ew[k]});
  REQUIRE(out.p_d);
  CHECK(out.p_d->value.shape() == Shape{2, 1, 64, 48});
  for (std::int64_t i = 0; i < out.p_d->value.numel(); ++i) {
    CHECK(out.p_d->value[i] >= kEpsDepth);
    CHECK(out.p_d->value[i] <= 1.0);
  }
  for (std::int64_t i = 0; i < out.prob->value.numel(); ++i) {
    CHECK(out.prob->value[i] > 0.0);
    CHECK(out.prob->value[i] < 1.0);
  }

  // Training forward needs a valid gate index; the ensemble path does not.
  CHECK_THROWS_AS(net.forward(rgb, true, -1), std::out_of_range);
  CHECK_THROWS_AS(net.forward(rgb, true, 3), std::out_of_range);
  auto inf = net.forward(rgb, false);
  CHECK(inf.logits->value.shape() == Shape{2, 1, 64, 48});
}

TEST_CASE("model: inference determinism") {
  Rng rng(9);
  UtaNet net(tiny_config(), rng);
  Var rgb = make_var(make_input({1, 3, 32, 32}, 21));
  auto a = net.forward(rgb, false);
  auto b = net.forward(rgb, false);
  for (std::int64_t i = 0; i < a.prob->value.numel(); ++i)
    CHECK(a.prob->value[i] == b.prob->value[i]);
}

TEST_CASE("model: parameter naming covers every active block") {
  Rng rng(13);
  Config cfg = tiny_config();
  UtaNet net(cfg, rng);
  auto m = named_params(net);
  for (const char* name :
       {"backbone.stage1.conv.weight", "backbone.stage5.bn.gamma",
        "aspp.local.conv.weight", "aspp.pool.weight", "aspp.project.bn.beta",
        "depth.stem.conv.weight", "depth.merge4.enc_a.conv.weight",
        "depth.merge1.head.bn.gamma", "depth.head.weight", "depth.head.bias",
        "sal.merge4.enc_b.conv.weight", "sal.merge1.attn.weight",
        "sal.spm5.edge3.bias", "sal.spm2.reduce.conv.weight",
        "sal.side1.weight", "sal.side5.bias", "gms.classifier.weight",
        "gms.head0.weight", "gms.head2.bias"}) {
    CAPTURE(name);
    CHECK(m.count(name) == 1);
  }
  CHECK(m.count("gms.head3.weight") == 0);  // 3 scales -> heads 0..2
  CHECK(m.count("sal.proj1.conv.weight") == 0);
  CHECK(m.count("depth.proj1.conv.weight") == 0);
}

TEST_CASE("model: multiplicative fallback replaces fusion when caf is off") {
  Rng rng(17);
  Config cfg = tiny_config();
  cfg.use_caf = false;
  UtaNet net(cfg, rng);
  auto m = named_params(net);
  CHECK(m.count("sal.proj1.conv.weight") == 1);
  CHECK(m.count("sal.proj4.bn.gamma") == 1);
  CHECK(m.count("depth.proj1.conv.weight") == 1);
  CHECK(m.count("sal.merge1.attn.weight") == 0);
  CHECK(m.count("depth.merge4.enc_a.conv.weight") == 0);
  Var rgb = make_var(make_input({1, 3, 32, 32}, 23));
  auto out = net.forward(rgb, true, 0);
  CHECK(out.prob->value.shape() == Shape{1, 1, 32, 32});
  CHECK(out.side_probs.size() == 5);
  CHECK(out.edge_logits.size() == 4);
}

TEST_CASE("model: spm off drops edge maps, keeps depth") {
  Rng rng(19);
  Config cfg = tiny_config();
  cfg.use_spm = false;
  UtaNet net(cfg, rng);
  Var rgb = make_var(make_input({1, 3, 32, 32}, 27));
  auto out = net.forward(rgb, true, 0);
  CHECK(out.edge_logits.empty());
  REQUIRE(out.p_d);
  auto m = named_params(net);
  CHECK(m.count("sal.spm5.edge3.bias") == 0);
  CHECK(m.count("depth.head.weight") == 1);
}

TEST_CASE("model: spm without the depth branch is rejected") {
  Rng rng(29);
  Config cfg = tiny_config();
  cfg.use_dac = false;  // use_spm stays true
  CHECK_THROWS_AS(UtaNet(cfg, rng), ConfigError);
}

TEST_CASE("model: depth branch off") {
  Rng rng(31);
  Config cfg = tiny_config();
  cfg.use_dac = false;
  cfg.use_spm = false;
  UtaNet net(cfg, rng);
  Var rgb = make_var(make_input({1, 3, 32, 32}, 33));
  auto out = net.forward(rgb, true, 0);
  CHECK(!out.p_d);
  CHECK(out.edge_logits.empty());
  CHECK(out.side_probs.size() == 5);
  auto m = named_params(net);
  for (auto& [name, v] : m) CHECK(name.rfind("depth.", 0) != 0);
}

TEST_CASE("model: gms off leaves a single plain classifier") {
  Rng rng(37);
  Config cfg = tiny_config();
  cfg.use_gms = false;
  UtaNet net(cfg, rng);
  auto m = named_params(net);
  CHECK(m.count("gms.classifier.weight") == 1);
  CHECK(m.count("gms.classifier.bias") == 1);
  CHECK(m.count("gms.head0.weight") == 0);
  Var rgb = make_var(make_input({1, 3, 32, 32}, 39));
  // Gate index is irrelevant without the multi-scale predictor.
  auto tr = net.forward(rgb, true, -1);
  auto ev = net.forward(rgb, false);
  CHECK(tr.logits->value.shape() == Shape{1, 1, 32, 32});
  // Without batch-norm in the classifier the only train/eval difference is
  // upstream; both paths produce finite maps.
  CHECK(ev.logits->value.all_finite());
}

TEST_CASE("model: all ablations off = baseline") {
  Rng rng(41);
  Config cfg = tiny_config();
  cfg.use_dac = cfg.use_spm = cfg.use_caf = cfg.use_gms = cfg.use_mls = false;
  UtaNet net(cfg, rng);
  Var rgb = make_var(make_input({1, 3, 32, 32}, 43));
  auto out = net.forward(rgb, true, -1);
  CHECK(out.prob->value.shape() == Shape{1, 1, 32, 32});
  CHECK(out.side_probs.empty());
  CHECK(out.edge_logits.empty());
  CHECK(!out.p_d);
  auto m = named_params(net);
  std::set<std::string> roots;
  for (auto& [name, v] : m) roots.insert(name.substr(0, name.find('.')));
  CHECK(roots == std::set<std::string>{"backbone", "aspp", "sal", "gms"});
  for (auto& [name, v] : m)
    if (name.rfind("sal.", 0) == 0) CHECK(name.rfind("sal.proj", 0) == 0);
}

TEST_CASE("model: side output order follows the head index") {
  Rng rng(47);
  UtaNet net(tiny_config(), rng);
  auto m = named_params(net);
  // Zero every side head, then plant a distinct bias per level; each side
  // output must become the matching constant probability.
  const double biases[5] = {-2.0, -1.0, 0.0, 1.0, 2.0};
  for (int k = 0; k < 5; ++k) {
    const std::string base = "sal.side" + std::to_string(k + 1);
    Tensor& w = m.at(base + ".weight")->value;
    for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = 0.0;
    m.at(base + ".bias")->value[0] = biases[k];
  }
  Var rgb = make_var(make_input({1, 3, 32, 32}, 49));
  auto out = net.forward(rgb, false);
  REQUIRE(out.side_probs.size() == 5);
  for (int k = 0; k < 5; ++k) {
    const double want = 1.0 / (1.0 + std::exp(-biases[k]));
    for (std::int64_t i = 0; i < out.side_probs[k]->value.numel(); ++i)
      CHECK(out.side_probs[k]->value[i] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("model: dual-input variant sums the depth encoder in") {
  Rng rng(53);
  Config cfg = tiny_config();
  UtaNet dual(cfg, rng, /*dual_input=*/true);
  CHECK(dual.dual_input());
  auto md = named_params(dual);
  CHECK(md.count("depth_backbone.stage1.conv.weight") == 1);

  Var rgb = make_var(make_input({1, 3, 32, 32}, 57));
  Var dep = make_var(make_input({1, 1, 32, 32}, 59, 0.4, 0.5));
  auto out = dual.forward(rgb, dep, false);
  CHECK(out.prob->value.shape() == Shape{1, 1, 32, 32});
  CHECK_THROWS_AS(dual.forward(rgb, false), ShapeError);  // depth required

  UtaNet single(cfg, rng);
  CHECK_THROWS_AS(single.forward(rgb, dep, false), ShapeError);

  // Output depends on the depth input.
  Var dep2 = make_var(make_input({1, 1, 32, 32}, 61, 0.4, 0.5));
  auto out2 = dual.forward(rgb, dep2, false);
  double diff = 0.0;
  for (std::int64_t i = 0; i < out.prob->value.numel(); ++i)
    diff = std::max(diff,
                    std::abs(out.prob->value[i] - out2.prob->value[i]));
  CHECK(diff > 0.0);

  // With an all-zero depth map in eval mode the parallel encoder contributes
  // exactly zero (convolutions without bias, normalization with fresh
  // running statistics), so a single-input model sharing the same weights
  // must produce the identical map.
  auto ms = named_params(single);
  for (auto& [name, v] : ms) v->value = md.at(name)->value;
  // Copy buffers too (fresh here, but keep the test honest).
  NamedVars bd, bs;
  dual.collect(bd);
  single.collect(bs);
  std::map<std::string, Tensor*> bufd;
  for (auto& [name, t] : bd.buffers) bufd[name] = t;
  for (auto& [name, t] : bs.buffers) *t = *bufd.at(name);

  Var zero_depth = make_var(Tensor::zeros({1, 1, 32, 32}));
  auto od = dual.forward(rgb, zero_depth, false);
  auto os = single.forward(rgb, false);
  for (std::int64_t i = 0; i < od.prob->value.numel(); ++i)
    CHECK(od.prob->value[i] == os.prob->value[i]);
}

TEST_CASE("grad: full model end to end through the summed loss") {
  Rng rng(1501);
  Config cfg = tiny_config(2);
  cfg.scales = {16, 32};
  cfg.gamma = {0.25, 1.0};
  UtaNet net(cfg, rng);
  Var rgb = make_param(make_input({1, 3, 32, 32}, 1503, 0.8, 0.1));

  Tensor y({1, 1, 32, 32});
  Rng tr(1505);
  for (std::int64_t i = 0; i < y.numel(); ++i)
    y[i] = tr.uniform() < 0.4 ? 1.0 : 0.0;
  Tensor y_e = make_edge_target(y, 3);
  Tensor y_d = make_input({1, 1, 32, 32}, 1507, 0.35, 0.6);

  // The correction weights are data: freeze them from the unperturbed
  // forward so finite differences see the same constants the tape does.
  Tensor e_frozen;
  {
    NoGradGuard ng;
    auto o = net.forward(rgb, true, 1);
    e_frozen = dec_weights(o.p_d->value, y_d);
  }

  auto build = [&] {
    auto o = net.forward(rgb, true, 1);
    Var l = depth_loss(o.p_d, y_d);
    l = nn::add(l, edge_loss(o.edge_logits, y_e));
    l = nn::add(l, mls_loss(o.side_probs, y, e_frozen, cfg.lambda));
    l = nn::add(l, gms_loss(o.prob, y, e_frozen));
    return l;
  };

  // Every block must receive gradient: a dropped connection shows up as a
  // missing or all-zero leaf gradient long before any numeric check.
  auto m = named_params(net);
  std::vector<Var> wrt = {
      m.at("backbone.stage1.bn.gamma"),    m.at("aspp.project.bn.beta"),
      m.at("depth.merge3.head.bn.gamma"),  m.at("depth.head.bias"),
      m.at("sal.merge2.attn.bias"),        m.at("sal.spm4.edge3.bias"),
      m.at("sal.side2.bias"),              m.at("gms.classifier.bias"),
      m.at("gms.head1.bias"),
  };
  for (Var& v : wrt) {
    v->requires_grad = true;
    v->zero_grad();
  }
  backward(build());
  for (Var& v : wrt) {
    REQUIRE(v->has_grad);
    double mx = 0.0;
    for (std::int64_t i = 0; i < v->grad.numel(); ++i)
      mx = std::max(mx, std::abs(v->grad[i]));
    CHECK(mx > 0.0);
  }
  // One small parameter per block keeps the check minutes-cheap. The graph
  // here stacks ~30 ReLU layers, so a 1e-4 probe almost surely pushes some
  // pre-activation across its kink; a finer step stays inside the smooth
  // region (double precision keeps the roundoff floor ~1e-7 relative).
  CHECK(gradcheck(build, wrt, 1e-6) < kFdTol);
}
