#include <unistd.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "testutil.hpp"
#include "uta/image_io.hpp"
#include "uta/trainer.hpp"

using namespace uta;
using uta::test::make_input;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("uta_trn_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int n = 0;
    return n;
  }
  std::string s(const std::string& sub = "") const {
    return sub.empty() ? path.string() : (path / sub).string();
  }
};

// Smallest config that exercises the full pipeline in milliseconds.
Config smoke_config(const std::string& root, const std::string& out) {
  Config c;
  c.backbone = "tiny";
  c.cprime = 8;
  c.scales = {32};
  c.gamma = {1.0};
  c.batch_size = 2;
  c.epochs = 1;
  c.seed = 7;
  c.data_root = root;
  c.out_dir = out;
  return c;
}

std::string make_synth(const TempDir& t, const char* sub, int n,
                       std::uint64_t seed = 11) {
  const std::string root = t.s(sub);
  REQUIRE(make_synthetic_dataset(root, n, 32, seed) == n);
  return root;
}

int count_lines(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  int n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

std::vector<char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

bool bits_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data(), b.data(), a.numel() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("lr schedule: warm-up and decay anchors") {
  const double max_lr = 0.05;
  // 5% of 1000 steps = 50-step warm-up
  CHECK(lr_schedule(0, 1000, max_lr) == 0.0);
  CHECK(lr_schedule(50, 1000, max_lr) == doctest::Approx(max_lr).epsilon(1e-12));
  CHECK(lr_schedule(25, 1000, max_lr) ==
        doctest::Approx(max_lr / 2).epsilon(1e-12));
  CHECK(lr_schedule(1000, 1000, max_lr) == 0.0);
  // halfway down the decay leg: (1000-525)/(1000-50) = 0.5
  CHECK(lr_schedule(525, 1000, max_lr) ==
        doctest::Approx(max_lr * 0.5).epsilon(1e-12));

  // rises before the peak, falls after it, never negative
  double prev = -1.0;
  for (int s = 0; s <= 50; ++s) {
    const double lr = lr_schedule(s, 1000, max_lr);
    CHECK(lr > prev);
    prev = lr;
  }
  for (int s = 51; s <= 1000; ++s) {
    const double lr = lr_schedule(s, 1000, max_lr);
    CHECK(lr < prev);
    CHECK(lr >= 0.0);
    prev = lr;
  }

  // no warm-up means the decay starts at full rate
  CHECK(lr_schedule(0, 100, max_lr, 0.0) == doctest::Approx(max_lr));
  // fractional warm-up boundary still peaks at max on both legs' meeting
  CHECK(lr_schedule(1, 30, max_lr) <= max_lr);

  CHECK_THROWS_AS((void)lr_schedule(1001, 1000, max_lr), std::out_of_range);
  CHECK_THROWS_AS((void)lr_schedule(-1, 1000, max_lr), std::out_of_range);
  CHECK_THROWS_AS((void)lr_schedule(0, 0, max_lr), std::out_of_range);
}

TEST_CASE("sgd: hand-computed momentum update and lr groups") {
  NamedVars vars;
  Var wb = make_param(Tensor({1, 1, 1, 2}));
  wb->value.data()[0] = 1.0;
  wb->value.data()[1] = -2.0;
  Var wh = make_param(Tensor({1, 1, 1, 1}));
  wh->value.data()[0] = 0.5;
  vars.add("backbone.stage1.conv.weight", wb);
  vars.add("sal.side1.bias", wh);

  Sgd opt(vars, 0.9, 0.01);
  auto put_grad = [](const Var& v, std::vector<double> g) {
    v->ensure_grad();
    std::copy(g.begin(), g.end(), v->grad.data());
  };
  put_grad(wb, {0.2, -0.1});
  put_grad(wh, {1.0});
  opt.step(0.1, 0.5);

  // v = 0.9*0 + (g + 0.01*p); p -= lr*v, backbone lr 0.1, head lr 0.5
  const double vb0 = 0.2 + 0.01 * 1.0, vb1 = -0.1 + 0.01 * -2.0;
  const double vh0 = 1.0 + 0.01 * 0.5;
  CHECK(wb->value.data()[0] == doctest::Approx(1.0 - 0.1 * vb0).epsilon(1e-15));
  CHECK(wb->value.data()[1] ==
        doctest::Approx(-2.0 - 0.1 * vb1).epsilon(1e-15));
  CHECK(wh->value.data()[0] == doctest::Approx(0.5 - 0.5 * vh0).epsilon(1e-15));

  // second step folds the previous velocity in
  const double pb0 = wb->value.data()[0];
  opt.zero_grad();
  put_grad(wb, {0.3, 0.0});
  put_grad(wh, {0.0});
  opt.step(0.1, 0.5);
  const double vb0b = 0.9 * vb0 + (0.3 + 0.01 * pb0);
  CHECK(wb->value.data()[0] ==
        doctest::Approx(pb0 - 0.1 * vb0b).epsilon(1e-12));

  // a parameter with no gradient is not touched at all, decay included
  opt.zero_grad();
  const double before = wh->value.data()[0];
  const Tensor vel_before = opt.slots()[1].vel;
  put_grad(wb, {0.1, 0.1});
  opt.step(0.1, 0.5);
  CHECK(wh->value.data()[0] == before);
  CHECK(bits_equal(opt.slots()[1].vel, vel_before));
}

TEST_CASE("checkpoint snapshot/restore: exact state transplant") {
  Config cfg = smoke_config("unused", "unused");
  Rng rng_a(5);
  UtaNet a(cfg, rng_a);
  NamedVars va;
  a.collect(va);
  Sgd opt_a(va, cfg.momentum, cfg.weight_decay);

  // move the optimizer state away from zero with one real step
  const Tensor x = make_input({2, 3, 32, 32}, 901, 0.8, 0.1);
  {
    auto out = a.forward(make_var(x), true, 0);
    backward(bce_loss(out.prob, Tensor(out.prob->value.shape(), 1.0)));
    opt_a.step(0.01, 0.02);
    opt_a.zero_grad();
  }
  Checkpoint ck = snapshot(a, &opt_a, 3, 17);
  CHECK(ck.epoch == 3);
  CHECK(ck.step == 17);

  Rng rng_b(9);  // different init everywhere
  UtaNet b(cfg, rng_b);
  NamedVars vb;
  b.collect(vb);
  Sgd opt_b(vb, cfg.momentum, cfg.weight_decay);
  restore(b, &opt_b, ck);

  NoGradGuard ng;
  const Tensor pa = a.forward(make_var(x), false, -1).prob->value;
  const Tensor pb = b.forward(make_var(x), false, -1).prob->value;
  CHECK(bits_equal(pa, pb));
  for (std::size_t i = 0; i < opt_a.slots().size(); ++i)
    CHECK(bits_equal(opt_a.slots()[i].vel, opt_b.slots()[i].vel));

  SUBCASE("missing parameter") {
    Checkpoint bad = ck;
    for (auto it = bad.entries.begin(); it != bad.entries.end(); ++it)
      if (it->kind == Checkpoint::kParam) {
        bad.entries.erase(it);
        break;
      }
    CHECK_THROWS_WITH_AS(restore(b, nullptr, bad),
                         doctest::Contains("missing parameter"), IoError);
  }
  SUBCASE("unknown parameter") {
    Checkpoint bad = ck;
    bad.entries.push_back(
        {"zzz.weight", Checkpoint::kParam, Tensor({1, 1, 1, 1}, 0.0)});
    CHECK_THROWS_WITH_AS(restore(b, nullptr, bad),
                         doctest::Contains("unknown parameter"), IoError);
  }
  SUBCASE("shape mismatch") {
    Checkpoint bad = ck;
    for (auto& e : bad.entries)
      if (e.kind == Checkpoint::kParam) {
        e.data = Tensor({1, 1, 2, 2}, 0.0);
        break;
      }
    CHECK_THROWS_WITH_AS(restore(b, nullptr, bad),
                         doctest::Contains("shape"), IoError);
  }
  SUBCASE("momentum for unknown parameter") {
    Checkpoint bad = ck;
    bad.entries.push_back(
        {"zzz.weight", Checkpoint::kMomentum, Tensor({1, 1, 1, 1}, 0.0)});
    restore(b, nullptr, bad);  // ignored without an optimizer
    CHECK_THROWS_WITH_AS(restore(b, &opt_b, bad),
                         doctest::Contains("momentum for unknown"), IoError);
  }
  SUBCASE("momentum entries are optional") {
    Checkpoint lean = ck;
    std::erase_if(lean.entries, [](const Checkpoint::Entry& e) {
      return e.kind == Checkpoint::kMomentum;
    });
    restore(b, &opt_b, lean);
    for (const auto& s : opt_b.slots())
      for (std::int64_t i = 0; i < s.vel.numel(); ++i)
        CHECK(s.vel.data()[i] == 0.0);
  }
}

TEST_CASE("optimizer step keeps non-selected scale heads bitwise frozen") {
  TempDir tmp;
  const std::string root = make_synth(tmp, "data", 2);
  Config cfg = smoke_config(root, tmp.s("out"));
  cfg.scales = {32, 48};
  cfg.gamma = {0.5, 1.0};

  Rng rng(3);
  UtaNet net(cfg, rng);
  NamedVars vars;
  net.collect(vars);
  Sgd opt(vars, cfg.momentum, cfg.weight_decay);

  auto samples = load_training_set(cfg, true);
  std::vector<const Sample*> ptrs{&samples[0], &samples[1]};
  const Batch batch = multiscale_batch(ptrs, 32, cfg);  // scale index 0

  std::vector<std::pair<std::string, Tensor>> head1_before, head0_before;
  for (const auto& [name, p] : vars.params) {
    if (name.rfind("gms.head1.", 0) == 0) head1_before.emplace_back(name, p->value);
    if (name.rfind("gms.head0.", 0) == 0) head0_before.emplace_back(name, p->value);
  }
  REQUIRE(!head1_before.empty());
  REQUIRE(!head0_before.empty());

  auto out = net.forward(make_var(batch.rgb), true, 0);
  Var loss = nn::add(bce_loss(out.prob, batch.mask), iou_loss(out.prob, batch.mask));
  backward(loss);
  opt.step(0.005, 0.05);

  int changed = 0;
  for (const auto& [name, p] : vars.params) {
    if (name.rfind("gms.head1.", 0) == 0) {
      for (auto& [n2, t] : head1_before)
        if (n2 == name) CHECK(bits_equal(p->value, t));
    } else if (name.rfind("gms.head0.", 0) == 0) {
      for (auto& [n2, t] : head0_before)
        if (n2 == name && !bits_equal(p->value, t)) ++changed;
    }
  }
  CHECK(changed > 0);  // the gated head did move
}

TEST_CASE("train: logs, checkpoints and loss bookkeeping") {
  TempDir tmp;
  const std::string root = make_synth(tmp, "data", 4);
  Config cfg = smoke_config(root, tmp.s("out"));
  cfg.epochs = 2;
  cfg.dump_error_maps = true;

  const TrainResult res = train(cfg);
  CHECK(res.epoch_loss.size() == 2);
  CHECK(res.epoch_dec.size() == 2);
  CHECK(std::isfinite(res.last.l_sum));
  CHECK(res.last.l_sum ==
        doctest::Approx(res.last.l_depth + res.last.l_edge + res.last.l_mls +
                        res.last.l_gms)
            .epsilon(1e-12));
  CHECK(res.last.l_gms ==
        doctest::Approx(res.last.l_bce + res.last.l_iou + res.last.l_dec)
            .epsilon(1e-12));

  // 4 samples, batch 2 -> 2 rows per epoch (+1 header)
  CHECK(count_lines(tmp.s("out/train_log.csv")) == 1 + 2 * 2);
  CHECK(count_lines(tmp.s("out/dec_weights.csv")) == 1 + 2);
  CHECK(fs::exists(tmp.s("out/config.txt")));
  CHECK(fs::exists(tmp.s("out/ckpt_last.ckpt")));
  CHECK(fs::exists(tmp.s("out/error_maps")));
  CHECK(!fs::exists(tmp.s("out/ckpt_epoch_1.ckpt")));  // not kept by default

  const Checkpoint ck = load_checkpoint(tmp.s("out/ckpt_last.ckpt"));
  CHECK(ck.epoch == 2);
  CHECK(ck.step == 4);  // 2 optimizer steps per epoch
  CHECK(config_from_string(ck.config).cprime == cfg.cprime);

  // the checkpointed model reproduces training-state predictions
  auto net = load_model(tmp.s("out/ckpt_last.ckpt"));
  CHECK(net->cfg.backbone == "tiny");
  CHECK(!net->dual_input());
}

TEST_CASE("train: gradient accumulation changes the step count, not the epoch") {
  TempDir tmp;
  const std::string root = make_synth(tmp, "data", 4);
  Config cfg = smoke_config(root, tmp.s("out"));
  cfg.batch_size = 1;
  cfg.grad_accum = 2;  // 4 micro-batches -> 2 optimizer steps

  const TrainResult res = train(cfg);
  CHECK(std::isfinite(res.last.l_sum));
  const Checkpoint ck = load_checkpoint(res.checkpoint);
  CHECK(ck.epoch == 1);
  CHECK(ck.step == 2);
}

TEST_CASE("train: resume matches the uninterrupted run") {
  TempDir tmp;
  const std::string root = make_synth(tmp, "data", 4);

  Config full = smoke_config(root, tmp.s("full"));
  full.epochs = 3;
  full.keep_checkpoints = true;
  const TrainResult ref = train(full);
  REQUIRE(ref.epoch_loss.size() == 3);

  Config cont = full;
  cont.out_dir = tmp.s("cont");
  const TrainResult got = train(cont, tmp.s("full/ckpt_epoch_2.ckpt"));
  REQUIRE(got.epoch_loss.size() == 1);  // only the third epoch ran
  CHECK(std::abs(got.epoch_loss[0] - ref.epoch_loss[2]) <= 1e-6);

  // deterministic arithmetic: the final parameters agree bit for bit
  const Checkpoint a = load_checkpoint(tmp.s("full/ckpt_last.ckpt"));
  const Checkpoint b = load_checkpoint(tmp.s("cont/ckpt_last.ckpt"));
  CHECK(a.step == b.step);
  const auto pa = a.by_kind(Checkpoint::kParam);
  const auto pb = b.by_kind(Checkpoint::kParam);
  REQUIRE(pa.size() == pb.size());
  for (const auto& [name, t] : pa) {
    auto it = pb.find(name);
    REQUIRE(it != pb.end());
    CHECK(bits_equal(t, it->second));
  }

  // a checkpoint that already covers every epoch is a no-op
  const TrainResult done = train(cont, tmp.s("full/ckpt_last.ckpt"));
  CHECK(done.epoch_loss.empty());
}

TEST_CASE("train: non-finite loss aborts naming the batch") {
  TempDir tmp;
  const std::string root = make_synth(tmp, "data", 2);
  Config cfg = smoke_config(root, tmp.s("out"));
  const TrainResult res = train(cfg);

  Checkpoint ck = load_checkpoint(res.checkpoint);
  bool poisoned = false;
  for (auto& e : ck.entries)
    if (e.kind == Checkpoint::kParam && e.name == "gms.classifier.bias") {
      e.data.data()[0] = std::nan("");
      poisoned = true;
    }
  REQUIRE(poisoned);
  const std::string bad = tmp.s("poisoned.ckpt");
  save_checkpoint(bad, ck);

  Config cont = cfg;
  cont.epochs = 2;
  cont.out_dir = tmp.s("out2");
  try {
    train(cont, bad);
    FAIL("expected the non-finite loss to abort training");
  } catch (const TrainError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("non-finite loss") != std::string::npos);
    CHECK(msg.find("batch ids:") != std::string::npos);
    CHECK(msg.find("synth") != std::string::npos);
  }
}

TEST_CASE("train: baseline run with every block off writes its config") {
  TempDir tmp;
  const std::string root = make_synth(tmp, "data", 2);
  Config cfg = smoke_config(root, tmp.s("out"));
  cfg.use_dac = cfg.use_spm = cfg.use_caf = cfg.use_gms = cfg.use_mls = false;

  const TrainResult res = train(cfg);
  CHECK(std::isfinite(res.last.l_sum));
  CHECK(res.last.l_depth == 0.0);
  CHECK(res.last.l_edge == 0.0);
  CHECK(res.last.l_mls == 0.0);
  CHECK(res.last.l_dec == 0.0);  // no weights without the depth branch
  CHECK(res.epoch_dec[0] == 0.0);

  const auto cfg_txt = slurp(tmp.s("out/config.txt"));
  const std::string text(cfg_txt.begin(), cfg_txt.end());
  for (const char* key : {"use_dac = false", "use_spm = false",
                          "use_caf = false", "use_gms = false",
                          "use_mls = false"})
    CHECK(text.find(key) != std::string::npos);
  CHECK(config_from_string(text).use_gms == false);
}

TEST_CASE("train: estimated depth source feeds the depth branch") {
  TempDir tmp;
  const std::string root = make_synth(tmp, "data", 2);
  fs::copy(fs::path(root) / "depth", fs::path(root) / "depth_est");
  Config cfg = smoke_config(root, tmp.s("out"));
  cfg.depth_source = "estimated";
  const TrainResult res = train(cfg);
  CHECK(res.last.l_depth > 0.0);
}

TEST_CASE("predict: deterministic bytes, stride padding, no depth reads") {
  TempDir tmp;
  const std::string root = make_synth(tmp, "data", 4);
  Config cfg = smoke_config(root, tmp.s("out"));
  const TrainResult res = train(cfg);

  reset_depth_read_count();
  Config pc = cfg;
  pc.out_dir = tmp.s("pred1");
  const std::string img = root + "/rgb/synth000.png";
  predict(pc, res.checkpoint, {img});
  const std::string out1 = tmp.s("pred1/synth000.png");
  REQUIRE(fs::exists(out1));
  CHECK(depth_read_count() == 0);

  pc.out_dir = tmp.s("pred2");
  predict(pc, res.checkpoint, {img});
  CHECK(slurp(out1) == slurp(tmp.s("pred2/synth000.png")));

  // same H x W out as in, 8-bit grayscale
  int bits = 0;
  const Tensor map = imread_gray(out1, &bits);
  CHECK(bits == 8);
  CHECK(map.shape() == Shape{1, 1, 32, 32});

  // an image that does not divide by the encoder stride is padded + cropped
  Tensor odd({1, 3, 33, 47});
  Rng orng(123);
  for (std::int64_t i = 0; i < odd.numel(); ++i)
    odd.data()[i] = orng.uniform();
  imwrite_rgb8(tmp.s("odd.png"), odd);
  auto net = load_model(res.checkpoint);
  predict_image(*net, tmp.s("odd.png"), tmp.s("odd_out.png"));
  const Tensor odd_map = imread_gray(tmp.s("odd_out.png"));
  CHECK(odd_map.shape() == Shape{1, 1, 33, 47});

  CHECK_THROWS_AS(predict(pc, res.checkpoint, {}), ConfigError);
}

TEST_CASE("evaluate: one report row and curve file per dataset") {
  TempDir tmp;
  const std::string root_a = make_synth(tmp, "seta", 3, 21);
  const std::string root_b = make_synth(tmp, "setb", 2, 22);
  Config cfg = smoke_config(root_a, tmp.s("out"));
  const TrainResult res = train(cfg);

  Config ec = cfg;
  ec.eval_roots = root_a + "," + root_b;
  ec.out_dir = tmp.s("eval");
  const auto rows = evaluate(ec, res.checkpoint);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].dataset == "seta");
  CHECK(rows[1].dataset == "setb");
  CHECK(rows[0].report.images == 3);
  CHECK(rows[1].report.images == 2);
  for (const auto& r : rows) {
    CHECK(r.report.f_max >= 0.0);
    CHECK(r.report.f_max <= 1.0);
    CHECK(r.report.mae >= 0.0);
    CHECK(r.report.mae <= 1.0);
    CHECK(r.report.f_max >= r.report.f_mean);  // max over thresholds
  }
  CHECK(count_lines(tmp.s("eval/metrics.csv")) == 3);
  CHECK(count_lines(tmp.s("eval/seta_curves.csv")) == 257);
  CHECK(count_lines(tmp.s("eval/setb_curves.csv")) == 257);
}

TEST_CASE("rank: consistency scores ascend and splits count by ceiling") {
  TempDir tmp;
  const std::string root = make_synth(tmp, "data", 7);

  Config dual_cfg = smoke_config(root, tmp.s("dual"));
  dual_cfg.variant = "dual";
  const TrainResult dual_res = train(dual_cfg);

  Config donly_cfg = smoke_config(root, tmp.s("donly"));
  donly_cfg.variant = "depth-only";
  const TrainResult donly_res = train(donly_cfg);

  auto dual_net = load_model(dual_res.checkpoint);
  CHECK(dual_net->dual_input());

  Config rc = smoke_config(root, tmp.s("rank"));
  const RankResult r =
      depth_consistency_rank(rc, dual_res.checkpoint, donly_res.checkpoint);
  REQUIRE(r.ranked.size() == 7);
  for (std::size_t i = 1; i < r.ranked.size(); ++i)
    CHECK(r.ranked[i - 1].score <= r.ranked[i].score);

  REQUIRE(r.splits.size() == 4);
  CHECK(r.splits[0].first == 30);
  CHECK(r.splits[0].second.size() == 3);  // ceil(0.3*7)
  CHECK(r.splits[1].second.size() == 4);  // ceil(0.5*7)
  CHECK(r.splits[2].second.size() == 5);  // ceil(0.7*7)
  CHECK(r.splits[3].second.size() == 7);

  std::set<std::string> all(r.splits[3].second.begin(),
                            r.splits[3].second.end());
  CHECK(all.size() == 7);
  CHECK(all.count("synth000") == 1);

  CHECK(count_lines(tmp.s("rank/rank.csv")) == 8);
  CHECK(count_lines(tmp.s("rank/split_top30.txt")) == 3);
  CHECK(count_lines(tmp.s("rank/split_top100.txt")) == 7);

  // the split list is a valid id_list for the loader
  const auto subset = load_dataset(root, true, rc.edge_dilate, "",
                                   tmp.s("rank/split_top30.txt"));
  CHECK(subset.size() == 3);

  SUBCASE("missing checkpoints are named") {
    CHECK_THROWS_WITH_AS(
        depth_consistency_rank(rc, tmp.s("nope_dual.ckpt"),
                               donly_res.checkpoint),
        doctest::Contains("dual-input"), TrainError);
    CHECK_THROWS_WITH_AS(
        depth_consistency_rank(rc, dual_res.checkpoint,
                               tmp.s("nope_donly.ckpt")),
        doctest::Contains("depth-only"), TrainError);
  }
  SUBCASE("variant mismatch is rejected") {
    CHECK_THROWS_WITH_AS(depth_consistency_rank(rc, donly_res.checkpoint,
                                                donly_res.checkpoint),
                         doctest::Contains("not a dual-input"), TrainError);
    CHECK_THROWS_WITH_AS(
        depth_consistency_rank(rc, dual_res.checkpoint, dual_res.checkpoint),
        doctest::Contains("not a depth-only"), TrainError);
  }
}

TEST_CASE("ablate: one run per flag row plus a summary table") {
  TempDir tmp;
  const std::string root = make_synth(tmp, "data", 2);
  Config cfg = smoke_config(root, tmp.s("out"));

  const auto rows = ablate(cfg);
  REQUIRE(rows.size() == 7);
  CHECK(rows[0].first == "baseline");
  CHECK(rows[6].first == "full");
  for (const auto& [name, losses] : rows) {
    CHECK(std::isfinite(losses.l_sum));
    CHECK(fs::exists(tmp.s("out/" + name + "/ckpt_last.ckpt")));
  }
  CHECK(count_lines(tmp.s("out/summary.csv")) == 8);
  // the baseline row really ran the all-off model
  CHECK(rows[0].second.l_depth == 0.0);
  CHECK(rows[0].second.l_edge == 0.0);
  CHECK(rows[0].second.l_mls == 0.0);
}

TEST_CASE("config text round-trips the trainer-facing fields") {
  Config c;
  c.variant = "depth-only";
  c.keep_checkpoints = true;
  c.lr_head = 1.0 / 3.0;  // not representable in few digits
  c.warmup_frac = 0.07;
  const Config back = config_from_string(config_to_string(c));
  CHECK(back.variant == "depth-only");
  CHECK(back.keep_checkpoints == true);
  CHECK(back.lr_head == c.lr_head);  // exact, 17 significant digits
  CHECK(back.warmup_frac == c.warmup_frac);
  Config bad;
  bad.variant = "sideways";
  CHECK_THROWS_AS(validate(bad), ConfigError);
}
