#include "uta/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "uta/depthbranch.hpp"
#include "uta/image_io.hpp"

namespace fs = std::filesystem;

namespace uta {

double lr_schedule(std::int64_t step, std::int64_t total_steps, double max_lr,
                   double warmup_frac) {
  if (total_steps <= 0)
    throw std::out_of_range("lr_schedule: total_steps must be positive");
  if (step < 0 || step > total_steps)
    throw std::out_of_range("lr_schedule: step " + std::to_string(step) +
                            " outside [0, " + std::to_string(total_steps) +
                            "]");
  const double warm = warmup_frac * static_cast<double>(total_steps);
  if (warm >= static_cast<double>(total_steps))
    throw std::out_of_range("lr_schedule: warm-up covers the whole run");
  if (warm > 0.0 && static_cast<double>(step) <= warm)
    return max_lr * static_cast<double>(step) / warm;
  return max_lr * (static_cast<double>(total_steps) - step) /
         (static_cast<double>(total_steps) - warm);
}

Sgd::Sgd(const NamedVars& vars, double momentum, double weight_decay)
    : momentum_(momentum), wd_(weight_decay) {
  slots_.reserve(vars.params.size());
  for (const auto& [name, p] : vars.params) {
    Slot s;
    s.name = name;
    s.param = p;
    s.vel = Tensor::zeros(p->value.shape());
    s.backbone = name.rfind("backbone.", 0) == 0;
    slots_.push_back(std::move(s));
  }
}

void Sgd::step(double lr_backbone, double lr_head) {
  for (Slot& s : slots_) {
    Node& n = *s.param;
    if (!n.requires_grad || !n.has_grad) continue;  // untouched this step
    const double lr = s.backbone ? lr_backbone : lr_head;
    double* p = n.value.data();
    const double* g = n.grad.data();
    double* v = s.vel.data();
    const std::int64_t count = n.value.numel();
    for (std::int64_t i = 0; i < count; ++i) {
      const double gi = g[i] + wd_ * p[i];
      v[i] = momentum_ * v[i] + gi;
      p[i] -= lr * v[i];
    }
  }
}

void Sgd::zero_grad() {
  for (Slot& s : slots_) s.param->zero_grad();
}

Checkpoint snapshot(UtaNet& net, const Sgd* opt, std::uint32_t epoch,
                    std::uint64_t step) {
  Checkpoint ck;
  ck.epoch = epoch;
  ck.step = step;
  ck.config = config_to_string(net.cfg);
  NamedVars vars;
  net.collect(vars);
  for (const auto& [name, p] : vars.params)
    ck.entries.push_back({name, Checkpoint::kParam, p->value});
  for (const auto& [name, t] : vars.buffers)
    ck.entries.push_back({name, Checkpoint::kBuffer, *t});
  if (opt)
    for (const Sgd::Slot& s : opt->slots())
      ck.entries.push_back({s.name, Checkpoint::kMomentum, s.vel});
  return ck;
}

namespace {

void assign_checked(const std::string& name, Tensor& dst, const Tensor& src,
                    const char* what) {
  if (!(dst.shape() == src.shape()))
    throw IoError("checkpoint " + std::string(what) + " '" + name +
                  "' has shape " + src.shape().str() + ", model expects " +
                  dst.shape().str());
  dst = src;
}

}  // namespace

void restore(UtaNet& net, Sgd* opt, const Checkpoint& ck) {
  NamedVars vars;
  net.collect(vars);
  auto params = ck.by_kind(Checkpoint::kParam);
  for (auto& [name, p] : vars.params) {
    auto it = params.find(name);
    if (it == params.end())
      throw IoError("checkpoint is missing parameter '" + name + "'");
    assign_checked(name, p->value, it->second, "parameter");
    p->zero_grad();
    params.erase(it);
  }
  if (!params.empty())
    throw IoError("checkpoint has unknown parameter '" +
                  params.begin()->first + "'");
  auto buffers = ck.by_kind(Checkpoint::kBuffer);
  for (auto& [name, t] : vars.buffers) {
    auto it = buffers.find(name);
    if (it == buffers.end())
      throw IoError("checkpoint is missing buffer '" + name + "'");
    assign_checked(name, *t, it->second, "buffer");
    buffers.erase(it);
  }
  if (!buffers.empty())
    throw IoError("checkpoint has unknown buffer '" + buffers.begin()->first +
                  "'");
  if (opt) {
    auto vel = ck.by_kind(Checkpoint::kMomentum);
    for (Sgd::Slot& s : opt->slots()) {
      auto it = vel.find(s.name);
      if (it == vel.end()) {  // inference-only snapshot: velocity starts over
        s.vel = Tensor::zeros(s.vel.shape());
        continue;
      }
      assign_checked(s.name, s.vel, it->second, "momentum");
      vel.erase(it);
    }
    if (!vel.empty())
      throw IoError("checkpoint has momentum for unknown parameter '" +
                    vel.begin()->first + "'");
  }
}

std::unique_ptr<UtaNet> load_model(const std::string& ckpt_path,
                                   Config* cfg_out) {
  const Checkpoint ck = load_checkpoint(ckpt_path);
  const Config cfg = config_from_string(ck.config);
  Rng rng(cfg.seed);
  auto net = std::make_unique<UtaNet>(cfg, rng, cfg.variant == "dual");
  restore(*net, nullptr, ck);
  if (cfg_out) *cfg_out = cfg;
  return net;
}

namespace {

std::string dataset_name(const std::string& root) {
  fs::path p(root);
  if (p.filename().empty() || p.filename() == ".") p = p.parent_path();
  const std::string name = p.filename().string();
  return name.empty() ? root : name;
}

std::vector<Sample> load_set(const std::string& root, const Config& cfg,
                             bool need_depth) {
  const std::string tag = dataset_name(root);
  if (!need_depth) return load_dataset(root, false, cfg.edge_dilate, tag);
  if (cfg.depth_source == "estimated") {
    auto samples = load_dataset(root, false, cfg.edge_dilate, tag);
    ingest_estimated_depth(samples, root);
    return samples;
  }
  return load_dataset(root, true, cfg.edge_dilate, tag);
}

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) {
    if (!out.empty()) out += ", ";
    out += id;
  }
  return out;
}

Tensor pad_bottom_right(const Tensor& x, int ph, int pw) {
  const Shape s = x.shape();
  Tensor out({s.b, s.c, s.h + ph, s.w + pw});
  for (int b = 0; b < s.b; ++b)
    for (int c = 0; c < s.c; ++c)
      for (int h = 0; h < s.h; ++h)
        std::copy_n(x.data() + x.idx(b, c, h, 0), s.w,
                    out.data() + out.idx(b, c, h, 0));
  return out;
}

Tensor crop_top_left(const Tensor& x, int oh, int ow) {
  const Shape s = x.shape();
  Tensor out({s.b, s.c, oh, ow});
  for (int b = 0; b < s.b; ++b)
    for (int c = 0; c < s.c; ++c)
      for (int h = 0; h < oh; ++h)
        std::copy_n(x.data() + x.idx(b, c, h, 0), ow,
                    out.data() + out.idx(b, c, h, 0));
  return out;
}

UtaNet::Forward forward_batch(const UtaNet& net, const Batch& b, bool train,
                              int scale_index) {
  if (net.cfg.variant == "dual")
    return net.forward(make_var(b.rgb), make_var(b.depth), train, scale_index);
  if (net.cfg.variant == "depth-only")
    return net.forward(make_var(depth_as_rgb(b.depth)), train, scale_index);
  return net.forward(make_var(b.rgb), train, scale_index);
}

struct StepLosses {
  Var total;       // graph root for backward
  LossBundle vals;
  Tensor weights;  // dec weight map (zeros when the depth branch is off)
};

double scalar(const Var& v) { return v->value.data()[0]; }

StepLosses compute_losses(const UtaNet::Forward& out, const Batch& b,
                          const Config& cfg) {
  StepLosses r;
  auto add_term = [&](const Var& v) {
    r.total = r.total ? nn::add(r.total, v) : v;
  };
  if (cfg.use_dac) {
    const Var l_depth = depth_loss(out.p_d, b.depth);
    r.vals.l_depth = scalar(l_depth);
    add_term(l_depth);
    r.weights = dec_weights(out.p_d->value, b.depth, cfg.dec_window);
  } else {
    r.weights = Tensor::zeros(b.mask.shape());
  }
  if (cfg.use_spm) {
    const Var l_edge = edge_loss(out.edge_logits, b.edge, cfg.bce_single_term);
    r.vals.l_edge = scalar(l_edge);
    add_term(l_edge);
  }
  if (cfg.use_mls) {
    const Var l_mls = mls_loss(out.side_probs, b.mask, r.weights, cfg.lambda,
                               cfg.bce_single_term);
    r.vals.l_mls = scalar(l_mls);
    add_term(l_mls);
  }
  const Var l_bce = bce_loss(out.prob, b.mask, cfg.bce_single_term);
  const Var l_iou = iou_loss(out.prob, b.mask);
  const Var l_dec = dec_loss(out.prob, b.mask, r.weights, cfg.bce_single_term);
  const Var l_gms = nn::add(nn::add(l_bce, l_iou), l_dec);
  r.vals.l_bce = scalar(l_bce);
  r.vals.l_iou = scalar(l_iou);
  r.vals.l_dec = scalar(l_dec);
  r.vals.l_gms = scalar(l_gms);
  add_term(l_gms);
  r.vals.l_sum = scalar(r.total);
  return r;
}

void maybe_load_backbone(UtaNet& net, const Config& cfg) {
  if (cfg.backbone_weights.empty()) return;
  auto* r50 = dynamic_cast<ResNet50*>(net.encoder.get());
  if (!r50)
    throw ConfigError("backbone_weights requires backbone = resnet50");
  const Checkpoint ck = load_checkpoint(cfg.backbone_weights);
  auto state = ck.by_kind(Checkpoint::kParam);
  for (const auto& kv : ck.by_kind(Checkpoint::kBuffer)) state.insert(kv);
  r50->load_state(state);
  log_info("encoder initialized from " + cfg.backbone_weights);
}

void dump_weight_maps(const Tensor& weights, const Batch& b,
                      const std::string& dir, int epoch) {
  fs::create_directories(dir);
  const Shape s = weights.shape();
  for (int i = 0; i < s.b; ++i) {
    Tensor one({1, 1, s.h, s.w});
    std::copy_n(weights.data() + weights.idx(i, 0, 0, 0),
                static_cast<std::int64_t>(s.h) * s.w, one.data());
    imwrite_gray8(dir + "/epoch" + std::to_string(epoch) + "_" + b.ids[i] +
                      ".png",
                  one);
  }
}

}  // namespace

std::vector<Sample> load_training_set(const Config& cfg, bool need_depth) {
  return load_set(cfg.data_root, cfg, need_depth);
}

Tensor depth_as_rgb(const Tensor& depth) {
  const Shape s = depth.shape();
  if (s.c != 1)
    throw ShapeError("depth_as_rgb: expected single channel, got " + s.str());
  Tensor out({s.b, 3, s.h, s.w});
  const std::int64_t per = static_cast<std::int64_t>(s.h) * s.w;
  for (int b = 0; b < s.b; ++b)
    for (int c = 0; c < 3; ++c)
      std::copy_n(depth.data() + depth.idx(b, 0, 0, 0), per,
                  out.data() + out.idx(b, c, 0, 0));
  return out;
}

TrainResult train(const Config& cfg, const std::string& resume) {
  validate(cfg);
  fs::create_directories(cfg.out_dir);
  {
    std::ofstream snap(cfg.out_dir + "/config.txt");
    snap << config_to_string(cfg);
  }
  const bool all_off = !cfg.use_dac && !cfg.use_spm && !cfg.use_caf &&
                       !cfg.use_gms && !cfg.use_mls;
  if (all_off)
    log_info("baseline model (every fusion block off); config:\n" +
             config_to_string(cfg));

  const bool need_depth = cfg.use_dac || cfg.variant != "standard";
  const std::vector<Sample> samples = load_training_set(cfg, need_depth);
  if (samples.empty())
    throw TrainError("no training samples under " + cfg.data_root);

  Rng rng(cfg.seed);
  UtaNet net(cfg, rng, cfg.variant == "dual");
  maybe_load_backbone(net, cfg);
  NamedVars vars;
  net.collect(vars);
  Sgd opt(vars, cfg.momentum, cfg.weight_decay);

  const std::int64_t count = static_cast<std::int64_t>(samples.size());
  const std::int64_t micro_per_epoch =
      (count + cfg.batch_size - 1) / cfg.batch_size;
  const std::int64_t steps_per_epoch =
      (micro_per_epoch + cfg.grad_accum - 1) / cfg.grad_accum;
  const std::int64_t total_steps = steps_per_epoch * cfg.epochs;

  std::uint32_t start_epoch = 0;
  std::uint64_t step = 0;
  if (!resume.empty()) {
    const Checkpoint ck = load_checkpoint(resume);
    restore(net, &opt, ck);
    start_epoch = ck.epoch;
    step = ck.step;
    log_info("resumed " + resume + " (epoch " + std::to_string(ck.epoch) +
             ", step " + std::to_string(ck.step) + ")");
  }

  const std::string ckpt_path = cfg.out_dir + "/ckpt_last.ckpt";
  TrainResult res;
  res.checkpoint = ckpt_path;
  if (start_epoch >= static_cast<std::uint32_t>(cfg.epochs)) {
    log_warn("resume checkpoint already covers all " +
             std::to_string(cfg.epochs) + " epochs; nothing to do");
    return res;
  }

  const std::string log_path = cfg.out_dir + "/train_log.csv";
  const std::string dec_path = cfg.out_dir + "/dec_weights.csv";
  const bool fresh = resume.empty() || !fs::exists(log_path);
  std::ofstream log(log_path, fresh ? std::ios::trunc : std::ios::app);
  std::ofstream dec_log(dec_path, fresh ? std::ios::trunc : std::ios::app);
  if (!log || !dec_log)
    throw IoError("cannot write logs under " + cfg.out_dir);
  log.precision(10);
  dec_log.precision(10);
  if (fresh) {
    log << "epoch,step,scale,l_bce,l_iou,l_depth,l_edge,l_dec,l_mls,l_gms,"
           "l_sum\n";
    dec_log << "epoch,mean_weight\n";
  }

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    // One stream per epoch: interrupted and uninterrupted runs draw the
    // same shuffles, crops and scales.
    Rng erng(cfg.seed + 0x9E3779B97F4A7C15ull *
                            static_cast<std::uint64_t>(epoch + 1));
    std::vector<std::int64_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    for (std::int64_t i = count - 1; i > 0; --i)
      std::swap(order[i], order[erng.uniform_int(static_cast<int>(i + 1))]);

    double epoch_loss = 0, weight_sum = 0;
    std::int64_t weight_count = 0;
    int in_group = 0, scale_index = 0;
    for (std::int64_t mb = 0; mb < micro_per_epoch; ++mb) {
      if (in_group == 0)
        scale_index = erng.uniform_int(static_cast<int>(cfg.scales.size()));

      std::vector<Sample> picked;
      const std::int64_t lo = mb * cfg.batch_size;
      const std::int64_t hi = std::min(lo + cfg.batch_size, count);
      picked.reserve(hi - lo);
      for (std::int64_t j = lo; j < hi; ++j) {
        const Sample& s = samples[order[j]];
        picked.push_back(cfg.augment ? augment(s, erng, cfg.crop_min_area)
                                     : s);
      }
      std::vector<const Sample*> ptrs;
      ptrs.reserve(picked.size());
      for (const Sample& s : picked) ptrs.push_back(&s);
      const Batch batch = multiscale_batch(ptrs, cfg.scales[scale_index], cfg);

      const UtaNet::Forward out = forward_batch(net, batch, true, scale_index);
      const StepLosses sl = compute_losses(out, batch, cfg);
      if (!std::isfinite(sl.vals.l_sum))
        throw TrainError("non-finite loss at epoch " +
                         std::to_string(epoch + 1) + ", step " +
                         std::to_string(step) + "; batch ids: " +
                         join_ids(batch.ids));

      log << epoch + 1 << ',' << step << ',' << cfg.scales[scale_index] << ','
          << sl.vals.l_bce << ',' << sl.vals.l_iou << ',' << sl.vals.l_depth
          << ',' << sl.vals.l_edge << ',' << sl.vals.l_dec << ','
          << sl.vals.l_mls << ',' << sl.vals.l_gms << ',' << sl.vals.l_sum
          << std::endl;

      backward(cfg.grad_accum > 1 ? nn::scale(sl.total, 1.0 / cfg.grad_accum)
                                  : sl.total);

      const double* w = sl.weights.data();
      for (std::int64_t i = 0; i < sl.weights.numel(); ++i) weight_sum += w[i];
      weight_count += sl.weights.numel();
      if (cfg.dump_error_maps && cfg.use_dac && mb == 0)
        dump_weight_maps(sl.weights, batch, cfg.out_dir + "/error_maps",
                         epoch + 1);

      epoch_loss += sl.vals.l_sum;
      res.last = sl.vals;

      if (++in_group == cfg.grad_accum || mb == micro_per_epoch - 1) {
        const auto at = static_cast<std::int64_t>(step) + 1;
        opt.step(lr_schedule(at, total_steps, cfg.lr_backbone,
                             cfg.warmup_frac),
                 lr_schedule(at, total_steps, cfg.lr_head, cfg.warmup_frac));
        opt.zero_grad();
        ++step;
        in_group = 0;
      }
    }

    res.epoch_loss.push_back(epoch_loss / static_cast<double>(micro_per_epoch));
    res.epoch_dec.push_back(
        weight_count ? weight_sum / static_cast<double>(weight_count) : 0.0);
    dec_log << epoch + 1 << ',' << res.epoch_dec.back() << std::endl;

    const Checkpoint ck = snapshot(net, &opt, epoch + 1, step);
    save_checkpoint(ckpt_path, ck);
    if (cfg.keep_checkpoints)
      save_checkpoint(
          cfg.out_dir + "/ckpt_epoch_" + std::to_string(epoch + 1) + ".ckpt",
          ck);
    log_info("epoch " + std::to_string(epoch + 1) + "/" +
             std::to_string(cfg.epochs) +
             " mean loss " + std::to_string(res.epoch_loss.back()));
  }
  return res;
}

namespace {

// Inference on one sample at the model's base scale, scored at mask size.
Tensor predict_sample(const UtaNet& net, const Sample& s) {
  const int base = net.cfg.base_scale();
  Var x = net.cfg.variant == "depth-only" ? make_var(depth_as_rgb(s.depth))
                                          : make_var(s.rgb);
  x = nn::resize_bilinear(x, base, base);
  UtaNet::Forward out;
  if (net.dual_input()) {
    const Var d = nn::resize_bilinear(make_var(s.depth), base, base);
    out = net.forward(x, d, false, -1);
  } else {
    out = net.forward(x, false, -1);
  }
  const Shape ms = s.mask.shape();
  return nn::resize_bilinear(out.prob, ms.h, ms.w)->value;
}

}  // namespace

MetricsReport evaluate_dataset(const UtaNet& net,
                               const std::vector<Sample>& samples,
                               bool adaptive_fmean) {
  MetricsAccumulator acc(adaptive_fmean);
  NoGradGuard ng;  // set once, before workers spawn
  const std::size_t total = samples.size();
  const std::size_t chunk = 64;  // bounds prediction memory
  const unsigned hw = std::thread::hardware_concurrency();
  const std::size_t workers =
      std::min<std::size_t>(std::max(1u, hw), std::min(chunk, total ? total : 1));
  std::vector<Tensor> preds(chunk);
  for (std::size_t lo = 0; lo < total; lo += chunk) {
    const std::size_t n = std::min(chunk, total - lo);
    std::atomic<std::size_t> cursor{0};
    std::mutex err_mu;
    std::exception_ptr err;
    auto work = [&]() {
      try {
        for (std::size_t i = cursor++; i < n; i = cursor++)
          preds[i] = predict_sample(net, samples[lo + i]);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!err) err = std::current_exception();
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
    // fold in dataset order so the report is independent of scheduling
    for (std::size_t i = 0; i < n; ++i) acc.add(preds[i], samples[lo + i].mask);
  }
  return acc.report();
}

std::vector<EvalRow> evaluate(const Config& cfg,
                              const std::string& ckpt_path) {
  auto net = load_model(ckpt_path);
  if (cfg.eval_roots.empty())
    throw ConfigError("evaluate: eval_roots is empty");
  fs::create_directories(cfg.out_dir);

  std::vector<EvalRow> rows;
  std::stringstream roots(cfg.eval_roots);
  std::string root;
  while (std::getline(roots, root, ',')) {
    const auto a = root.find_first_not_of(" \t");
    if (a == std::string::npos) continue;
    root = root.substr(a, root.find_last_not_of(" \t") - a + 1);
    const std::string name = dataset_name(root);
    const auto samples =
        load_set(root, cfg, /*need_depth=*/net->cfg.variant != "standard");
    if (samples.empty()) throw IoError("no samples under " + root);
    EvalRow row{name, evaluate_dataset(*net, samples, cfg.f_mean_adaptive)};
    write_curves_csv(cfg.out_dir + "/" + name + "_curves.csv", row.report);
    log_info(name + ": f_max " + std::to_string(row.report.f_max) + ", mae " +
             std::to_string(row.report.mae));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("evaluate: no usable eval roots");

  std::ofstream csv(cfg.out_dir + "/metrics.csv");
  csv.precision(10);
  csv << "dataset,images,f_max,f_mean,f_weighted,mae\n";
  for (const EvalRow& r : rows)
    csv << r.dataset << ',' << r.report.images << ',' << r.report.f_max << ','
        << r.report.f_mean << ',' << r.report.f_weighted << ',' << r.report.mae
        << '\n';
  return rows;
}

void predict_image(const UtaNet& net, const std::string& image_path,
                   const std::string& out_path) {
  const Tensor rgb01 = imread_rgb(image_path);
  const Shape in = rgb01.shape();
  Tensor x = normalize_rgb(rgb01);
  const int div = net.size_divisor();
  const int ph = (div - in.h % div) % div;
  const int pw = (div - in.w % div) % div;
  if (ph || pw) {
    log_warn("input " + std::to_string(in.w) + "x" + std::to_string(in.h) +
             " is not a multiple of the encoder stride " +
             std::to_string(div) + "; padding and cropping back");
    x = pad_bottom_right(x, ph, pw);
  }
  NoGradGuard ng;
  const UtaNet::Forward out = net.forward(make_var(x), false, -1);
  Tensor prob = out.prob->value;
  if (ph || pw) prob = crop_top_left(prob, in.h, in.w);
  imwrite_gray8(out_path, prob);
}

void predict(const Config& cfg, const std::string& ckpt_path,
             const std::vector<std::string>& images) {
  if (images.empty()) throw ConfigError("predict: no input images");
  auto net = load_model(ckpt_path);
  if (net->dual_input())
    throw ConfigError(
        "predict: dual-input checkpoints cannot run depth-free inference");
  fs::create_directories(cfg.out_dir);
  for (const std::string& img : images) {
    const std::string out =
        cfg.out_dir + "/" + fs::path(img).stem().string() + ".png";
    predict_image(*net, img, out);
    log_info("wrote " + out);
  }
}

RankResult depth_consistency_rank(const Config& cfg,
                                  const std::string& ckpt_dual,
                                  const std::string& ckpt_depth_only) {
  if (!fs::exists(ckpt_dual))
    throw TrainError("missing auxiliary checkpoint (dual-input): " +
                     ckpt_dual);
  if (!fs::exists(ckpt_depth_only))
    throw TrainError("missing auxiliary checkpoint (depth-only): " +
                     ckpt_depth_only);
  auto dual = load_model(ckpt_dual);
  if (!dual->dual_input())
    throw TrainError("not a dual-input checkpoint: " + ckpt_dual);
  auto depth_only = load_model(ckpt_depth_only);
  if (depth_only->cfg.variant != "depth-only")
    throw TrainError("not a depth-only checkpoint: " + ckpt_depth_only);

  const auto samples = load_training_set(cfg, /*need_depth=*/true);
  if (samples.empty())
    throw TrainError("no samples to rank under " + cfg.data_root);

  NoGradGuard ng;
  RankResult res;
  res.ranked.reserve(samples.size());
  const int base = dual->cfg.base_scale();
  for (const Sample& s : samples) {
    const Var rgb = nn::resize_bilinear(make_var(s.rgb), base, base);
    const Var dep = nn::resize_bilinear(make_var(s.depth), base, base);
    const Tensor from_both = dual->forward(rgb, dep, false, -1).prob->value;
    Var x = nn::resize_bilinear(make_var(depth_as_rgb(s.depth)),
                                depth_only->cfg.base_scale(),
                                depth_only->cfg.base_scale());
    Var p = depth_only->forward(x, false, -1).prob;
    if (depth_only->cfg.base_scale() != base)
      p = nn::resize_bilinear(p, base, base);
    const Tensor& from_depth = p->value;
    double diff = 0;
    for (std::int64_t i = 0; i < from_both.numel(); ++i)
      diff += std::abs(from_both.data()[i] - from_depth.data()[i]);
    res.ranked.push_back({s.id, diff / static_cast<double>(from_both.numel())});
  }
  std::sort(res.ranked.begin(), res.ranked.end(),
            [](const RankEntry& a, const RankEntry& b) {
              return a.score != b.score ? a.score < b.score : a.id < b.id;
            });

  fs::create_directories(cfg.out_dir);
  std::ofstream csv(cfg.out_dir + "/rank.csv");
  csv.precision(10);
  csv << "id,score\n";
  for (const RankEntry& e : res.ranked) csv << e.id << ',' << e.score << '\n';

  const std::size_t total = res.ranked.size();
  for (int pct : {30, 50, 70, 100}) {
    const std::size_t keep = (pct * total + 99) / 100;  // ceil
    std::vector<std::string> ids;
    ids.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) ids.push_back(res.ranked[i].id);
    std::ofstream list(cfg.out_dir + "/split_top" + std::to_string(pct) +
                       ".txt");
    for (const std::string& id : ids) list << id << '\n';
    res.splits.emplace_back(pct, std::move(ids));
  }
  return res;
}

std::vector<std::pair<std::string, LossBundle>> ablate(const Config& base) {
  struct Row {
    const char* name;
    bool dac, spm, caf, gms, mls;
  };
  static const Row rows[] = {
      {"baseline", false, false, false, false, false},
      {"dac", true, false, false, false, false},
      {"dac_spm", true, true, false, false, false},
      {"caf", false, false, true, false, false},
      {"gms", false, false, false, true, false},
      {"mls", false, false, false, false, true},
      {"full", true, true, true, true, true},
  };
  fs::create_directories(base.out_dir);
  std::ofstream csv(base.out_dir + "/summary.csv");
  csv.precision(10);
  csv << "run,use_dac,use_spm,use_caf,use_gms,use_mls,l_sum,f_max,f_mean,"
         "f_weighted,mae\n";

  std::vector<std::pair<std::string, LossBundle>> out;
  for (const Row& r : rows) {
    Config c = base;
    c.use_dac = r.dac;
    c.use_spm = r.spm;
    c.use_caf = r.caf;
    c.use_gms = r.gms;
    c.use_mls = r.mls;
    c.out_dir = base.out_dir + "/" + r.name;
    log_info("ablation run: " + std::string(r.name));
    const TrainResult t = train(c);
    auto net = load_model(t.checkpoint);
    const auto samples = load_training_set(c, /*need_depth=*/false);
    const MetricsReport m = evaluate_dataset(*net, samples, c.f_mean_adaptive);
    csv << r.name << ',' << r.dac << ',' << r.spm << ',' << r.caf << ','
        << r.gms << ',' << r.mls << ',' << t.last.l_sum << ',' << m.f_max
        << ',' << m.f_mean << ',' << m.f_weighted << ',' << m.mae << std::endl;
    out.emplace_back(r.name, t.last);
  }
  return out;
}

}  // namespace uta
