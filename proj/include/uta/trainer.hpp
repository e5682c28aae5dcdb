#ifndef UTA_TRAINER_HPP
#define UTA_TRAINER_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "uta/checkpoint.hpp"
#include "uta/data.hpp"
#include "uta/losses.hpp"
#include "uta/metrics.hpp"
#include "uta/model.hpp"

namespace uta {

struct TrainError : std::runtime_error {
  explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Piecewise-linear learning rate: 0 -> max_lr over the first warmup_frac of
/// the run, then down to 0 at total_steps. step counts optimizer steps.
double lr_schedule(std::int64_t step, std::int64_t total_steps, double max_lr,
                   double warmup_frac = 0.05);

/// SGD with momentum and L2 weight decay. Two learning-rate groups, split by
/// the "backbone." name prefix (the pretrained encoder moves slower than
/// freshly initialized heads). Parameters that received no gradient this step
/// are skipped entirely -- value, velocity and decay -- which keeps the
/// non-selected multi-scale heads bitwise unchanged.
class Sgd {
 public:
  struct Slot {
    std::string name;
    Var param;
    Tensor vel;  // momentum buffer, zero-initialized
    bool backbone = false;
  };

  Sgd(const NamedVars& vars, double momentum, double weight_decay);

  void step(double lr_backbone, double lr_head);
  void zero_grad();

  std::vector<Slot>& slots() { return slots_; }
  const std::vector<Slot>& slots() const { return slots_; }

 private:
  std::vector<Slot> slots_;
  double momentum_ = 0.9, wd_ = 5e-4;
};

/// Full training state -> checkpoint (params + momentum + running stats +
/// config snapshot). Pass opt = nullptr for an inference-only snapshot.
Checkpoint snapshot(UtaNet& net, const Sgd* opt, std::uint32_t epoch,
                    std::uint64_t step);
/// Strict inverse: every model tensor must be present and shape-compatible,
/// and unknown param/buffer entries are rejected. Momentum entries are
/// optional (a fresh optimizer starts at zero velocity).
void restore(UtaNet& net, Sgd* opt, const Checkpoint& ck);

/// Rebuild the network a checkpoint was saved from (architecture comes from
/// the stored config snapshot) and load its weights, ready for inference.
std::unique_ptr<UtaNet> load_model(const std::string& ckpt_path,
                                   Config* cfg_out = nullptr);

/// Load `cfg.data_root` honoring depth_source; need_depth = false skips depth
/// files entirely.
std::vector<Sample> load_training_set(const Config& cfg, bool need_depth);

/// (B,1,H,W) -> (B,3,H,W): the depth-only variant feeds the encoder this.
Tensor depth_as_rgb(const Tensor& depth);

struct TrainResult {
  std::string checkpoint;          // last checkpoint written
  LossBundle last;                 // losses of the final batch
  std::vector<double> epoch_loss;  // mean l_sum per epoch
  std::vector<double> epoch_dec;   // mean error-weight per epoch
};

/// Run the training loop described by cfg; writes train_log.csv,
/// dec_weights.csv, config.txt and a rolling checkpoint under cfg.out_dir.
/// `resume` continues from a checkpoint, bit-compatible with an
/// uninterrupted run. A non-finite loss aborts, naming the batch.
TrainResult train(const Config& cfg, const std::string& resume = "");

/// Mean metrics of the model over a sample list (inference at the model's
/// base scale, scored at each mask's native size).
MetricsReport evaluate_dataset(const UtaNet& net,
                               const std::vector<Sample>& samples,
                               bool adaptive_fmean);

struct EvalRow {
  std::string dataset;
  MetricsReport report;
};

/// Evaluate a checkpoint on every dataset in cfg.eval_roots; writes
/// metrics.csv plus a PR-curve CSV per dataset under cfg.out_dir.
std::vector<EvalRow> evaluate(const Config& cfg, const std::string& ckpt_path);

/// Depth-free inference on one image file: pad to the backbone stride if
/// needed (warning), forward, crop back, write an 8-bit grayscale map.
void predict_image(const UtaNet& net, const std::string& image_path,
                   const std::string& out_path);
/// Batch form; maps are written to cfg.out_dir under the source stem.
void predict(const Config& cfg, const std::string& ckpt_path,
             const std::vector<std::string>& images);

struct RankEntry {
  std::string id;
  double score = 0;  // disagreement between the two auxiliary predictions
};
struct RankResult {
  std::vector<RankEntry> ranked;  // ascending score = best depth first
  // (percent, ids) splits: top-30/50/70/100% with ceil(p*N) entries each
  std::vector<std::pair<int, std::vector<std::string>>> splits;
};

/// Rank training samples by depth quality: per sample, MAE between the
/// depth-only model's prediction and the dual-input model's prediction.
/// Writes rank.csv and split_top<k>.txt id lists under cfg.out_dir.
RankResult depth_consistency_rank(const Config& cfg,
                                  const std::string& ckpt_dual,
                                  const std::string& ckpt_depth_only);

/// Train + score the standard flag ladder (baseline, each module added,
/// full model); one subdirectory per row plus summary.csv.
std::vector<std::pair<std::string, LossBundle>> ablate(const Config& base);

}  // namespace uta

#endif  // UTA_TRAINER_HPP
