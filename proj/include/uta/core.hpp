#ifndef UTA_CORE_HPP
#define UTA_CORE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "uta/tensor.hpp"

namespace uta {

// Probability clamp: sigmoid outputs live in [kEpsProb, 1-kEpsProb] so the
// cross-entropy logs are always finite.
constexpr double kEpsProb = 1e-7;
// Depth floor: depth maps live in [kEpsDepth, 1] so log-depth is defined.
constexpr double kEpsDepth = 1e-3;

void log_info(const std::string& msg);
void log_warn(const std::string& msg);

/// Rescale raw sensor depth to (kEpsDepth, 1]: divide by the per-image max
/// (falling back to the full bit range when an image is all zero), then clamp.
/// Expects (B,1,H,W) with values in [0, 2^bit_depth - 1].
Tensor normalize_depth(const Tensor& raw, int bit_depth);

/// Run configuration. Every field can be set from a flat `key = value` file
/// and overridden from the command line.
struct Config {
  std::string backbone = "tiny";  // "tiny" | "resnet50"
  int cprime = 64;                // fusion channel width C'
  std::vector<int> scales = {224, 256, 288, 320, 352};  // ascending
  std::vector<double> gamma = {0.25, 0.25, 0.25, 0.25, 1.0};
  std::vector<double> lambda = {1.0, 0.8, 0.6, 0.4, 0.2};

  double lr_backbone = 0.005;
  double lr_head = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int batch_size = 32;
  int grad_accum = 1;  // optimizer steps use batch_size*grad_accum samples
  int epochs = 48;
  double warmup_frac = 0.05;
  std::uint64_t seed = 1;

  std::string data_root;         // train dataset directory
  std::string eval_roots;        // comma-separated test dataset directories
  std::string depth_source = "captured";  // "captured" | "estimated"
  std::string out_dir = "out";
  std::string backbone_weights;  // converted checkpoint for resnet50

  // Network topology. "standard" trains the RGB-only-at-inference model;
  // "dual" adds a parallel depth encoder and "depth-only" feeds the depth map
  // (replicated to three channels) instead of the RGB image. The last two are
  // the auxiliary models of the depth-consistency ranking experiment.
  std::string variant = "standard";  // "standard" | "dual" | "depth-only"

  bool augment = true;
  double crop_min_area = 0.875;

  // Behaviour switches documented in README.
  bool bce_single_term = false;  // positive-term-only cross entropy
  bool gms_prob_fusion = false;  // ensemble heads after sigmoid, not before
  bool f_mean_adaptive = false;  // adaptive-threshold F_mean instead of 256-mean
  int edge_dilate = 5;           // edge-band structuring element size
  int gms_kernel = 3;            // per-head conv kernel
  int dec_window = 1;            // depth-error averaging window
  bool dump_error_maps = false;  // write per-epoch weight maps as images
  bool keep_checkpoints = false;  // retain ckpt_epoch_<n> besides the rolling one

  // Ablation switches (all on = full model).
  bool use_dac = true;  // depth branch + error-weighted correction
  bool use_spm = true;
  bool use_caf = true;
  bool use_gms = true;
  bool use_mls = true;

  int base_scale() const { return scales.back(); }
};

/// Parse `key = value` lines ('#' starts a comment). Unknown keys are errors.
Config load_config(const std::string& path);
/// Same grammar from an in-memory string (e.g. a checkpoint's snapshot).
Config config_from_string(const std::string& text);
void apply_kv(Config& c, const std::string& key, const std::string& value);
void validate(const Config& c);
/// Round-trippable snapshot of every field, one `key = value` per line.
std::string config_to_string(const Config& c);

}  // namespace uta

#endif  // UTA_CORE_HPP
