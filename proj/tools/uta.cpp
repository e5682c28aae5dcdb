// Command-line front end: train / eval / predict / rank-depth / ablate plus
// the synthetic-data and backbone-conversion utilities. Exit code 0 on
// success; any failure prints a single "error: ..." line on stderr.
#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "uta/core.hpp"
#include "uta/data.hpp"
#include "uta/npz.hpp"
#include "uta/trainer.hpp"

namespace {

std::string trim_copy(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

uta::Config build_config(const std::string& config_path,
                         const std::vector<std::string>& sets) {
  uta::Config cfg;
  if (!config_path.empty()) cfg = uta::load_config(config_path);
  for (const std::string& kv : sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw uta::ConfigError("--set expects key=value, got: " + kv);
    uta::apply_kv(cfg, trim_copy(kv.substr(0, eq)), trim_copy(kv.substr(eq + 1)));
  }
  return cfg;
}

void add_config_opts(CLI::App* cmd, std::string* config_path,
                     std::vector<std::string>* sets) {
  cmd->add_option("-c,--config", *config_path,
                  "config file (one `key = value` per line)")
      ->check(CLI::ExistingFile);
  cmd->add_option("-s,--set", *sets,
                  "override a config key, e.g. --set epochs=8 (repeatable)")
      ->allow_extra_args(false);  // one key=value per flag, keep positionals
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"depth-aware salient object detection"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::string ckpt, resume, ckpt_dual, ckpt_depth_only;
  std::vector<std::string> images;
  std::string synth_dir;
  int synth_count = 10, synth_size = 64;
  std::uint64_t synth_seed = 1;
  std::string npz_in, ckpt_out;

  CLI::App* tr = app.add_subcommand("train", "run the training loop");
  add_config_opts(tr, &config_path, &sets);
  tr->add_option("--resume", resume, "checkpoint to continue from")
      ->check(CLI::ExistingFile);

  CLI::App* ev = app.add_subcommand("eval", "score a checkpoint on eval_roots");
  add_config_opts(ev, &config_path, &sets);
  ev->add_option("--ckpt", ckpt, "checkpoint to evaluate")->required();

  CLI::App* pr =
      app.add_subcommand("predict", "write saliency maps for RGB images");
  add_config_opts(pr, &config_path, &sets);
  pr->add_option("--ckpt", ckpt, "checkpoint to run")->required();
  pr->add_option("images", images, "input image files")->required();

  CLI::App* rk = app.add_subcommand(
      "rank-depth", "rank training depth quality by prediction consistency");
  add_config_opts(rk, &config_path, &sets);
  rk->add_option("--dual", ckpt_dual, "dual-input model checkpoint")
      ->required();
  rk->add_option("--depth-only", ckpt_depth_only,
                 "depth-only model checkpoint")
      ->required();

  CLI::App* ab =
      app.add_subcommand("ablate", "train and score the module ladder");
  add_config_opts(ab, &config_path, &sets);

  CLI::App* sy =
      app.add_subcommand("synth", "generate a synthetic RGB-D dataset");
  sy->add_option("--out", synth_dir, "output dataset directory")->required();
  sy->add_option("--count", synth_count, "number of samples");
  sy->add_option("--size", synth_size, "image side length");
  sy->add_option("--seed", synth_seed, "generator seed");

  CLI::App* cv = app.add_subcommand(
      "convert-backbone",
      "translate a torch-style resnet50 .npz state into a checkpoint");
  cv->add_option("--npz", npz_in, "input .npz archive")
      ->required()
      ->check(CLI::ExistingFile);
  cv->add_option("--out", ckpt_out, "output checkpoint path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }

  try {
    if (tr->parsed()) {
      const uta::TrainResult r = uta::train(build_config(config_path, sets),
                                            resume);
      std::cout << "checkpoint: " << r.checkpoint << "\n";
    } else if (ev->parsed()) {
      const auto rows = uta::evaluate(build_config(config_path, sets), ckpt);
      for (const uta::EvalRow& r : rows)
        std::cout << r.dataset << ": f_max " << r.report.f_max << "  f_mean "
                  << r.report.f_mean << "  f_w " << r.report.f_weighted
                  << "  mae " << r.report.mae << "\n";
    } else if (pr->parsed()) {
      uta::predict(build_config(config_path, sets), ckpt, images);
    } else if (rk->parsed()) {
      const uta::RankResult r = uta::depth_consistency_rank(
          build_config(config_path, sets), ckpt_dual, ckpt_depth_only);
      std::cout << "ranked " << r.ranked.size() << " samples; splits:";
      for (const auto& [pct, ids] : r.splits)
        std::cout << " top" << pct << "%=" << ids.size();
      std::cout << "\n";
    } else if (ab->parsed()) {
      const auto rows = uta::ablate(build_config(config_path, sets));
      for (const auto& [name, loss] : rows)
        std::cout << name << ": l_sum " << loss.l_sum << "\n";
    } else if (sy->parsed()) {
      const int n = uta::make_synthetic_dataset(synth_dir, synth_count,
                                                synth_size, synth_seed);
      std::cout << "wrote " << n << " samples under " << synth_dir << "\n";
    } else if (cv->parsed()) {
      uta::convert_backbone_npz(npz_in, ckpt_out);
      std::cout << "wrote " << ckpt_out << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
