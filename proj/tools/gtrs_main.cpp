// Command line front end: dataset/vocab building, training, evaluation and
// report collection over one experiment output directory.
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gtrs/config.hpp"
#include "gtrs/harness.hpp"

namespace {

using gtrs::config::ExperimentConfig;

struct GlobalOpts {
  std::string config_path;
  std::string out_dir_override;
  std::optional<std::uint64_t> seed_override;
};

ExperimentConfig resolve_config(const GlobalOpts& g) {
  ExperimentConfig cfg;
  if (!g.config_path.empty()) {
    cfg = gtrs::config::load_config(g.config_path);
  }
  if (!g.out_dir_override.empty()) cfg.out_dir = g.out_dir_override;
  if (g.seed_override) cfg.master_seed = *g.seed_override;
  gtrs::config::validate(cfg);
  return cfg;
}

void print_error(const std::exception& e) {
  const nlohmann::json rec{
      {"error", {{"type", typeid(e).name()}, {"message", e.what()}}}};
  std::cerr << rec.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trajectory planning experiment harness"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "experiment config (json)");
  app.add_option("--out-dir", g.out_dir_override, "override config out_dir");
  std::uint64_t seed_val = 0;
  auto* seed_opt = app.add_option("--seed", seed_val, "override config master_seed");

  auto* dataset = app.add_subcommand("dataset", "dataset operations");
  auto* dataset_build = dataset->add_subcommand("build", "generate scenes and labels");
  auto* vocab = app.add_subcommand("vocab", "vocabulary operations");
  auto* vocab_build = vocab->add_subcommand("build", "cluster the trajectory vocabularies");
  dataset->require_subcommand(1);
  vocab->require_subcommand(1);

  auto* train = app.add_subcommand("train", "train one pipeline component");
  std::string component;
  std::uint32_t instance = 0;
  train->add_option("--component", component, "generator, dense or aug")->required();
  train->add_option("--instance", instance, "ensemble member index (changes seeds)");

  auto* eval = app.add_subcommand("eval", "two-stage evaluation on held-out scenes");
  std::string inference_vocab;
  std::vector<std::string> ensemble;
  std::string checkpoint;
  std::string generator_ckpt;
  eval->add_option("--inference-vocab", inference_vocab, "dp, xl, dp+xl or dp+l")
      ->required();
  eval->add_option("--ensemble", ensemble, "scorer checkpoints to average");
  eval->add_option("--checkpoint", checkpoint, "single scorer checkpoint");
  eval->add_option("--generator", generator_ckpt, "generator checkpoint (when dp is used)");

  auto* report = app.add_subcommand("report", "collect eval reports into one table");
  std::string report_dir;
  report->add_option("--dir", report_dir, "directory to scan (default: out_dir/reports)");

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count() > 0) g.seed_override = seed_val;

  try {
    if (dataset_build->parsed()) {
      gtrs::harness::cmd_dataset_build(resolve_config(g));
    } else if (vocab_build->parsed()) {
      gtrs::harness::cmd_vocab_build(resolve_config(g));
    } else if (train->parsed()) {
      gtrs::harness::cmd_train(resolve_config(g), component, instance);
    } else if (eval->parsed()) {
      ExperimentConfig cfg = resolve_config(g);
      cfg.eval.selector = gtrs::config::selector_from_name(inference_vocab);
      gtrs::harness::EvalRequest req;
      req.scorer_checkpoints = ensemble;
      if (!checkpoint.empty()) req.scorer_checkpoints.push_back(checkpoint);
      if (req.scorer_checkpoints.empty()) {
        // default to the dense scorer of this experiment
        req.scorer_checkpoints.push_back(
            gtrs::harness::Paths{cfg.out_dir}.checkpoint("dense", 0).string());
      }
      req.generator_checkpoint = generator_ckpt;
      gtrs::harness::cmd_eval(cfg, req);
    } else if (report->parsed()) {
      std::filesystem::path dir = report_dir;
      if (dir.empty()) {
        ExperimentConfig cfg = resolve_config(g);
        dir = gtrs::harness::Paths{cfg.out_dir}.reports_dir();
      }
      gtrs::harness::cmd_report(dir);
    }
  } catch (const std::exception& e) {
    print_error(e);
    return 1;
  }
  return 0;
}
