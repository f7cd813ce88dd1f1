#pragma once

#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>

#include <json.hpp>

namespace gtrs::config {

// Which candidate set the planner scores at inference time.
enum class Selector { kDpOnly, kXl, kDpXl, kDpL };

std::string_view selector_name(Selector s);
Selector selector_from_name(std::string_view name);

struct SceneConfig {
  std::size_t train = 2000;
  std::size_t eval = 200;
  double hard_fraction = 0.5;  // share of scenes generated at hard difficulty
};

struct VocabConfig {
  std::size_t n_samples = 16384;  // kinematic sample pool behind clustering
  std::size_t k_xl = 1024;        // super-dense training vocabulary
  std::size_t k_l = 512;          // inference vocabulary (2:1 ratio kept)
};

struct GeneratorConfig {
  int steps = 100;  // denoising steps
  double beta_min = 1e-4;
  double beta_max = 0.02;
  std::size_t epochs = 50;
  std::size_t hidden = 256;
  double lr = 2e-4;
};

struct ScorerConfig {
  std::size_t epochs = 20;
  double lr = 2e-4;
  double dropout_rate = 0.5;         // vocabulary dropout per batch
  double lambda_imitation = 0.1;
  double sigma_imitation = 1.0;
  double rotation_range = std::numbers::pi / 12.0;  // aug view rotations
  std::size_t k_topk = 32;           // refinement breadth (aug)
  double refine_delta = 0.15;
  double refine_weight = 1.0;
  double ema_decay = 0.999;
  bool refine_into_trunk = true;
};

struct Stage2Config {
  double rotation_range = std::numbers::pi / 12.0;
  double noise_sigma = 0.3;   // metres of agent/centerline jitter
  double dropout_frac = 0.2;  // fraction of feature cells zeroed
};

struct EvalConfig {
  Selector selector = Selector::kDpL;
  std::size_t n_dp = 100;  // dynamic proposals per scene
  Stage2Config stage2;
};

struct ExperimentConfig {
  std::uint64_t master_seed = 1;
  std::string out_dir = "runs/default";
  SceneConfig scenes;
  VocabConfig vocab;
  GeneratorConfig generator;
  ScorerConfig scorer;
  EvalConfig eval;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
// Strict: unknown or missing keys raise std::invalid_argument naming them.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

// Consistency checks (positive sizes, k <= n_samples, selector vs n_dp...).
void validate(const ExperimentConfig& cfg);

// Hash over every reproducibility-relevant field (out_dir excluded, so the
// same experiment relocated on disk keeps its identity).
std::uint64_t config_hash(const ExperimentConfig& cfg);
// Hash over only the fields that determine dataset bytes (seed, scenes,
// vocab sizes); training hyperparameter changes keep datasets valid.
std::uint64_t dataset_hash(const ExperimentConfig& cfg);
std::string hash_hex(std::uint64_t h);

}  // namespace gtrs::config
