#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gtrs/config.hpp"
#include "gtrs/generator.hpp"
#include "gtrs/io.hpp"
#include "gtrs/metrics.hpp"
#include "gtrs/nn.hpp"
#include "gtrs/scorer.hpp"
#include "gtrs/vocab.hpp"
#include "gtrs/world.hpp"

namespace gtrs::harness {

inline constexpr std::size_t kShardScenes = 100;

// Canonical artifact layout under one experiment output directory.
struct Paths {
  std::filesystem::path out_dir;

  std::filesystem::path dataset_dir() const { return out_dir / "dataset"; }
  std::filesystem::path manifest() const { return dataset_dir() / "manifest.json"; }
  std::filesystem::path vocab_file(vocab::Tag tag) const;
  std::filesystem::path train_shard(std::size_t idx) const;
  std::filesystem::path eval_scenes() const { return dataset_dir() / "eval-scenes.jsonl"; }
  std::filesystem::path checkpoints_dir() const { return out_dir / "checkpoints"; }
  std::filesystem::path checkpoint(const std::string& component, std::uint32_t instance) const;
  std::filesystem::path logs_dir() const { return out_dir / "logs"; }
  std::filesystem::path train_log(const std::string& component, std::uint32_t instance) const;
  std::filesystem::path reports_dir() const { return out_dir / "reports"; }
};

// Deterministic per-scene seed and difficulty derivation; train and eval
// draw from disjoint named substreams of the master seed.
std::uint64_t scene_seed(std::uint64_t master_seed, std::string_view split, std::size_t index);
world::Difficulty scene_difficulty(std::size_t index, double hard_fraction);
world::ObservedScene canonical_obs(const world::Scene& scene);

struct SceneRecord {
  world::Scene scene;
  geom::Trajectory gt;                       // oracle pick from the training vocabulary
  std::vector<metrics::SubScores> labels;    // one entry per training-vocab candidate
};

struct Dataset {
  std::uint64_t dataset_hash = 0;
  vocab::Vocabulary v_xl, v_l;
  std::vector<SceneRecord> train;
  std::vector<world::Scene> eval_scenes;
};

// Build (or resume building) the vocabulary pair under the dataset dir.
void cmd_vocab_build(const config::ExperimentConfig& cfg);

// Scenes + oracle labels for every training-vocabulary candidate, written
// as JSON-lines shards plus a manifest carrying the dataset hash. Skips
// shards that already exist with the right row count.
void cmd_dataset_build(const config::ExperimentConfig& cfg);

// Load and validate against the config's dataset hash; throws on mismatch.
Dataset load_dataset(const config::ExperimentConfig& cfg);

// Train one component ("generator", "dense" or "aug"), resuming from its
// checkpoint when one with a matching training hash exists. Writes the
// checkpoint and a per-epoch JSON loss log.
void cmd_train(const config::ExperimentConfig& cfg, const std::string& component,
               std::uint32_t instance = 0);

struct LoadedScorer {
  scorer::ScorerModel model;
  nn::Adam opt;
  std::optional<nn::EmaShadow> ema;
  std::size_t epochs_done = 0;
  std::uint64_t config_hash = 0;
  std::uint64_t dataset_hash = 0;
  std::uint64_t train_hash = 0;
  std::string training_vocab;  // "xl" or "l"
  std::uint32_t instance = 0;
};

struct LoadedGenerator {
  dp::GeneratorModel model;
  dp::NoiseSchedule schedule;
  nn::Adam opt;
  std::size_t epochs_done = 0;
  std::uint64_t config_hash = 0;
  std::uint64_t dataset_hash = 0;
  std::uint64_t train_hash = 0;
  std::uint32_t instance = 0;
};

LoadedScorer load_scorer_checkpoint(const std::filesystem::path& path);
LoadedGenerator load_generator_checkpoint(const std::filesystem::path& path);

struct EvalRequest {
  std::vector<std::string> scorer_checkpoints;  // >= 1; > 1 means ensemble
  std::string generator_checkpoint;             // needed when selector uses dp
};

// Two-stage evaluation over the held-out scenes: plan on the clean and the
// perturbed observation, score each pick with the metric oracle, aggregate.
// Returns the report (also written under reports/ and printed as a table).
io::json cmd_eval(const config::ExperimentConfig& cfg, const EvalRequest& req);

// Collect every eval report under a directory tree into a roadmap table
// (CSV + aligned text), rows sorted by final score descending.
void cmd_report(const std::filesystem::path& dir);

}  // namespace gtrs::harness
