#pragma once

#include <array>
#include <cstdint>
#include <numbers>
#include <span>
#include <string_view>
#include <vector>

#include "gtrs/generator.hpp"
#include "gtrs/geom.hpp"
#include "gtrs/metrics.hpp"
#include "gtrs/nn.hpp"
#include "gtrs/rng.hpp"
#include "gtrs/vocab.hpp"
#include "gtrs/world.hpp"

namespace gtrs::scorer {

inline constexpr std::size_t kTokenWidth = 64;
inline constexpr std::size_t kContextTokens = 8;
inline constexpr double kLambdaImitation = 0.1;
inline constexpr double kSigmaImitation = 1.0;  // metres, imitation softmax scale
inline constexpr double kRefineDelta = 0.15;
inline constexpr std::size_t kTopK = 32;
inline constexpr double kEmaDecay = 0.999;

enum class Variant { kDense, kAug };

std::string_view variant_name(Variant v);
Variant variant_from_name(std::string_view name);

// Candidate scorer: a delta-vector tokenizer, a scene projector emitting a
// fixed set of context tokens, two cross-attention blocks where candidate
// tokens attend only to the scene context (never to each other), logistic
// per-metric heads and a scalar imitation head. The aug variant adds a
// training-only refinement block + head over the top-k candidates.
struct ScorerModel {
  Variant variant = Variant::kDense;
  std::uint64_t init_seed = 0;
  std::size_t feature_dim = world::kFeatureDim;

  nn::ParamStore params;
  nn::Mlp tokenizer;    // flattened deltas -> width-64 token
  nn::Mlp projector;    // features -> kContextTokens * width values
  nn::CrossAttention block0, block1;
  nn::Mlp metric_head;  // token -> 9 metric logits
  nn::Mlp imit_head;    // token -> 1 imitation logit
  nn::CrossAttention refine_block;  // aug only
  nn::Mlp refine_head;              // aug only

  bool has_refinement() const { return variant == Variant::kAug; }
};

ScorerModel make_scorer(Variant variant, std::uint64_t seed,
                        std::size_t feature_dim = world::kFeatureDim);

struct ScoredCandidate {
  metrics::SubScores pred;       // logistic metric predictions, each in (0,1)
  double imitation_logit = 0.0;
  double selection = 0.0;
};

struct ScoredCandidates {
  std::vector<ScoredCandidate> items;

  std::size_t size() const { return items.size(); }
};

// Product of the predicted gates times the weighted soft average — the
// metric part of the selection score, before the imitation term.
double predicted_quality(const metrics::SubScores& p);

// Everything a training step needs from one forward pass. `params` is
// passed separately so the same routine can run an EMA teacher's weights.
struct Activations {
  nn::Matrix context;  // kContextTokens x width
  nn::Mlp::Cache proj_cache;
  nn::Matrix tokens_in, tokens_mid, tokens_out;
  std::vector<nn::Mlp::Cache> tok_caches;
  nn::CrossAttention::Cache blk0_cache, blk1_cache;
  std::vector<std::array<double, metrics::kMetricCount>> metric_logits;
  std::vector<double> imit_logits;
  std::vector<nn::Mlp::Cache> metric_caches, imit_caches;
};

Activations base_forward(const ScorerModel& model, const nn::ParamStore& params,
                         const world::SceneFeatures& features,
                         std::span<const geom::Trajectory> candidates, bool want_caches);

// Selection score = predicted_quality + lambda * softmax(imitation logits).
// The softmax couples candidates only through this normalization; the raw
// per-metric predictions stay strictly per-candidate.
ScoredCandidates score_candidates(const ScorerModel& model,
                                  const world::SceneFeatures& features,
                                  const vocab::Vocabulary& v,
                                  double lambda_imitation = kLambdaImitation);

// Pull a prediction toward the teacher by at most delta, never leaving [0,1].
double refine_target(double gt, double teacher, double delta);
std::array<double, metrics::kMetricCount> refine_targets(
    const std::array<double, metrics::kMetricCount>& gt,
    const std::array<double, metrics::kMetricCount>& teacher, double delta);

// Argmax of selection score; ties resolve to the lowest index.
std::size_t select_trajectory(const ScoredCandidates& scored);

// Arithmetic mean per candidate across models (selection, metrics, logits).
ScoredCandidates ensemble_scores(std::span<const ScoredCandidates> per_model);

struct TrainOptions {
  double dropout_rate = 0.5;       // vocabulary dropout per batch
  double lambda_imitation = kLambdaImitation;
  double sigma_imitation = kSigmaImitation;
  double rotation_range = std::numbers::pi / 12.0;  // aug view rotation bound
  std::size_t k_topk = kTopK;      // refinement breadth; 0 disables it
  double refine_delta = kRefineDelta;
  double refine_weight = 1.0;      // refinement loss weight in the total
  double ema_decay = kEmaDecay;
  bool refine_into_trunk = true;   // let refinement gradients reach the trunk
};

struct BatchStats {
  double loss = 0.0;         // base + weight * refine
  double base_loss = 0.0;
  double refine_loss = 0.0;
  std::size_t survivors = 0;
};

// Loss (and, when `grads_out` is non-null, parameter gradients) for one
// scene. The survivor subset is drawn from rng's "dropout" substream, so
// two calls with the same rng see the same subset. Pure in the model.
BatchStats scorer_loss_and_grads(const ScorerModel& model, const nn::EmaShadow* teacher,
                                 const world::SceneFeatures& features,
                                 std::span<const geom::Trajectory> candidates,
                                 std::span<const metrics::SubScores> labels,
                                 const geom::Trajectory& gt_traj, const TrainOptions& opts,
                                 const Rng& rng, nn::ParamStore* grads_out);

// One optimizer step on one scene. `candidates`, `labels` and `gt_traj`
// align with the full training vocabulary; the survivor subset is drawn
// here from rng's "dropout" substream. For the aug variant the caller
// passes consistently rotated features/candidates/gt and an EMA teacher.
BatchStats scorer_train_step(ScorerModel& model, nn::Adam& opt, nn::EmaShadow* teacher,
                             const world::SceneFeatures& features,
                             std::span<const geom::Trajectory> candidates,
                             std::span<const metrics::SubScores> labels,
                             const geom::Trajectory& gt_traj, const TrainOptions& opts,
                             const Rng& rng);

struct InferenceResult {
  std::size_t index = 0;           // winner within the merged candidate list
  geom::Trajectory trajectory;
  ScoredCandidates scored;         // ensembled scores over the merged list
  std::size_t n_static = 0;        // merged layout: [0, n_static) static
  vocab::Vocabulary merged;        // the full candidate list that was scored
};

// Full planning step: encode the observation, optionally sample dynamic
// proposals, merge, score with every model, ensemble, select.
InferenceResult run_inference(std::span<const ScorerModel> models,
                              const world::ObservedScene& obs,
                              const vocab::Vocabulary& v_static,
                              const dp::GeneratorModel* generator,
                              const dp::NoiseSchedule* schedule, std::size_t n_dp,
                              const Rng& rng,
                              double lambda_imitation = kLambdaImitation);

}  // namespace gtrs::scorer
