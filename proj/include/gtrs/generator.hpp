#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gtrs/geom.hpp"
#include "gtrs/nn.hpp"
#include "gtrs/rng.hpp"
#include "gtrs/vocab.hpp"
#include "gtrs/world.hpp"

namespace gtrs::dp {

inline constexpr int kDefaultSteps = 100;
inline constexpr double kDefaultBetaMin = 1e-4;
inline constexpr double kDefaultBetaMax = 0.02;
inline constexpr std::size_t kTimeEmbedDim = 16;

// Linear variance schedule for the forward noising process.
struct NoiseSchedule {
  int steps = 0;
  std::vector<double> betas;       // length steps, index t-1 holds beta_t
  std::vector<double> alphas;      // 1 - beta
  std::vector<double> alpha_bars;  // running products, strictly decreasing
};

NoiseSchedule make_schedule(int steps = kDefaultSteps, double beta_min = kDefaultBetaMin,
                            double beta_max = kDefaultBetaMax);

// x_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps, t in [1, steps]
std::vector<double> q_sample(const std::vector<double>& x0, int t,
                             const std::vector<double>& eps, const NoiseSchedule& sched);

// sin/cos embedding of the integer step index, geometric frequency ladder
std::vector<double> time_embedding(int t, std::size_t dim = kTimeEmbedDim);

// Epsilon-prediction denoiser: an MLP over the concatenation
// [flattened delta vector | time embedding | scene features]. Delta vectors
// are standardized by training-set statistics stored alongside the weights.
struct GeneratorModel {
  nn::ParamStore params;
  nn::Mlp denoiser;
  std::vector<double> delta_mean;  // per-dimension, length 3 * T_wp
  std::vector<double> delta_std;
  std::uint64_t init_seed = 0;
};

GeneratorModel make_generator(std::uint64_t seed, std::size_t hidden_width = 256,
                              std::size_t feature_dim = world::kFeatureDim);

// Per-dimension mean/std over the diff-normalized training trajectories;
// std is floored to keep standardization finite on degenerate dimensions.
void fit_normalizer(GeneratorModel& model, std::span<const geom::Trajectory> gt_trajs);

std::vector<double> flatten_deltas(const geom::DeltaSequence& seq);
geom::DeltaSequence unflatten_deltas(const std::vector<double>& flat, double dt);

std::vector<double> standardize(const GeneratorModel& model, const std::vector<double>& flat);
std::vector<double> unstandardize(const GeneratorModel& model, const std::vector<double>& flat);

// Predict the noise component of x_t given the step index and conditioning.
std::vector<double> predict_eps(const GeneratorModel& model, const std::vector<double>& x_t,
                                int t, const world::SceneFeatures& features,
                                nn::Mlp::Cache* cache = nullptr);

// Draw t and eps, noise the standardized delta vector, regress the noise.
// Returns the MSE; accumulates parameter gradients when `grads` is given.
// The rng draw layout is identical to train_step_generator's.
double generator_loss_and_grads(const GeneratorModel& model,
                                const world::SceneFeatures& features,
                                const geom::Trajectory& gt_traj, const NoiseSchedule& sched,
                                Rng& rng, nn::ParamStore* grads);

// One optimizer step on a single (scene, ground truth) pair: draw t and eps,
// noise the standardized delta vector, regress the noise. Returns the MSE.
double train_step_generator(GeneratorModel& model, nn::Adam& opt,
                            const world::SceneFeatures& features,
                            const geom::Trajectory& gt_traj, const NoiseSchedule& sched,
                            Rng& rng);

// n independent reverse-diffusion chains conditioned on the scene; chain i
// draws from rng.derive(i) so parallel order can never change the output.
vocab::Vocabulary sample_proposals(const GeneratorModel& model,
                                   const world::SceneFeatures& features, std::size_t n,
                                   const NoiseSchedule& sched, const Rng& rng);

}  // namespace gtrs::dp
