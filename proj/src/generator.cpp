#include "gtrs/generator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gtrs::dp {

namespace {

constexpr std::size_t kDeltaDim = static_cast<std::size_t>(geom::kWaypointCount) * 3;
constexpr double kStdFloor = 1e-6;

}  // namespace

NoiseSchedule make_schedule(int steps, double beta_min, double beta_max) {
  if (steps < 1) throw std::invalid_argument("make_schedule: steps must be >= 1");
  if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0)) {
    throw std::invalid_argument("make_schedule: need 0 < beta_min <= beta_max < 1");
  }
  NoiseSchedule s;
  s.steps = steps;
  s.betas.resize(steps);
  s.alphas.resize(steps);
  s.alpha_bars.resize(steps);
  double bar = 1.0;
  for (int i = 0; i < steps; ++i) {
    const double f = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
    s.betas[i] = beta_min + f * (beta_max - beta_min);
    s.alphas[i] = 1.0 - s.betas[i];
    bar *= s.alphas[i];
    s.alpha_bars[i] = bar;
  }
  return s;
}

std::vector<double> q_sample(const std::vector<double>& x0, int t,
                             const std::vector<double>& eps, const NoiseSchedule& sched) {
  if (t < 1 || t > sched.steps) throw std::out_of_range("q_sample: t outside [1, steps]");
  if (x0.size() != eps.size()) throw std::invalid_argument("q_sample: x0/eps size mismatch");
  const double ab = sched.alpha_bars[t - 1];
  const double c0 = std::sqrt(ab);
  const double ce = std::sqrt(1.0 - ab);
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = c0 * x0[i] + ce * eps[i];
  return out;
}

std::vector<double> time_embedding(int t, std::size_t dim) {
  if (dim == 0 || dim % 2 != 0) {
    throw std::invalid_argument("time_embedding: dim must be positive and even");
  }
  std::vector<double> out(dim);
  const std::size_t half = dim / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double freq =
        std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    out[2 * i] = std::sin(t * freq);
    out[2 * i + 1] = std::cos(t * freq);
  }
  return out;
}

GeneratorModel make_generator(std::uint64_t seed, std::size_t hidden_width,
                              std::size_t feature_dim) {
  GeneratorModel m;
  m.init_seed = seed;
  m.denoiser.prefix = "denoiser";
  m.denoiser.arch = {kDeltaDim + kTimeEmbedDim + feature_dim, hidden_width, hidden_width,
                     kDeltaDim};
  m.denoiser.act = nn::Act::kTanh;
  m.denoiser.init(m.params, Rng(seed).derive("generator-init"));
  // Zero the output projection so the untrained model predicts zero noise;
  // the first optimizer step breaks the symmetry through the final layer.
  auto& last = m.params.at("denoiser.w" + std::to_string(m.denoiser.arch.size() - 2));
  std::fill(last.values.begin(), last.values.end(), 0.0);
  m.delta_mean.assign(kDeltaDim, 0.0);
  m.delta_std.assign(kDeltaDim, 1.0);
  return m;
}

void fit_normalizer(GeneratorModel& model, std::span<const geom::Trajectory> gt_trajs) {
  if (gt_trajs.empty()) throw std::invalid_argument("fit_normalizer: empty training set");
  std::vector<double> mean(kDeltaDim, 0.0), sq(kDeltaDim, 0.0);
  for (const auto& traj : gt_trajs) {
    const auto flat = flatten_deltas(geom::diff_normalize(traj));
    for (std::size_t i = 0; i < kDeltaDim; ++i) {
      mean[i] += flat[i];
      sq[i] += flat[i] * flat[i];
    }
  }
  const double n = static_cast<double>(gt_trajs.size());
  model.delta_mean.resize(kDeltaDim);
  model.delta_std.resize(kDeltaDim);
  for (std::size_t i = 0; i < kDeltaDim; ++i) {
    model.delta_mean[i] = mean[i] / n;
    const double var = std::max(0.0, sq[i] / n - model.delta_mean[i] * model.delta_mean[i]);
    model.delta_std[i] = std::max(std::sqrt(var), kStdFloor);
  }
}

std::vector<double> flatten_deltas(const geom::DeltaSequence& seq) {
  std::vector<double> out;
  out.reserve(seq.deltas.size() * 3);
  for (const auto& d : seq.deltas) {
    out.push_back(d.dx);
    out.push_back(d.dy);
    out.push_back(d.dheading);
  }
  return out;
}

geom::DeltaSequence unflatten_deltas(const std::vector<double>& flat, double dt) {
  if (flat.size() % 3 != 0) {
    throw std::invalid_argument("unflatten_deltas: length must be a multiple of 3");
  }
  geom::DeltaSequence seq;
  seq.dt = dt;
  seq.deltas.resize(flat.size() / 3);
  for (std::size_t i = 0; i < seq.deltas.size(); ++i) {
    seq.deltas[i] = {flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]};
  }
  return seq;
}

std::vector<double> standardize(const GeneratorModel& model, const std::vector<double>& flat) {
  if (flat.size() != model.delta_mean.size()) {
    throw std::invalid_argument("standardize: dimension mismatch");
  }
  std::vector<double> out(flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    out[i] = (flat[i] - model.delta_mean[i]) / model.delta_std[i];
  }
  return out;
}

std::vector<double> unstandardize(const GeneratorModel& model,
                                  const std::vector<double>& flat) {
  if (flat.size() != model.delta_mean.size()) {
    throw std::invalid_argument("unstandardize: dimension mismatch");
  }
  std::vector<double> out(flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    out[i] = flat[i] * model.delta_std[i] + model.delta_mean[i];
  }
  return out;
}

std::vector<double> predict_eps(const GeneratorModel& model, const std::vector<double>& x_t,
                                int t, const world::SceneFeatures& features,
                                nn::Mlp::Cache* cache) {
  if (x_t.size() != kDeltaDim) throw std::invalid_argument("predict_eps: bad state size");
  std::vector<double> input;
  input.reserve(model.denoiser.arch.front());
  input.insert(input.end(), x_t.begin(), x_t.end());
  const auto temb = time_embedding(t);
  input.insert(input.end(), temb.begin(), temb.end());
  input.insert(input.end(), features.values.begin(), features.values.end());
  return model.denoiser.forward(model.params, input, cache);
}

double generator_loss_and_grads(const GeneratorModel& model,
                                const world::SceneFeatures& features,
                                const geom::Trajectory& gt_traj, const NoiseSchedule& sched,
                                Rng& rng, nn::ParamStore* grads) {
  const auto x0 = standardize(model, flatten_deltas(geom::diff_normalize(gt_traj)));
  const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(sched.steps)));
  std::vector<double> eps(kDeltaDim);
  for (double& e : eps) e = rng.normal();
  const auto x_t = q_sample(x0, t, eps, sched);

  nn::Mlp::Cache cache;
  const auto eps_hat = predict_eps(model, x_t, t, features, &cache);

  double loss = 0.0;
  std::vector<double> dout(kDeltaDim);
  for (std::size_t i = 0; i < kDeltaDim; ++i) {
    const double r = eps_hat[i] - eps[i];
    loss += r * r;
    dout[i] = 2.0 * r / static_cast<double>(kDeltaDim);
  }
  loss /= static_cast<double>(kDeltaDim);
  if (!std::isfinite(loss)) {
    throw std::runtime_error("generator_loss_and_grads: non-finite loss");
  }
  if (grads != nullptr) {
    model.denoiser.backward(model.params, cache, dout, *grads);
  }
  return loss;
}

double train_step_generator(GeneratorModel& model, nn::Adam& opt,
                            const world::SceneFeatures& features,
                            const geom::Trajectory& gt_traj, const NoiseSchedule& sched,
                            Rng& rng) {
  nn::ParamStore grads = model.params.zeros_like();
  const double loss = generator_loss_and_grads(model, features, gt_traj, sched, rng, &grads);
  opt.step(model.params, grads);
  return loss;
}

vocab::Vocabulary sample_proposals(const GeneratorModel& model,
                                   const world::SceneFeatures& features, std::size_t n,
                                   const NoiseSchedule& sched, const Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample_proposals: n must be >= 1");
  vocab::Vocabulary out;
  out.tag = vocab::Tag::kDp;
  out.seed = rng.key();
  out.trajectories.reserve(n);

  for (std::size_t chain = 0; chain < n; ++chain) {
    Rng r = rng.derive(static_cast<std::uint64_t>(chain));
    std::vector<double> x(kDeltaDim);
    for (double& v : x) v = r.normal();

    for (int t = sched.steps; t >= 1; --t) {
      const auto eps_hat = predict_eps(model, x, t, features);
      const double beta = sched.betas[t - 1];
      const double alpha = sched.alphas[t - 1];
      const double ab = sched.alpha_bars[t - 1];
      const double coef = beta / std::sqrt(1.0 - ab);
      const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
      const double sigma = std::sqrt(beta);
      for (std::size_t i = 0; i < kDeltaDim; ++i) {
        double mean = inv_sqrt_alpha * (x[i] - coef * eps_hat[i]);
        x[i] = (t > 1) ? mean + sigma * r.normal() : mean;
        if (!std::isfinite(x[i])) {
          throw std::runtime_error("sample_proposals: non-finite state in chain " +
                                   std::to_string(chain) + " at step " + std::to_string(t));
        }
      }
    }

    const auto flat = unstandardize(model, x);
    out.trajectories.push_back(geom::integrate_deltas(unflatten_deltas(flat, geom::kStepSeconds)));
  }
  return out;
}

}  // namespace gtrs::dp
