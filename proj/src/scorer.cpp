#include "gtrs/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "gtrs/kernels.hpp"

namespace gtrs::scorer {

namespace {

constexpr std::size_t kDeltaDim = static_cast<std::size_t>(geom::kWaypointCount) * 3;
constexpr std::size_t kM = metrics::kMetricCount;

std::array<double, kM> sigmoid_all(const std::array<double, kM>& logits) {
  std::array<double, kM> out;
  for (std::size_t m = 0; m < kM; ++m) out[m] = nn::sigmoid(logits[m]);
  return out;
}

}  // namespace

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kDense: return "dense";
    case Variant::kAug: return "aug";
  }
  throw std::logic_error("variant_name: unknown variant");
}

Variant variant_from_name(std::string_view name) {
  if (name == "dense") return Variant::kDense;
  if (name == "aug") return Variant::kAug;
  throw std::invalid_argument("variant_from_name: unknown variant '" + std::string(name) + "'");
}

ScorerModel make_scorer(Variant variant, std::uint64_t seed, std::size_t feature_dim) {
  ScorerModel m;
  m.variant = variant;
  m.init_seed = seed;
  m.feature_dim = feature_dim;
  m.tokenizer = nn::Mlp{"tokenizer", {kDeltaDim, kTokenWidth, kTokenWidth}, nn::Act::kTanh};
  m.projector = nn::Mlp{
      "projector", {feature_dim, 256, kContextTokens * kTokenWidth}, nn::Act::kTanh};
  m.block0 = nn::CrossAttention{"block0", kTokenWidth, kTokenWidth};
  m.block1 = nn::CrossAttention{"block1", kTokenWidth, kTokenWidth};
  m.metric_head = nn::Mlp{"metric_head", {kTokenWidth, kM}, nn::Act::kTanh};
  m.imit_head = nn::Mlp{"imit_head", {kTokenWidth, 1}, nn::Act::kTanh};
  m.refine_block = nn::CrossAttention{"refine_block", kTokenWidth, kTokenWidth};
  m.refine_head = nn::Mlp{"refine_head", {kTokenWidth, kM}, nn::Act::kTanh};

  const Rng init = Rng(seed).derive("scorer-init");
  m.tokenizer.init(m.params, init);
  m.projector.init(m.params, init);
  m.block0.init(m.params, init);
  m.block1.init(m.params, init);
  m.metric_head.init(m.params, init);
  m.imit_head.init(m.params, init);
  if (m.has_refinement()) {
    m.refine_block.init(m.params, init);
    m.refine_head.init(m.params, init);
  }
  return m;
}

double predicted_quality(const metrics::SubScores& p) {
  const double gates = p.nc * p.dac * p.ddc * p.tlc;
  const double soft = (5.0 * p.ep + 5.0 * p.ttc + 2.0 * p.lk + 2.0 * p.hc + 2.0 * p.ec) / 16.0;
  return gates * soft;
}

Activations base_forward(const ScorerModel& model, const nn::ParamStore& params,
                         const world::SceneFeatures& features,
                         std::span<const geom::Trajectory> candidates, bool want_caches) {
  if (features.values.size() != model.feature_dim) {
    throw std::invalid_argument("base_forward: feature dimension mismatch");
  }
  Activations acts;
  const std::size_t n = candidates.size();

  const nn::Vec proj = model.projector.forward(params, features.values,
                                               want_caches ? &acts.proj_cache : nullptr);
  acts.context = nn::Matrix(kContextTokens, kTokenWidth);
  std::copy(proj.begin(), proj.end(), acts.context.data.begin());

  acts.tokens_in = nn::Matrix(n, kTokenWidth);
  if (want_caches) acts.tok_caches.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto flat = dp::flatten_deltas(geom::diff_normalize(candidates[i]));
    const nn::Vec tok = model.tokenizer.forward(params, flat,
                                                want_caches ? &acts.tok_caches[i] : nullptr);
    std::copy(tok.begin(), tok.end(), acts.tokens_in.row(i));
  }

  acts.tokens_mid = model.block0.forward(params, acts.tokens_in, acts.context,
                                         want_caches ? &acts.blk0_cache : nullptr);
  acts.tokens_out = model.block1.forward(params, acts.tokens_mid, acts.context,
                                         want_caches ? &acts.blk1_cache : nullptr);

  acts.metric_logits.resize(n);
  acts.imit_logits.resize(n);
  if (want_caches) {
    acts.metric_caches.resize(n);
    acts.imit_caches.resize(n);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const nn::Vec tok(acts.tokens_out.row(i), acts.tokens_out.row(i) + kTokenWidth);
    const nn::Vec ml = model.metric_head.forward(params, tok,
                                                 want_caches ? &acts.metric_caches[i] : nullptr);
    std::copy(ml.begin(), ml.end(), acts.metric_logits[i].begin());
    const nn::Vec il = model.imit_head.forward(params, tok,
                                               want_caches ? &acts.imit_caches[i] : nullptr);
    acts.imit_logits[i] = il[0];
  }
  return acts;
}

ScoredCandidates score_candidates(const ScorerModel& model,
                                  const world::SceneFeatures& features,
                                  const vocab::Vocabulary& v, double lambda_imitation) {
  ScoredCandidates out;
  if (v.trajectories.empty()) return out;
  const Activations acts =
      base_forward(model, model.params, features, v.trajectories, false);
  const nn::Vec imit_probs = nn::softmax(acts.imit_logits);
  out.items.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    ScoredCandidate& c = out.items[i];
    c.pred = metrics::SubScores::from_array(sigmoid_all(acts.metric_logits[i]));
    c.imitation_logit = acts.imit_logits[i];
    c.selection = predicted_quality(c.pred) + lambda_imitation * imit_probs[i];
  }
  return out;
}

double refine_target(double gt, double teacher, double delta) {
  if (delta < 0.0) throw std::invalid_argument("refine_target: delta must be >= 0");
  const double corrected = gt + std::clamp(teacher - gt, -delta, delta);
  return std::clamp(corrected, 0.0, 1.0);
}

std::array<double, metrics::kMetricCount> refine_targets(
    const std::array<double, metrics::kMetricCount>& gt,
    const std::array<double, metrics::kMetricCount>& teacher, double delta) {
  std::array<double, metrics::kMetricCount> out;
  for (std::size_t m = 0; m < metrics::kMetricCount; ++m) {
    out[m] = refine_target(gt[m], teacher[m], delta);
  }
  return out;
}

std::size_t select_trajectory(const ScoredCandidates& scored) {
  if (scored.items.empty()) throw std::invalid_argument("select_trajectory: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scored.items.size(); ++i) {
    if (scored.items[i].selection > scored.items[best].selection) best = i;
  }
  return best;
}

ScoredCandidates ensemble_scores(std::span<const ScoredCandidates> per_model) {
  if (per_model.empty()) throw std::invalid_argument("ensemble_scores: no inputs");
  const std::size_t n = per_model.front().size();
  for (const auto& sc : per_model) {
    if (sc.size() != n) throw std::invalid_argument("ensemble_scores: misaligned lengths");
  }
  ScoredCandidates out;
  out.items.resize(n);
  const double inv = 1.0 / static_cast<double>(per_model.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, kM> acc{};
    double imit = 0.0, sel = 0.0;
    for (const auto& sc : per_model) {
      const auto arr = sc.items[i].pred.as_array();
      for (std::size_t m = 0; m < kM; ++m) acc[m] += arr[m];
      imit += sc.items[i].imitation_logit;
      sel += sc.items[i].selection;
    }
    for (std::size_t m = 0; m < kM; ++m) acc[m] *= inv;
    out.items[i].pred = metrics::SubScores::from_array(acc);
    out.items[i].imitation_logit = imit * inv;
    out.items[i].selection = sel * inv;
  }
  return out;
}

BatchStats scorer_loss_and_grads(const ScorerModel& model, const nn::EmaShadow* teacher,
                                 const world::SceneFeatures& features,
                                 std::span<const geom::Trajectory> candidates,
                                 std::span<const metrics::SubScores> labels,
                                 const geom::Trajectory& gt_traj, const TrainOptions& opts,
                                 const Rng& rng, nn::ParamStore* grads_out) {
  const std::size_t n = candidates.size();
  if (n == 0) throw std::invalid_argument("scorer_loss_and_grads: empty training vocabulary");
  if (labels.size() != n) {
    throw std::invalid_argument("scorer_loss_and_grads: label/candidate count mismatch");
  }

  Rng drop_rng = rng.derive("dropout");
  const auto survivors = vocab::dropout_indices(n, opts.dropout_rate, drop_rng);
  const std::size_t ns = survivors.size();

  std::vector<geom::Trajectory> surv_trajs;
  std::vector<std::array<double, kM>> surv_labels;
  surv_trajs.reserve(ns);
  surv_labels.reserve(ns);
  for (const std::size_t i : survivors) {
    surv_trajs.push_back(candidates[i]);
    surv_labels.push_back(labels[i].as_array());
  }

  Activations acts = base_forward(model, model.params, features, surv_trajs, true);

  BatchStats stats;
  stats.survivors = ns;

  // Per-metric BCE: mean over candidates, summed over the nine heads.
  const double inv_ns = 1.0 / static_cast<double>(ns);
  std::vector<std::array<double, kM>> dmetric(ns);
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t m = 0; m < kM; ++m) {
      const double logit = acts.metric_logits[i][m];
      const double y = surv_labels[i][m];
      stats.base_loss += nn::bce_with_logits(logit, y) * inv_ns;
      dmetric[i][m] = (nn::sigmoid(logit) - y) * inv_ns;
    }
  }

  // Imitation: cross-entropy against distance-softmax soft targets,
  // renormalized over the surviving candidates.
  nn::Vec neg_dist(ns);
  for (std::size_t i = 0; i < ns; ++i) {
    neg_dist[i] = -geom::traj_distance(surv_trajs[i], gt_traj) / opts.sigma_imitation;
  }
  const nn::Vec soft_targets = nn::softmax(neg_dist);
  const nn::Vec imit_probs = nn::softmax(acts.imit_logits);
  nn::Vec dimit(ns);
  for (std::size_t i = 0; i < ns; ++i) {
    stats.base_loss -= soft_targets[i] * std::log(imit_probs[i]);
    dimit[i] = imit_probs[i] - soft_targets[i];
  }

  nn::Matrix dtokens_out(ns, kTokenWidth);
  if (grads_out != nullptr) {
    nn::ParamStore& grads = *grads_out;
    for (std::size_t i = 0; i < ns; ++i) {
      const nn::Vec dml(dmetric[i].begin(), dmetric[i].end());
      const nn::Vec dtok_m =
          model.metric_head.backward(model.params, acts.metric_caches[i], dml, grads);
      const nn::Vec dtok_i =
          model.imit_head.backward(model.params, acts.imit_caches[i], {dimit[i]}, grads);
      for (std::size_t c = 0; c < kTokenWidth; ++c) {
        dtokens_out.at(i, c) = dtok_m[c] + dtok_i[c];
      }
    }
  }

  nn::Matrix dcontext_extra;  // refinement's gradient into the context tokens
  const bool refine_active =
      model.has_refinement() && teacher != nullptr && opts.k_topk > 0;
  if (refine_active) {
    // rank survivors by current selection score, best first
    std::vector<std::size_t> order(ns);
    std::iota(order.begin(), order.end(), std::size_t{0});
    nn::Vec sel(ns);
    for (std::size_t i = 0; i < ns; ++i) {
      const auto pred = metrics::SubScores::from_array(sigmoid_all(acts.metric_logits[i]));
      sel[i] = predicted_quality(pred) + opts.lambda_imitation * imit_probs[i];
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (sel[a] != sel[b]) return sel[a] > sel[b];
      return a < b;
    });
    const std::size_t k = std::min(opts.k_topk, ns);
    order.resize(k);

    nn::Matrix topk_tokens(k, kTokenWidth);
    std::vector<geom::Trajectory> topk_trajs;
    topk_trajs.reserve(k);
    for (std::size_t r = 0; r < k; ++r) {
      std::copy(acts.tokens_out.row(order[r]), acts.tokens_out.row(order[r]) + kTokenWidth,
                topk_tokens.row(r));
      topk_trajs.push_back(surv_trajs[order[r]]);
    }

    nn::CrossAttention::Cache rcache;
    const nn::Matrix refined =
        model.refine_block.forward(model.params, topk_tokens, acts.context, &rcache);

    const Activations teacher_acts =
        base_forward(model, teacher->shadow(), features, topk_trajs, false);

    const double inv_k = 1.0 / static_cast<double>(k);
    nn::Matrix drefined(k, kTokenWidth);
    std::vector<nn::Mlp::Cache> rhead_caches(k);
    std::vector<nn::Vec> drhead(k, nn::Vec(kM));
    for (std::size_t r = 0; r < k; ++r) {
      const nn::Vec tok(refined.row(r), refined.row(r) + kTokenWidth);
      const nn::Vec rlogits =
          model.refine_head.forward(model.params, tok, &rhead_caches[r]);
      const auto target = refine_targets(
          surv_labels[order[r]], sigmoid_all(teacher_acts.metric_logits[r]),
          opts.refine_delta);
      for (std::size_t m = 0; m < kM; ++m) {
        stats.refine_loss += nn::bce_with_logits(rlogits[m], target[m]) * inv_k;
        drhead[r][m] = opts.refine_weight * (nn::sigmoid(rlogits[m]) - target[m]) * inv_k;
      }
    }
    if (grads_out != nullptr) {
      nn::ParamStore& grads = *grads_out;
      for (std::size_t r = 0; r < k; ++r) {
        const nn::Vec dtok =
            model.refine_head.backward(model.params, rhead_caches[r], drhead[r], grads);
        std::copy(dtok.begin(), dtok.end(), drefined.row(r));
      }
      const auto rgrads = model.refine_block.backward(model.params, rcache, drefined, grads);
      if (opts.refine_into_trunk) {
        for (std::size_t r = 0; r < k; ++r) {
          kernels::axpy(1.0, rgrads.dqueries.row(r), dtokens_out.row(order[r]), kTokenWidth);
        }
        dcontext_extra = rgrads.dcontext;
      }
    }
  }

  if (grads_out != nullptr) {
    nn::ParamStore& grads = *grads_out;
    const auto ig1 = model.block1.backward(model.params, acts.blk1_cache, dtokens_out, grads);
    const auto ig0 = model.block0.backward(model.params, acts.blk0_cache, ig1.dqueries, grads);
    for (std::size_t i = 0; i < ns; ++i) {
      const nn::Vec dtok(ig0.dqueries.row(i), ig0.dqueries.row(i) + kTokenWidth);
      model.tokenizer.backward(model.params, acts.tok_caches[i], dtok, grads);
    }

    nn::Vec dcontext_flat(kContextTokens * kTokenWidth, 0.0);
    for (std::size_t j = 0; j < kContextTokens; ++j) {
      for (std::size_t c = 0; c < kTokenWidth; ++c) {
        double g = ig0.dcontext.at(j, c) + ig1.dcontext.at(j, c);
        if (dcontext_extra.rows != 0) g += dcontext_extra.at(j, c);
        dcontext_flat[j * kTokenWidth + c] = g;
      }
    }
    model.projector.backward(model.params, acts.proj_cache, dcontext_flat, grads);
  }

  stats.loss = stats.base_loss + opts.refine_weight * stats.refine_loss;
  return stats;
}

BatchStats scorer_train_step(ScorerModel& model, nn::Adam& opt, nn::EmaShadow* teacher,
                             const world::SceneFeatures& features,
                             std::span<const geom::Trajectory> candidates,
                             std::span<const metrics::SubScores> labels,
                             const geom::Trajectory& gt_traj, const TrainOptions& opts,
                             const Rng& rng) {
  nn::ParamStore grads = model.params.zeros_like();
  const BatchStats stats = scorer_loss_and_grads(model, teacher, features, candidates,
                                                 labels, gt_traj, opts, rng, &grads);
  opt.step(model.params, grads);
  if (teacher != nullptr) teacher->update(model.params);
  return stats;
}

InferenceResult run_inference(std::span<const ScorerModel> models,
                              const world::ObservedScene& obs,
                              const vocab::Vocabulary& v_static,
                              const dp::GeneratorModel* generator,
                              const dp::NoiseSchedule* schedule, std::size_t n_dp,
                              const Rng& rng, double lambda_imitation) {
  if (models.empty()) throw std::invalid_argument("run_inference: no models");
  const world::SceneFeatures features = world::encode_scene(obs);

  vocab::Vocabulary merged;
  if (n_dp > 0) {
    if (generator == nullptr || schedule == nullptr) {
      throw std::invalid_argument("run_inference: dynamic proposals need a generator");
    }
    const vocab::Vocabulary v_dp =
        dp::sample_proposals(*generator, features, n_dp, *schedule, rng.derive("proposals"));
    merged = vocab::merge(v_static, v_dp);
  } else {
    merged = v_static;
  }

  std::vector<ScoredCandidates> per_model;
  per_model.reserve(models.size());
  for (const ScorerModel& m : models) {
    per_model.push_back(score_candidates(m, features, merged, lambda_imitation));
  }
  InferenceResult res;
  res.scored = ensemble_scores(per_model);
  res.index = select_trajectory(res.scored);
  res.trajectory = merged.trajectories[res.index];
  res.n_static = v_static.size();
  res.merged = std::move(merged);
  return res;
}

}  // namespace gtrs::scorer
