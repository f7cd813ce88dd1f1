#include "gtrs/vocab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "gtrs/kernels.hpp"

namespace gtrs::vocab {

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  return kernels::squared_distance(a.data(), b.data(), a.size());
}

}  // namespace

std::string_view tag_name(Tag tag) {
  switch (tag) {
    case Tag::kXl: return "xl";
    case Tag::kL: return "l";
    case Tag::kDp: return "dp";
    case Tag::kMerged: return "merged";
  }
  throw std::logic_error("tag_name: unknown tag");
}

Tag tag_from_name(std::string_view name) {
  if (name == "xl") return Tag::kXl;
  if (name == "l") return Tag::kL;
  if (name == "dp") return Tag::kDp;
  if (name == "merged") return Tag::kMerged;
  throw std::invalid_argument("tag_from_name: unknown tag '" + std::string(name) + "'");
}

KMeansResult kmeans_xy(const std::vector<std::vector<double>>& points, std::size_t k,
                       Rng rng, int max_iters, double tol) {
  const std::size_t n = points.size();
  if (k == 0) throw std::invalid_argument("kmeans_xy: k must be positive");
  if (k > n) throw std::invalid_argument("kmeans_xy: k exceeds point count");
  const std::size_t dim = points[0].size();

  KMeansResult res;
  res.centroids.reserve(k);

  // k-means++ seeding: first pick uniform, later picks proportional to the
  // squared distance from the nearest centroid chosen so far.
  std::vector<double> d2(n, std::numeric_limits<double>::max());
  res.centroids.push_back(points[rng.below(n)]);
  while (res.centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(points[i], res.centroids.back()));
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = rng.uniform01() * total;
      double acc = 0.0;
      pick = n - 1;  // guard against rounding past the end
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.below(n);
    }
    res.centroids.push_back(points[pick]);
  }

  res.assignment.assign(n, 0);
  double prev_inertia = std::numeric_limits<double>::max();
  for (int iter = 0; iter < max_iters; ++iter) {
    // assignment step (ties resolve to the lowest centroid index)
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::max();
      std::size_t best_c = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const double d = sq_dist(points[i], res.centroids[c]);
        if (d < best) {
          best = d;
          best_c = c;
        }
      }
      res.assignment[i] = best_c;
      inertia += best;
    }
    res.inertia = inertia;
    res.iterations = iter + 1;

    // update step
    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = res.assignment[i];
      kernels::axpy(1.0, points[i].data(), sums[c].data(), dim);
      ++counts[c];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // re-seed an empty cluster at the point currently worst served
        std::size_t far_i = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = sq_dist(points[i], res.centroids[res.assignment[i]]);
          if (d > far_d) {
            far_d = d;
            far_i = i;
          }
        }
        res.centroids[c] = points[far_i];
        res.assignment[far_i] = c;
        continue;
      }
      for (std::size_t j = 0; j < dim; ++j) {
        res.centroids[c][j] = sums[c][j] / static_cast<double>(counts[c]);
      }
    }

    if (prev_inertia < std::numeric_limits<double>::max()) {
      const double rel = (prev_inertia - inertia) / std::max(prev_inertia, 1e-12);
      if (std::abs(rel) < tol) break;
    }
    prev_inertia = inertia;
  }
  return res;
}

std::vector<geom::Trajectory> draw_samples(std::size_t n, std::uint64_t seed,
                                           const geom::ControlGrid& grid) {
  Rng root(seed);
  const Rng pool = root.derive("samples");
  std::vector<geom::Trajectory> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng r = pool.derive(static_cast<std::uint64_t>(i));
    out.push_back(geom::sample_kinematic(r, grid));
  }
  return out;
}

Vocabulary build_vocabulary(std::size_t n_samples, std::size_t k, std::uint64_t seed,
                            Tag tag, const geom::ControlGrid& grid) {
  if (k == 0) throw std::invalid_argument("build_vocabulary: k must be positive");
  if (k > n_samples) throw std::invalid_argument("build_vocabulary: k exceeds sample count");

  const auto samples = draw_samples(n_samples, seed, grid);
  std::vector<std::vector<double>> points;
  points.reserve(n_samples);
  for (const auto& t : samples) points.push_back(geom::flatten_xy(t));

  Rng root(seed);
  const KMeansResult km = kmeans_xy(points, k, root.derive("kmeans"));

  // Snap each centroid to the nearest sample not claimed by an earlier
  // centroid: entries stay feasible rollouts and can never collide.
  std::vector<bool> used(n_samples, false);
  Vocabulary v;
  v.tag = tag;
  v.seed = seed;
  v.trajectories.reserve(k);
  for (const auto& c : km.centroids) {
    std::size_t best_i = n_samples;
    double best_d = std::numeric_limits<double>::max();
    for (std::size_t i = 0; i < n_samples; ++i) {
      if (used[i]) continue;
      const double d = sq_dist(points[i], c);
      if (d < best_d) {
        best_d = d;
        best_i = i;
      }
    }
    used[best_i] = true;
    v.trajectories.push_back(samples[best_i]);
  }
  return v;
}

std::vector<std::size_t> dropout_indices(std::size_t n, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw std::invalid_argument("dropout_indices: rate must lie in [0, 1)");
  }
  const auto keep =
      static_cast<std::size_t>(std::ceil(static_cast<double>(n) * (1.0 - rate)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (keep == n) return idx;

  // partial Fisher-Yates picks `keep` indices uniformly without replacement
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());  // restore original relative order
  return idx;
}

Vocabulary dropout_vocab(const Vocabulary& v, double rate, Rng& rng) {
  const auto idx = dropout_indices(v.size(), rate, rng);
  if (idx.size() == v.size()) return v;
  Vocabulary out;
  out.tag = v.tag;
  out.seed = v.seed;
  out.trajectories.reserve(idx.size());
  for (const std::size_t i : idx) out.trajectories.push_back(v.trajectories[i]);
  return out;
}

Vocabulary merge(const Vocabulary& v_static, const Vocabulary& v_dp) {
  if (!v_static.trajectories.empty() && !v_dp.trajectories.empty()) {
    const auto& a = v_static.trajectories.front();
    const auto& b = v_dp.trajectories.front();
    if (a.dt != b.dt || a.waypoints.size() != b.waypoints.size()) {
      throw std::invalid_argument("merge: vocabularies disagree on step length or horizon");
    }
  }
  Vocabulary out;
  out.tag = Tag::kMerged;
  out.seed = v_static.seed;
  out.trajectories = v_static.trajectories;
  out.trajectories.insert(out.trajectories.end(), v_dp.trajectories.begin(),
                          v_dp.trajectories.end());
  return out;
}

}  // namespace gtrs::vocab
