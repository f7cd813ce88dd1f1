#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "gtrs/geom.hpp"
#include "gtrs/rng.hpp"

namespace gtrs::vocab {

// Where a candidate set came from: clustered super-dense (XL), clustered
// inference-size (L), dynamic diffusion proposals (DP), or a concatenation.
enum class Tag { kXl, kL, kDp, kMerged };

std::string_view tag_name(Tag tag);
Tag tag_from_name(std::string_view name);

struct Vocabulary {
  Tag tag = Tag::kMerged;
  std::uint64_t seed = 0;  // seed used to build it (0 for merged sets)
  std::vector<geom::Trajectory> trajectories;

  std::size_t size() const { return trajectories.size(); }
};

// Lloyd's algorithm output over flattened waypoint coordinates. Exposed so
// tests can probe convergence behaviour directly.
struct KMeansResult {
  std::vector<std::vector<double>> centroids;
  std::vector<std::size_t> assignment;  // point index -> centroid index
  double inertia = 0.0;                 // sum of squared distances
  int iterations = 0;
};

// k-means++ seeding followed by Lloyd iterations; stops after `max_iters`
// rounds or when inertia improves by less than `tol` relatively.
KMeansResult kmeans_xy(const std::vector<std::vector<double>>& points, std::size_t k,
                       Rng rng, int max_iters = 50, double tol = 1e-4);

// The sample pool clustering draws from; exposed so callers can recompute
// cluster statistics against the identical pool.
std::vector<geom::Trajectory> draw_samples(std::size_t n, std::uint64_t seed,
                                           const geom::ControlGrid& grid = {});

// Cluster n kinematically sampled trajectories into k representatives. Each
// centroid is snapped to the nearest not-yet-used sample so every vocabulary
// entry is a feasible rollout and no two entries coincide.
Vocabulary build_vocabulary(std::size_t n_samples, std::size_t k, std::uint64_t seed,
                            Tag tag, const geom::ControlGrid& grid = {});

// Indices of the ceil(n*(1-rate)) survivors of one dropout draw, sorted
// ascending. rate must lie in [0, 1). Exposed so training code can subset
// label arrays the same way the vocabulary itself is subset.
std::vector<std::size_t> dropout_indices(std::size_t n, double rate, Rng& rng);

// Keep ceil(|v|*(1-rate)) entries drawn uniformly without replacement,
// original order preserved. rate must lie in [0, 1).
Vocabulary dropout_vocab(const Vocabulary& v, double rate, Rng& rng);

// Concatenate: static entries first, dynamic proposals appended after.
// Duplicates are kept; scoring is per-candidate so they are harmless.
Vocabulary merge(const Vocabulary& v_static, const Vocabulary& v_dp);

}  // namespace gtrs::vocab
