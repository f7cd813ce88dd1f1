#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gtrs/geom.hpp"

namespace gtrs::world {

inline constexpr int kFeatureDim = 128;  // D_feat, constant across the system

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct Agent {
  Vec2 position0;
  Vec2 velocity;       // constant over the scene
  double radius = 0.5; // in [0.3, 2.0]
};

enum class LightState { kGreen, kRed };

struct StopLine {
  double arc_position = 0.0;  // along the centerline, meters
  LightState state = LightState::kGreen;
};

enum class Difficulty { kEasy, kHard };

struct Scene {
  std::uint64_t seed = 0;
  Difficulty difficulty = Difficulty::kEasy;
  std::vector<Vec2> centerline;  // starts at the origin, initial tangent +x
  double lane_half_width = 2.0;
  std::vector<Agent> agents;
  std::optional<StopLine> stop_line;
  double ego_speed = 0.0;
  // Progress of the rule-based oracle driver; 0 until the labeling pass
  // fills it in (see generate_scene overload taking reference candidates).
  double reference_progress = 0.0;
};

// A possibly rotated/degraded observation of a scene. The ground truth
// inside stays untouched: metrics always run against `base`, only the
// encoded observation is perturbed.
struct ObservedScene {
  Scene base;
  double rotation = 0.0;      // in [-pi/6, pi/6]
  double noise_sigma = 0.0;   // meters of positional jitter
  double dropout_frac = 0.0;  // fraction of feature cells zeroed, [0, 1)
  std::uint64_t seed = 0;     // drives jitter and dropout draws
};

struct SceneFeatures {
  std::vector<double> values;  // always kFeatureDim entries
};

// Arc-length parameterized polyline with projection; shared by the metric
// sweeps and the feature encoder.
class Polyline {
 public:
  explicit Polyline(std::span<const Vec2> points);

  double length() const { return cum_.back(); }
  Vec2 point_at(double s) const;
  double tangent_at(double s) const;  // heading of the local tangent

  struct Projection {
    double s = 0.0;     // arc length of the closest point
    double dist = 0.0;  // unsigned lateral distance
  };
  Projection project(const Vec2& p) const;

 private:
  std::vector<Vec2> pts_;
  std::vector<double> cum_;
};

// Deterministic in (seed, difficulty); geometry only, reference_progress
// left at 0.
Scene generate_scene(std::uint64_t seed, Difficulty difficulty);

// Same, then fills reference_progress with the oracle driver's progress
// over the given candidate set.
Scene generate_scene(std::uint64_t seed, Difficulty difficulty,
                     std::span<const geom::Trajectory> reference_candidates);

Vec2 agent_position(const Agent& a, double t);

// Rigid rotation of the whole scene about the ego origin (centerline,
// agent positions and velocities). Stop line is arc-length based and
// unaffected.
Scene rotate_scene(const Scene& s, double angle);

// Records the perturbation; throws if the parameters leave the
// ObservedScene invariants.
ObservedScene perturb_scene(const Scene& s, double rotation, double noise_sigma,
                            double dropout_frac, std::uint64_t seed);

// Feature layout inside the kFeatureDim vector; exposed for tests and
// debugging dumps.
struct FeatureLayout {
  static constexpr int kGridRings = 8;
  static constexpr int kGridSectors = 8;
  static constexpr double kGridRingMeters = 5.0;  // rings cover 40 m
  static constexpr int kGridOffset = 0;
  static constexpr int kGridSize = kGridRings * kGridSectors;  // 64
  static constexpr int kCenterlineSamples = 8;
  static constexpr int kTangentOffset = kGridOffset + kGridSize;          // 64
  static constexpr int kCurvatureOffset = kTangentOffset + kCenterlineSamples;  // 72
  static constexpr int kEgoSpeedOffset = kCurvatureOffset + kCenterlineSamples; // 80
  static constexpr int kStopDistanceOffset = kEgoSpeedOffset + 1;         // 81
  static constexpr int kLightOffset = kStopDistanceOffset + 1;            // 82..83
  static constexpr int kUsedDims = kLightOffset + 2;                      // 84, rest padding
};

// Deterministic featurization of the observation: rotate the observed
// geometry, jitter points with seeded Gaussian noise, rasterize agents
// (current and one-second-ahead positions) into a radial grid, sample
// centerline tangents/curvatures, append ego speed and stop-line state,
// then zero a dropout fraction of cells. Pure function of the input.
SceneFeatures encode_scene(const ObservedScene& obs);

}  // namespace gtrs::world
