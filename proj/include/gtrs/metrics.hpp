#pragma once

#include <array>
#include <cstddef>
#include <span>

#include "gtrs/geom.hpp"
#include "gtrs/world.hpp"

namespace gtrs::metrics {

inline constexpr double kEgoRadius = 1.0;       // ego modeled as a disc
inline constexpr int kCollisionSubSteps = 10;   // interpolation between waypoints
inline constexpr double kTtcHorizon = 1.0;      // constant-velocity lookahead, s
inline constexpr double kDdcTolerance = 0.1;    // allowed backward progress per step, m
inline constexpr double kLkMargin = 0.5;        // lane-keeping margin inside the lane, m
inline constexpr double kAccelLimit = 3.0;      // m/s^2
inline constexpr double kJerkLimit = 5.0;       // m/s^3
inline constexpr double kYawRateLimit = 0.6;    // rad/s
inline constexpr double kYawAccelLimit = 1.5;   // rad/s^2

inline constexpr int kMetricCount = 9;

// Hard gates (binary): nc, dac, ddc, tlc. Soft metrics weighted 5/5/2/2/2.
struct SubScores {
  double nc = 0.0;   // no collision
  double dac = 0.0;  // drivable area compliance
  double ddc = 0.0;  // driving direction compliance
  double tlc = 0.0;  // traffic light compliance
  double ep = 0.0;   // ego progress
  double ttc = 0.0;  // time-to-collision clearance
  double lk = 0.0;   // lane keeping
  double hc = 0.0;   // history (longitudinal) comfort
  double ec = 0.0;   // extended (yaw) comfort

  std::array<double, kMetricCount> as_array() const {
    return {nc, dac, ddc, tlc, ep, ttc, lk, hc, ec};
  }
  static SubScores from_array(const std::array<double, kMetricCount>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7], a[8]};
  }
};

inline constexpr std::array<const char*, kMetricCount> kMetricNames = {
    "nc", "dac", "ddc", "tlc", "ep", "ttc", "lk", "hc", "ec"};

struct MetricDetail {
  SubScores scores;
  double progress = 0.0;  // arc length reached along the centerline
};

// All sub-metrics for one candidate against the ground-truth scene. EP uses
// scene.reference_progress; `progress` is returned so a caller fixing up
// the reference can recompute EP without a second sweep.
MetricDetail evaluate_detail(const world::Scene& scene, const geom::Trajectory& traj);
SubScores evaluate_metrics(const world::Scene& scene, const geom::Trajectory& traj);

double ep_from_progress(double progress, double reference_progress);

// 100 x (nc*dac*ddc*tlc) x (5 ep + 5 ttc + 2 lk + 2 hc + 2 ec) / 16
double aggregate_epdms(const SubScores& s);

struct TwoStage {
  double stage1_mean = 0.0;
  double stage2_mean = 0.0;
  double final_score = 0.0;  // mean over scenes of stage1_i * stage2_i / 100
};

TwoStage two_stage_score(std::span<const double> stage1, std::span<const double> stage2);

double progress_along_centerline(const world::Scene& scene, const geom::Trajectory& traj);

// Max progress over candidates that pass every gate and TTC; the progress
// an oracle driver restricted to the candidate set can safely achieve.
double reference_progress(const world::Scene& scene,
                          std::span<const geom::Trajectory> candidates);

// Candidate with maximal EPDMS against ground truth; ties break to the
// lowest index. Throws on an empty candidate set.
std::size_t plan_pdm_oracle(const world::Scene& scene,
                            std::span<const geom::Trajectory> candidates);

}  // namespace gtrs::metrics
