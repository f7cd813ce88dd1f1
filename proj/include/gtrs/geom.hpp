#pragma once

#include <cstddef>
#include <vector>

#include "gtrs/rng.hpp"

namespace gtrs::geom {

// Every trajectory in the system is 8 waypoints at 0.5 s (4 s horizon);
// the implicit start pose is the ego origin with heading 0 and is not
// stored as a waypoint.
inline constexpr int kWaypointCount = 8;
inline constexpr double kStepSeconds = 0.5;

enum class Frame { kEgo, kWorld };

struct Waypoint {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // wrapped to (-pi, pi]
};

struct Trajectory {
  std::vector<Waypoint> waypoints;
  double dt = kStepSeconds;
  Frame frame = Frame::kEgo;
};

struct DeltaStep {
  double dx = 0.0;
  double dy = 0.0;
  double dheading = 0.0;
};

// Per-step waypoint differences; cumulative integration from the origin
// reconstructs the source trajectory exactly.
struct DeltaSequence {
  std::vector<DeltaStep> deltas;
  double dt = kStepSeconds;
};

// Wrap to (-pi, pi].
double wrap_angle(double a);

DeltaSequence diff_normalize(const Trajectory& traj);
Trajectory integrate_deltas(const DeltaSequence& seq);

// Bounds for the unicycle control sampler. Two piecewise-constant
// (speed, curvature) segments over the horizon.
struct ControlGrid {
  double speed_min = 0.0;
  double speed_max = 15.0;
  double curvature_min = -0.2;
  double curvature_max = 0.2;
};

// Rolls out a unicycle at dt; per-step heading change is curvature times
// arc length, so the result is always kinematically feasible.
Trajectory sample_kinematic(Rng& rng, const ControlGrid& grid = {});

// Rigid rotation about the ego origin; headings shifted and re-wrapped.
Trajectory rotate_traj(const Trajectory& traj, double angle);

// Mean Euclidean distance over corresponding (x, y) waypoints.
double traj_distance(const Trajectory& a, const Trajectory& b);

// (x0, y0, x1, y1, ...) layout used by the clustering step.
std::vector<double> flatten_xy(const Trajectory& traj);

}  // namespace gtrs::geom
