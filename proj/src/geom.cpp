#include "gtrs/geom.hpp"

#include <cmath>
#include <stdexcept>

namespace gtrs::geom {

double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * M_PI);
  if (r <= -M_PI) r = M_PI;
  return r;
}

DeltaSequence diff_normalize(const Trajectory& traj) {
  DeltaSequence out;
  out.dt = traj.dt;
  out.deltas.reserve(traj.waypoints.size());
  double px = 0.0, py = 0.0, ph = 0.0;  // implicit start pose
  for (const Waypoint& wp : traj.waypoints) {
    out.deltas.push_back({wp.x - px, wp.y - py, wrap_angle(wp.heading - ph)});
    px = wp.x;
    py = wp.y;
    ph = wp.heading;
  }
  return out;
}

Trajectory integrate_deltas(const DeltaSequence& seq) {
  Trajectory out;
  out.dt = seq.dt;
  out.frame = Frame::kEgo;
  out.waypoints.reserve(seq.deltas.size());
  double x = 0.0, y = 0.0, h = 0.0;
  for (const DeltaStep& d : seq.deltas) {
    x += d.dx;
    y += d.dy;
    h = wrap_angle(h + d.dheading);
    out.waypoints.push_back({x, y, h});
  }
  return out;
}

Trajectory sample_kinematic(Rng& rng, const ControlGrid& grid) {
  if (!std::isfinite(grid.speed_min) || !std::isfinite(grid.speed_max) ||
      !std::isfinite(grid.curvature_min) || !std::isfinite(grid.curvature_max)) {
    throw std::invalid_argument("sample_kinematic: control grid bounds must be finite");
  }
  // two piecewise-constant control segments over the horizon
  const int split = kWaypointCount / 2;
  const double speeds[2] = {rng.uniform(grid.speed_min, grid.speed_max),
                            rng.uniform(grid.speed_min, grid.speed_max)};
  const double curvatures[2] = {rng.uniform(grid.curvature_min, grid.curvature_max),
                                rng.uniform(grid.curvature_min, grid.curvature_max)};

  Trajectory out;
  out.frame = Frame::kEgo;
  out.waypoints.reserve(kWaypointCount);
  double x = 0.0, y = 0.0, h = 0.0;
  for (int k = 0; k < kWaypointCount; ++k) {
    const int seg = k < split ? 0 : 1;
    const double v = speeds[seg];
    const double arc = v * out.dt;
    const double dh = curvatures[seg] * arc;
    const double mid = h + 0.5 * dh;  // midpoint heading keeps the step length at v*dt
    x += arc * std::cos(mid);
    y += arc * std::sin(mid);
    h = wrap_angle(h + dh);
    out.waypoints.push_back({x, y, h});
  }
  return out;
}

Trajectory rotate_traj(const Trajectory& traj, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Trajectory out;
  out.dt = traj.dt;
  out.frame = traj.frame;
  out.waypoints.reserve(traj.waypoints.size());
  for (const Waypoint& wp : traj.waypoints) {
    out.waypoints.push_back(
        {c * wp.x - s * wp.y, s * wp.x + c * wp.y, wrap_angle(wp.heading + angle)});
  }
  return out;
}

double traj_distance(const Trajectory& a, const Trajectory& b) {
  if (a.waypoints.size() != b.waypoints.size()) {
    throw std::invalid_argument("traj_distance: waypoint count mismatch");
  }
  if (a.waypoints.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.waypoints.size(); ++i) {
    acc += std::hypot(a.waypoints[i].x - b.waypoints[i].x,
                      a.waypoints[i].y - b.waypoints[i].y);
  }
  return acc / static_cast<double>(a.waypoints.size());
}

std::vector<double> flatten_xy(const Trajectory& traj) {
  std::vector<double> out;
  out.reserve(traj.waypoints.size() * 2);
  for (const Waypoint& wp : traj.waypoints) {
    out.push_back(wp.x);
    out.push_back(wp.y);
  }
  return out;
}

}  // namespace gtrs::geom
