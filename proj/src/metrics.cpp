#include "gtrs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace gtrs::metrics {

namespace {

using geom::Trajectory;
using world::Agent;
using world::Polyline;
using world::Scene;
using world::Vec2;

// Ego positions at t = 0, dt, ..., T_wp*dt (implicit origin prepended).
std::vector<Vec2> ego_positions(const Trajectory& traj) {
  std::vector<Vec2> pos;
  pos.reserve(traj.waypoints.size() + 1);
  pos.push_back({0.0, 0.0});
  for (const auto& wp : traj.waypoints) pos.push_back({wp.x, wp.y});
  return pos;
}

bool overlaps_now(const Vec2& ego, const Agent& a, double t) {
  const Vec2 ap = world::agent_position(a, t);
  const double rsum = kEgoRadius + a.radius;
  const double dx = ap.x - ego.x;
  const double dy = ap.y - ego.y;
  return dx * dx + dy * dy < rsum * rsum;
}

// Min distance over tau in [0, kTtcHorizon] of two constant-velocity discs.
bool overlaps_within_horizon(const Vec2& ego, const Vec2& ego_vel, const Agent& a,
                             double t) {
  const Vec2 ap = world::agent_position(a, t);
  const double px = ap.x - ego.x;
  const double py = ap.y - ego.y;
  const double vx = a.velocity.x - ego_vel.x;
  const double vy = a.velocity.y - ego_vel.y;
  const double v2 = vx * vx + vy * vy;
  double tau = 0.0;
  if (v2 > 0.0) tau = std::clamp(-(px * vx + py * vy) / v2, 0.0, kTtcHorizon);
  const double cx = px + tau * vx;
  const double cy = py + tau * vy;
  const double rsum = kEgoRadius + a.radius;
  return cx * cx + cy * cy < rsum * rsum;
}

}  // namespace

MetricDetail evaluate_detail(const Scene& scene, const Trajectory& traj) {
  if (static_cast<int>(traj.waypoints.size()) != geom::kWaypointCount) {
    throw std::invalid_argument("evaluate_detail: trajectory waypoint count mismatch");
  }
  const double dt = traj.dt;
  const auto pos = ego_positions(traj);
  const std::size_t n_seg = pos.size() - 1;
  const Polyline line(scene.centerline);

  MetricDetail out;
  SubScores& s = out.scores;

  // NC / TTC: interpolate each segment at kCollisionSubSteps points
  bool collision = false;
  bool ttc_violation = false;
  for (std::size_t k = 0; k < n_seg && !(collision && ttc_violation); ++k) {
    const Vec2 seg_vel = {(pos[k + 1].x - pos[k].x) / dt, (pos[k + 1].y - pos[k].y) / dt};
    for (int j = 1; j <= kCollisionSubSteps; ++j) {
      const double f = static_cast<double>(j) / kCollisionSubSteps;
      const Vec2 p = {pos[k].x + f * (pos[k + 1].x - pos[k].x),
                      pos[k].y + f * (pos[k + 1].y - pos[k].y)};
      const double t = (static_cast<double>(k) + f) * dt;
      for (const Agent& a : scene.agents) {
        if (!collision && overlaps_now(p, a, t)) collision = true;
        if (!ttc_violation && overlaps_within_horizon(p, seg_vel, a, t)) ttc_violation = true;
      }
    }
  }
  s.nc = collision ? 0.0 : 1.0;
  s.ttc = ttc_violation ? 0.0 : 1.0;

  // lateral compliance at every waypoint; arc-length progress counts
  // negative behind the route start so reversing out of the route cannot
  // masquerade as standing still
  bool dac_ok = true;
  bool lk_ok = true;
  const Vec2 start = scene.centerline.front();
  const double head0 = line.tangent_at(0.0);
  const Vec2 fwd{std::cos(head0), std::sin(head0)};
  std::vector<double> arc(pos.size(), 0.0);
  for (std::size_t k = 1; k < pos.size(); ++k) {
    const auto proj = line.project(pos[k]);
    arc[k] = proj.s;
    if (proj.s <= 0.0) {
      const double along = (pos[k].x - start.x) * fwd.x + (pos[k].y - start.y) * fwd.y;
      arc[k] = std::min(0.0, along);
    }
    if (proj.dist > scene.lane_half_width) dac_ok = false;
    if (proj.dist > scene.lane_half_width - kLkMargin) lk_ok = false;
  }
  s.dac = dac_ok ? 1.0 : 0.0;
  s.lk = lk_ok ? 1.0 : 0.0;

  // progress monotone within tolerance
  bool ddc_ok = true;
  for (std::size_t k = 1; k < pos.size(); ++k) {
    if (arc[k] - arc[k - 1] < -kDdcTolerance) ddc_ok = false;
  }
  s.ddc = ddc_ok ? 1.0 : 0.0;

  bool tlc_ok = true;
  if (scene.stop_line && scene.stop_line->state == world::LightState::kRed) {
    for (std::size_t k = 1; k < pos.size(); ++k) {
      if (arc[k] > scene.stop_line->arc_position) tlc_ok = false;
    }
  }
  s.tlc = tlc_ok ? 1.0 : 0.0;

  out.progress = arc.back();
  s.ep = ep_from_progress(out.progress, scene.reference_progress);

  // longitudinal comfort: segment speeds -> accels -> jerks
  std::vector<double> speed(n_seg);
  for (std::size_t k = 0; k < n_seg; ++k) {
    speed[k] = std::hypot(pos[k + 1].x - pos[k].x, pos[k + 1].y - pos[k].y) / dt;
  }
  std::vector<double> accel(n_seg - 1);
  for (std::size_t k = 0; k + 1 < n_seg; ++k) accel[k] = (speed[k + 1] - speed[k]) / dt;
  int hc_ok = 0;
  for (std::size_t k = 0; k < accel.size(); ++k) {
    bool ok = std::abs(accel[k]) <= kAccelLimit;
    if (k > 0 && std::abs((accel[k] - accel[k - 1]) / dt) > kJerkLimit) ok = false;
    if (ok) ++hc_ok;
  }
  s.hc = accel.empty() ? 1.0 : static_cast<double>(hc_ok) / accel.size();

  // yaw comfort from stored headings only; the implicit start heading is
  // not a trajectory property, so rates start at the first stored pair
  const auto& wps = traj.waypoints;
  std::vector<double> yaw_rate(wps.size() - 1);
  for (std::size_t k = 0; k + 1 < wps.size(); ++k) {
    yaw_rate[k] = geom::wrap_angle(wps[k + 1].heading - wps[k].heading) / dt;
  }
  int ec_ok = 0;
  for (std::size_t k = 0; k < yaw_rate.size(); ++k) {
    bool ok = std::abs(yaw_rate[k]) <= kYawRateLimit;
    if (k > 0 && std::abs((yaw_rate[k] - yaw_rate[k - 1]) / dt) > kYawAccelLimit) ok = false;
    if (ok) ++ec_ok;
  }
  s.ec = yaw_rate.empty() ? 1.0 : static_cast<double>(ec_ok) / yaw_rate.size();

  return out;
}

SubScores evaluate_metrics(const Scene& scene, const Trajectory& traj) {
  return evaluate_detail(scene, traj).scores;
}

double ep_from_progress(double progress, double reference_progress) {
  return std::clamp(progress / std::max(reference_progress, 0.1), 0.0, 1.0);
}

double aggregate_epdms(const SubScores& s) {
  const double gates = s.nc * s.dac * s.ddc * s.tlc;
  const double soft = (5.0 * s.ep + 5.0 * s.ttc + 2.0 * s.lk + 2.0 * s.hc + 2.0 * s.ec) / 16.0;
  return 100.0 * gates * soft;
}

TwoStage two_stage_score(std::span<const double> stage1, std::span<const double> stage2) {
  if (stage1.size() != stage2.size()) {
    throw std::invalid_argument("two_stage_score: stage lists must pair up");
  }
  if (stage1.empty()) throw std::invalid_argument("two_stage_score: empty input");
  TwoStage out;
  for (std::size_t i = 0; i < stage1.size(); ++i) {
    out.stage1_mean += stage1[i];
    out.stage2_mean += stage2[i];
    out.final_score += stage1[i] * stage2[i] / 100.0;
  }
  const double n = static_cast<double>(stage1.size());
  out.stage1_mean /= n;
  out.stage2_mean /= n;
  out.final_score /= n;
  return out;
}

double progress_along_centerline(const Scene& scene, const Trajectory& traj) {
  const Polyline line(scene.centerline);
  const auto& wp = traj.waypoints.back();
  return line.project({wp.x, wp.y}).s;
}

double reference_progress(const Scene& scene, std::span<const geom::Trajectory> candidates) {
  double best = 0.0;
  for (const auto& traj : candidates) {
    const MetricDetail d = evaluate_detail(scene, traj);
    const SubScores& s = d.scores;
    if (s.nc == 1.0 && s.dac == 1.0 && s.ddc == 1.0 && s.tlc == 1.0 && s.ttc == 1.0) {
      best = std::max(best, d.progress);
    }
  }
  return best;
}

std::size_t plan_pdm_oracle(const Scene& scene, std::span<const geom::Trajectory> candidates) {
  if (candidates.empty()) throw std::invalid_argument("plan_pdm_oracle: empty candidate set");
  std::size_t best_idx = 0;
  double best_score = -1.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double score = aggregate_epdms(evaluate_metrics(scene, candidates[i]));
    if (score > best_score) {
      best_score = score;
      best_idx = i;
    }
  }
  return best_idx;
}

}  // namespace gtrs::metrics
