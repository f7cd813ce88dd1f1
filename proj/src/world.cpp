#include "gtrs/world.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gtrs/metrics.hpp"

namespace gtrs::world {

namespace {

constexpr double kCenterlineSpacing = 1.0;  // meters between stored points
constexpr double kCenterlineLength = 80.0;
constexpr double kTangentBaseline = 2.5;    // half-window for tangent estimates

Vec2 rotated(const Vec2& p, double c, double s) {
  return {c * p.x - s * p.y, s * p.x + c * p.y};
}

}  // namespace

Polyline::Polyline(std::span<const Vec2> points) : pts_(points.begin(), points.end()) {
  if (pts_.size() < 2) throw std::invalid_argument("Polyline: need at least 2 points");
  cum_.resize(pts_.size());
  cum_[0] = 0.0;
  for (std::size_t i = 1; i < pts_.size(); ++i) {
    cum_[i] = cum_[i - 1] + std::hypot(pts_[i].x - pts_[i - 1].x, pts_[i].y - pts_[i - 1].y);
  }
}

Vec2 Polyline::point_at(double s) const {
  s = std::clamp(s, 0.0, length());
  auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
  std::size_t i = it == cum_.begin() ? 1 : static_cast<std::size_t>(it - cum_.begin());
  if (i >= pts_.size()) i = pts_.size() - 1;
  const double seg = cum_[i] - cum_[i - 1];
  const double t = seg > 0.0 ? (s - cum_[i - 1]) / seg : 0.0;
  return {pts_[i - 1].x + t * (pts_[i].x - pts_[i - 1].x),
          pts_[i - 1].y + t * (pts_[i].y - pts_[i - 1].y)};
}

double Polyline::tangent_at(double s) const {
  s = std::clamp(s, 0.0, length());
  auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
  std::size_t i = it == cum_.begin() ? 1 : static_cast<std::size_t>(it - cum_.begin());
  if (i >= pts_.size()) i = pts_.size() - 1;
  return std::atan2(pts_[i].y - pts_[i - 1].y, pts_[i].x - pts_[i - 1].x);
}

Polyline::Projection Polyline::project(const Vec2& p) const {
  Projection best{0.0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 1; i < pts_.size(); ++i) {
    const double ex = pts_[i].x - pts_[i - 1].x;
    const double ey = pts_[i].y - pts_[i - 1].y;
    const double len2 = ex * ex + ey * ey;
    double t = 0.0;
    if (len2 > 0.0) {
      t = std::clamp(((p.x - pts_[i - 1].x) * ex + (p.y - pts_[i - 1].y) * ey) / len2, 0.0, 1.0);
    }
    const double qx = pts_[i - 1].x + t * ex;
    const double qy = pts_[i - 1].y + t * ey;
    const double d = std::hypot(p.x - qx, p.y - qy);
    if (d < best.dist) {
      best.dist = d;
      best.s = cum_[i - 1] + t * (cum_[i] - cum_[i - 1]);
    }
  }
  return best;
}

Scene generate_scene(std::uint64_t seed, Difficulty difficulty) {
  Rng root(seed);
  Scene scene;
  scene.seed = seed;
  scene.difficulty = difficulty;

  // centerline: straight or constant-curvature arc, >= 60 m ahead
  Rng geo = root.derive("geometry");
  const double kappa_max = difficulty == Difficulty::kEasy ? 0.05 : 0.12;
  double kappa = 0.0;
  if (geo.uniform01() >= 0.3) {
    kappa = geo.uniform(-kappa_max, kappa_max);
  }
  const int n_pts = static_cast<int>(kCenterlineLength / kCenterlineSpacing) + 1;
  scene.centerline.reserve(n_pts);
  for (int i = 0; i < n_pts; ++i) {
    const double s = i * kCenterlineSpacing;
    if (std::abs(kappa) < 1e-9) {
      scene.centerline.push_back({s, 0.0});
    } else {
      scene.centerline.push_back({std::sin(kappa * s) / kappa, (1.0 - std::cos(kappa * s)) / kappa});
    }
  }
  const Polyline line(scene.centerline);

  Rng agents = root.derive("agents");
  const std::size_t count = difficulty == Difficulty::kEasy
                                ? agents.below(4)
                                : 2 + agents.below(5);
  for (std::size_t i = 0; i < count; ++i) {
    Agent a;
    const double s = agents.uniform(8.0, 40.0);
    // hard scenes keep the first agent near the lane
    const double lat = (difficulty == Difficulty::kHard && i == 0)
                           ? agents.uniform(-1.5, 1.5)
                           : agents.uniform(-6.0, 6.0);
    const Vec2 base = line.point_at(s);
    const double tangent = line.tangent_at(s);
    a.position0 = {base.x - lat * std::sin(tangent), base.y + lat * std::cos(tangent)};
    if (agents.uniform01() < 0.4) {
      a.velocity = {0.0, 0.0};
    } else {
      const double speed = agents.uniform(0.5, 4.0);
      const double dir = agents.uniform(-M_PI, M_PI);
      a.velocity = {speed * std::cos(dir), speed * std::sin(dir)};
    }
    a.radius = agents.uniform(0.3, 1.5);
    scene.agents.push_back(a);
  }

  Rng stop = root.derive("stop");
  if (stop.uniform01() < 0.3) {
    StopLine sl;
    sl.arc_position = stop.uniform(10.0, 35.0);
    sl.state = stop.uniform01() < 0.5 ? LightState::kRed : LightState::kGreen;
    scene.stop_line = sl;
  }

  scene.ego_speed = root.derive("ego").uniform(2.0, 12.0);
  return scene;
}

Scene generate_scene(std::uint64_t seed, Difficulty difficulty,
                     std::span<const geom::Trajectory> reference_candidates) {
  Scene scene = generate_scene(seed, difficulty);
  scene.reference_progress = metrics::reference_progress(scene, reference_candidates);
  return scene;
}

Vec2 agent_position(const Agent& a, double t) {
  return {a.position0.x + a.velocity.x * t, a.position0.y + a.velocity.y * t};
}

Scene rotate_scene(const Scene& s, double angle) {
  const double c = std::cos(angle);
  const double sn = std::sin(angle);
  Scene out = s;
  for (Vec2& p : out.centerline) p = rotated(p, c, sn);
  for (Agent& a : out.agents) {
    a.position0 = rotated(a.position0, c, sn);
    a.velocity = rotated(a.velocity, c, sn);
  }
  return out;
}

ObservedScene perturb_scene(const Scene& s, double rotation, double noise_sigma,
                            double dropout_frac, std::uint64_t seed) {
  if (!(rotation >= -M_PI / 6.0 && rotation <= M_PI / 6.0)) {
    throw std::invalid_argument("perturb_scene: rotation outside [-pi/6, pi/6]");
  }
  if (noise_sigma < 0.0) throw std::invalid_argument("perturb_scene: negative noise_sigma");
  if (!(dropout_frac >= 0.0 && dropout_frac < 1.0)) {
    throw std::invalid_argument("perturb_scene: dropout_frac outside [0, 1)");
  }
  return ObservedScene{s, rotation, noise_sigma, dropout_frac, seed};
}

SceneFeatures encode_scene(const ObservedScene& obs) {
  using L = FeatureLayout;
  Scene g = rotate_scene(obs.base, obs.rotation);

  if (obs.noise_sigma > 0.0) {
    Rng jitter = Rng(obs.seed).derive("jitter");
    for (Agent& a : g.agents) {
      a.position0.x += obs.noise_sigma * jitter.normal();
      a.position0.y += obs.noise_sigma * jitter.normal();
    }
    for (Vec2& p : g.centerline) {
      p.x += obs.noise_sigma * jitter.normal();
      p.y += obs.noise_sigma * jitter.normal();
    }
  }

  SceneFeatures feat;
  feat.values.assign(kFeatureDim, 0.0);

  // agents: radial occupancy, current position weight 1, +1 s position 0.5
  auto place = [&feat](const Vec2& p, double weight) {
    const double r = std::hypot(p.x, p.y);
    if (r >= L::kGridRings * L::kGridRingMeters) return;
    const int ring = static_cast<int>(r / L::kGridRingMeters);
    const double ang = std::atan2(p.y, p.x);
    int sector = static_cast<int>((ang + M_PI) / (2.0 * M_PI / L::kGridSectors));
    sector = std::clamp(sector, 0, L::kGridSectors - 1);
    feat.values[L::kGridOffset + ring * L::kGridSectors + sector] += weight;
  };
  for (const Agent& a : g.agents) {
    place(a.position0, 1.0);
    place(agent_position(a, 1.0), 0.5);
  }

  // centerline tangents and curvatures over a 5 m baseline
  const Polyline line(g.centerline);
  for (int i = 0; i < L::kCenterlineSamples; ++i) {
    const double s = 2.5 + 5.0 * i;
    const double t0 = line.tangent_at(std::max(0.0, s - kTangentBaseline));
    const double t1 = line.tangent_at(std::min(line.length(), s + kTangentBaseline));
    feat.values[L::kTangentOffset + i] = line.tangent_at(s);
    feat.values[L::kCurvatureOffset + i] =
        5.0 * geom::wrap_angle(t1 - t0) / (2.0 * kTangentBaseline);
  }

  feat.values[L::kEgoSpeedOffset] = g.ego_speed / 15.0;
  if (g.stop_line) {
    feat.values[L::kStopDistanceOffset] = std::min(g.stop_line->arc_position, 60.0) / 60.0;
    feat.values[L::kLightOffset + (g.stop_line->state == LightState::kRed ? 1 : 0)] = 1.0;
  } else {
    feat.values[L::kStopDistanceOffset] = -1.0;
  }

  if (obs.dropout_frac > 0.0) {
    Rng drop = Rng(obs.seed).derive("dropout");
    const std::size_t n_zero =
        static_cast<std::size_t>(obs.dropout_frac * kFeatureDim);
    std::vector<int> idx(kFeatureDim);
    for (int i = 0; i < kFeatureDim; ++i) idx[i] = i;
    for (std::size_t i = 0; i < n_zero; ++i) {
      const std::size_t j = i + drop.below(kFeatureDim - i);
      std::swap(idx[i], idx[j]);
      feat.values[idx[i]] = 0.0;
    }
  }
  return feat;
}

}  // namespace gtrs::world
