#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "gtrs/metrics.hpp"
#include "gtrs/rng.hpp"
#include "gtrs/world.hpp"
#include "test_support.hpp"

using namespace gtrs;
using namespace gtrs::metrics;
using test_support::empty_scene;
using test_support::straight_trajectory;

TEST_CASE("nominal unobstructed driving passes everything") {
  world::Scene s = empty_scene();
  const geom::Trajectory t = straight_trajectory(4.0);
  s.reference_progress = 16.0;  // exactly the trajectory's own progress

  const SubScores m = evaluate_metrics(s, t);
  CHECK(m.nc == 1.0);
  CHECK(m.dac == 1.0);
  CHECK(m.ddc == 1.0);
  CHECK(m.tlc == 1.0);
  CHECK(m.ttc == 1.0);
  CHECK(m.lk == 1.0);
  CHECK(m.hc == 1.0);
  CHECK(m.ec == 1.0);
  CHECK(m.ep == doctest::Approx(1.0));
  CHECK(aggregate_epdms(m) == doctest::Approx(100.0));
}

TEST_CASE("aggregate is the weighted product formula") {
  SubScores s;
  s.nc = s.dac = s.ddc = s.tlc = 1.0;
  s.ttc = s.lk = s.hc = s.ec = 1.0;
  s.ep = 0.5;
  CHECK(aggregate_epdms(s) == doctest::Approx(84.375).epsilon(1e-12));

  s.nc = 0.0;
  CHECK(aggregate_epdms(s) == 0.0);

  s = SubScores{1, 1, 1, 1, 1, 1, 1, 1, 1};
  CHECK(aggregate_epdms(s) == doctest::Approx(100.0));
}

TEST_CASE("two stage scoring is a per-scene product") {
  const std::vector<double> s1{77.4};
  const std::vector<double> s2{52.7};
  const TwoStage ts = two_stage_score(s1, s2);
  CHECK(ts.stage1_mean == doctest::Approx(77.4));
  CHECK(ts.stage2_mean == doctest::Approx(52.7));
  CHECK(ts.final_score == doctest::Approx(77.4 * 52.7 / 100.0).epsilon(1e-12));

  // means alone cannot reconstruct the final: a planner that aces one stage
  // and fails the other scores zero, not fifty
  const std::vector<double> a{100.0, 0.0};
  const std::vector<double> b{0.0, 100.0};
  const TwoStage cross = two_stage_score(a, b);
  CHECK(cross.stage1_mean == doctest::Approx(50.0));
  CHECK(cross.stage2_mean == doctest::Approx(50.0));
  CHECK(cross.final_score == 0.0);
}

TEST_CASE("two stage scoring validates its inputs") {
  const std::vector<double> one{50.0};
  const std::vector<double> two{50.0, 60.0};
  CHECK_THROWS_AS(two_stage_score(one, two), std::invalid_argument);
  CHECK_THROWS_AS(two_stage_score({}, {}), std::invalid_argument);
}

TEST_CASE("collision gate matches a fine-grained sweep") {
  Rng rng(404);
  int agree = 0, checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const world::Scene s = world::generate_scene(
        9000 + trial, trial % 2 == 0 ? world::Difficulty::kEasy : world::Difficulty::kHard);
    const geom::Trajectory t = geom::sample_kinematic(rng);
    const SubScores m = evaluate_metrics(s, t);
    const auto oracle = test_support::brute_force_collision(s, t);
    ++checked;
    if (m.nc == oracle.nc && m.ttc == oracle.ttc) {
      ++agree;
    } else {
      // disagreement only allowed in near-tangent configurations
      const double margin =
          m.nc != oracle.nc ? oracle.clearance_now : oracle.clearance_horizon;
      CHECK(std::abs(margin) < 0.02);
    }
  }
  CHECK(agree >= checked * 98 / 100);
}

TEST_CASE("head-on parked agent trips the collision gate") {
  world::Scene s = empty_scene();
  world::Agent a;
  a.position0 = {8.0, 0.0};
  a.velocity = {0.0, 0.0};
  a.radius = 1.0;
  s.agents.push_back(a);
  const SubScores m = evaluate_metrics(s, straight_trajectory(4.0));
  CHECK(m.nc == 0.0);

  // same agent far off the lane is harmless
  s.agents[0].position0 = {8.0, 30.0};
  const SubScores clear = evaluate_metrics(s, straight_trajectory(4.0));
  CHECK(clear.nc == 1.0);
  CHECK(clear.ttc == 1.0);
}

TEST_CASE("time to collision trips before contact does") {
  world::Scene s = empty_scene();
  world::Agent a;
  // parked just beyond the 16 m the ego covers, within the 1 s lookahead
  a.position0 = {18.5, 0.0};
  a.velocity = {0.0, 0.0};
  a.radius = 0.5;
  s.agents.push_back(a);
  const SubScores m = evaluate_metrics(s, straight_trajectory(4.0));
  CHECK(m.nc == 1.0);
  CHECK(m.ttc == 0.0);
}

TEST_CASE("drivable area and lane keeping use their margins") {
  const world::Scene s = empty_scene();

  geom::Trajectory drift = straight_trajectory(4.0);
  for (auto& wp : drift.waypoints) wp.y = 1.7;  // inside lane, outside margin
  SubScores m = evaluate_metrics(s, drift);
  CHECK(m.dac == 1.0);
  CHECK(m.lk == 0.0);

  for (auto& wp : drift.waypoints) wp.y = 2.5;  // off the drivable area
  m = evaluate_metrics(s, drift);
  CHECK(m.dac == 0.0);
  CHECK(m.lk == 0.0);

  for (auto& wp : drift.waypoints) wp.y = 1.0;  // comfortably inside
  m = evaluate_metrics(s, drift);
  CHECK(m.dac == 1.0);
  CHECK(m.lk == 1.0);
}

TEST_CASE("driving backwards fails direction compliance") {
  const world::Scene s = empty_scene();
  geom::Trajectory back;
  for (int k = 1; k <= geom::kWaypointCount; ++k) {
    back.waypoints.push_back({-1.0 * k, 0.0, 0.0});
  }
  CHECK(evaluate_metrics(s, back).ddc == 0.0);

  // reversing after an initial advance fails too
  geom::Trajectory fwd_back;
  const double xs[] = {2.0, 4.0, 6.0, 8.0, 6.0, 4.0, 2.0, 0.0};
  for (const double x : xs) fwd_back.waypoints.push_back({x, 0.0, 0.0});
  CHECK(evaluate_metrics(s, fwd_back).ddc == 0.0);
  CHECK(evaluate_metrics(s, fwd_back).dac == 1.0);  // stayed in the lane

  // a sub-tolerance wiggle is forgiven
  geom::Trajectory wiggle = straight_trajectory(4.0);
  wiggle.waypoints[3].x = wiggle.waypoints[4].x + 0.05;
  CHECK(evaluate_metrics(s, wiggle).ddc == 1.0);
}

TEST_CASE("red lights gate progress past the stop line") {
  world::Scene s = empty_scene();
  s.stop_line = world::StopLine{10.0, world::LightState::kRed};

  CHECK(evaluate_metrics(s, straight_trajectory(4.0)).tlc == 0.0);  // runs the light
  CHECK(evaluate_metrics(s, straight_trajectory(2.0)).tlc == 1.0);  // stops short (8 m)

  s.stop_line->state = world::LightState::kGreen;
  CHECK(evaluate_metrics(s, straight_trajectory(4.0)).tlc == 1.0);
}

TEST_CASE("ego progress is clamped relative progress") {
  world::Scene s = empty_scene();
  s.reference_progress = 32.0;
  CHECK(evaluate_metrics(s, straight_trajectory(4.0)).ep == doctest::Approx(0.5));
  s.reference_progress = 8.0;
  CHECK(evaluate_metrics(s, straight_trajectory(4.0)).ep == doctest::Approx(1.0));
  // zero reference (no feasible candidate) never divides by zero
  s.reference_progress = 0.0;
  const double ep = evaluate_metrics(s, straight_trajectory(4.0)).ep;
  CHECK(ep >= 0.0);
  CHECK(ep <= 1.0);
}

TEST_CASE("harsh acceleration costs comfort") {
  const world::Scene s = empty_scene();
  geom::Trajectory jumpy;
  // alternate 0 and 5 m steps: accelerations far beyond the limit
  double x = 0.0;
  for (int k = 0; k < geom::kWaypointCount; ++k) {
    if (k % 2 == 1) x += 5.0;
    jumpy.waypoints.push_back({x, 0.0, 0.0});
  }
  const SubScores m = evaluate_metrics(s, jumpy);
  CHECK(m.hc < 1.0);
  CHECK(evaluate_metrics(s, straight_trajectory(4.0)).hc == 1.0);
}

TEST_CASE("yaw thrash costs extended comfort") {
  const world::Scene s = empty_scene();
  geom::Trajectory twisty = straight_trajectory(4.0);
  for (int k = 0; k < geom::kWaypointCount; ++k) {
    twisty.waypoints[k].heading = (k % 2 == 0) ? 0.5 : -0.5;
  }
  const SubScores m = evaluate_metrics(s, twisty);
  CHECK(m.ec < 1.0);
  CHECK(evaluate_metrics(s, straight_trajectory(4.0)).ec == 1.0);
}

TEST_CASE("oracle planner picks the best candidate and validates input") {
  world::Scene s = empty_scene();
  s.reference_progress = 16.0;
  std::vector<geom::Trajectory> candidates;
  geom::Trajectory off = straight_trajectory(4.0);
  for (auto& wp : off.waypoints) wp.y = 5.0;
  candidates.push_back(off);                     // gate failure
  candidates.push_back(straight_trajectory(2.0));  // fine, less progress
  candidates.push_back(straight_trajectory(4.0));  // fine, better progress
  CHECK(plan_pdm_oracle(s, candidates) == 2);
  CHECK_THROWS_AS(plan_pdm_oracle(s, {}), std::invalid_argument);
}

TEST_CASE("reference progress ignores unsafe candidates") {
  world::Scene s = empty_scene();
  world::Agent a;
  a.position0 = {14.0, 0.0};
  a.velocity = {0.0, 0.0};
  a.radius = 1.0;
  s.agents.push_back(a);  // blocks the fast straight line

  std::vector<geom::Trajectory> candidates{straight_trajectory(4.0),
                                           straight_trajectory(2.0)};
  const double ref = reference_progress(s, candidates);
  CHECK(ref == doctest::Approx(8.0).epsilon(1e-6));  // only the slow one is safe
  CHECK(reference_progress(s, {}) == 0.0);
}

TEST_CASE("trajectories with the wrong length are rejected") {
  const world::Scene s = empty_scene();
  geom::Trajectory bad = straight_trajectory(4.0);
  bad.waypoints.pop_back();
  CHECK_THROWS_AS(evaluate_metrics(s, bad), std::invalid_argument);
}
