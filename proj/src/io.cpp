#include "gtrs/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace gtrs::io {

namespace {

json point_triples(const geom::Trajectory& traj) {
  json pts = json::array();
  for (const auto& wp : traj.waypoints) pts.push_back({wp.x, wp.y, wp.heading});
  return pts;
}

std::vector<geom::Waypoint> waypoints_from(const json& pts) {
  std::vector<geom::Waypoint> out;
  out.reserve(pts.size());
  for (const auto& p : pts) {
    if (!p.is_array() || p.size() != 3) {
      throw std::invalid_argument("trajectory point must be an [x, y, heading] triple");
    }
    out.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
  }
  return out;
}

const char* light_name(world::LightState s) {
  return s == world::LightState::kRed ? "red" : "green";
}

world::LightState light_from(const std::string& s) {
  if (s == "red") return world::LightState::kRed;
  if (s == "green") return world::LightState::kGreen;
  throw std::invalid_argument("unknown light state '" + s + "'");
}

const char* difficulty_name(world::Difficulty d) {
  return d == world::Difficulty::kHard ? "hard" : "easy";
}

world::Difficulty difficulty_from(const std::string& s) {
  if (s == "hard") return world::Difficulty::kHard;
  if (s == "easy") return world::Difficulty::kEasy;
  throw std::invalid_argument("unknown difficulty '" + s + "'");
}

}  // namespace

json to_json(const geom::Trajectory& traj) {
  return json{{"dt", traj.dt}, {"points", point_triples(traj)}};
}

geom::Trajectory trajectory_from_json(const json& j) {
  geom::Trajectory t;
  t.dt = j.at("dt").get<double>();
  t.waypoints = waypoints_from(j.at("points"));
  return t;
}

json to_json(const world::Scene& scene) {
  json centerline = json::array();
  for (const auto& p : scene.centerline) centerline.push_back({p.x, p.y});
  json agents = json::array();
  for (const auto& a : scene.agents) {
    agents.push_back({{"p", {a.position0.x, a.position0.y}},
                      {"v", {a.velocity.x, a.velocity.y}},
                      {"r", a.radius}});
  }
  json stop = nullptr;
  if (scene.stop_line) {
    stop = json{{"s", scene.stop_line->arc_position},
                {"state", light_name(scene.stop_line->state)}};
  }
  return json{{"seed", scene.seed},
              {"difficulty", difficulty_name(scene.difficulty)},
              {"centerline", centerline},
              {"lane_half_width", scene.lane_half_width},
              {"agents", agents},
              {"stop_line", stop},
              {"ego_speed", scene.ego_speed},
              {"reference_progress", scene.reference_progress}};
}

world::Scene scene_from_json(const json& j) {
  world::Scene s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.difficulty = difficulty_from(j.at("difficulty").get<std::string>());
  for (const auto& p : j.at("centerline")) {
    s.centerline.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  s.lane_half_width = j.at("lane_half_width").get<double>();
  for (const auto& a : j.at("agents")) {
    world::Agent agent;
    agent.position0 = {a.at("p")[0].get<double>(), a.at("p")[1].get<double>()};
    agent.velocity = {a.at("v")[0].get<double>(), a.at("v")[1].get<double>()};
    agent.radius = a.at("r").get<double>();
    s.agents.push_back(agent);
  }
  if (!j.at("stop_line").is_null()) {
    const auto& st = j.at("stop_line");
    s.stop_line = world::StopLine{st.at("s").get<double>(),
                                  light_from(st.at("state").get<std::string>())};
  }
  s.ego_speed = j.at("ego_speed").get<double>();
  s.reference_progress = j.at("reference_progress").get<double>();
  return s;
}

json to_json(const metrics::SubScores& s) {
  const auto arr = s.as_array();
  return json(arr);
}

metrics::SubScores subscores_from_json(const json& j) {
  if (!j.is_array() || j.size() != metrics::kMetricCount) {
    throw std::invalid_argument("sub-scores must be a 9-element array");
  }
  std::array<double, metrics::kMetricCount> arr;
  for (std::size_t m = 0; m < arr.size(); ++m) arr[m] = j[m].get<double>();
  return metrics::SubScores::from_array(arr);
}

json to_json(const vocab::Vocabulary& v) {
  json trajs = json::array();
  for (const auto& t : v.trajectories) trajs.push_back(point_triples(t));
  const double dt = v.trajectories.empty() ? geom::kStepSeconds : v.trajectories[0].dt;
  return json{{"tag", std::string(vocab::tag_name(v.tag))},
              {"k", v.size()},
              {"seed", v.seed},
              {"T_wp", geom::kWaypointCount},
              {"dt", dt},
              {"trajectories", trajs}};
}

vocab::Vocabulary vocabulary_from_json(const json& j) {
  vocab::Vocabulary v;
  v.tag = vocab::tag_from_name(j.at("tag").get<std::string>());
  v.seed = j.at("seed").get<std::uint64_t>();
  const double dt = j.at("dt").get<double>();
  for (const auto& pts : j.at("trajectories")) {
    geom::Trajectory t;
    t.dt = dt;
    t.waypoints = waypoints_from(pts);
    v.trajectories.push_back(std::move(t));
  }
  if (j.at("k").get<std::size_t>() != v.size()) {
    throw std::invalid_argument("vocabulary header k disagrees with trajectory count");
  }
  return v;
}

json params_to_json(const nn::ParamStore& ps) {
  json out = json::object();
  for (const auto& [name, p] : ps.entries()) {
    out[name] = json{{"shape", p.shape}, {"values", p.values}};
  }
  return out;
}

nn::ParamStore params_from_json(const json& j) {
  nn::ParamStore ps;
  for (auto it = j.begin(); it != j.end(); ++it) {
    ps.add_raw(it.key(), it.value().at("shape").get<std::vector<std::size_t>>(),
               it.value().at("values").get<nn::Vec>());
  }
  return ps;
}

json adam_to_json(const nn::Adam& opt) {
  json m = json::object(), v = json::object();
  for (const auto& [name, vec] : opt.moment1()) m[name] = vec;
  for (const auto& [name, vec] : opt.moment2()) v[name] = vec;
  return json{{"step", opt.step_count()},
              {"lr", opt.config().lr},
              {"beta1", opt.config().beta1},
              {"beta2", opt.config().beta2},
              {"eps", opt.config().eps},
              {"m", m},
              {"v", v}};
}

void adam_from_json(const json& j, nn::Adam& opt) {
  std::map<std::string, nn::Vec> m, v;
  for (auto it = j.at("m").begin(); it != j.at("m").end(); ++it) {
    m[it.key()] = it.value().get<nn::Vec>();
  }
  for (auto it = j.at("v").begin(); it != j.at("v").end(); ++it) {
    v[it.key()] = it.value().get<nn::Vec>();
  }
  opt.restore(j.at("step").get<std::int64_t>(), std::move(m), std::move(v));
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

void write_json_file(const std::string& path, const json& j, int indent) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << j.dump(indent) << '\n';
    if (!out) throw std::runtime_error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw std::runtime_error("malformed JSON at " + path + ":" +
                               std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

void write_jsonl(const std::string& path, const std::vector<json>& rows) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    for (const auto& r : rows) out << r.dump() << '\n';
    if (!out) throw std::runtime_error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::size_t count_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) ++n;
  }
  return n;
}

void validate_report(const json& report) {
  const auto require = [&](const char* key) {
    if (!report.contains(key)) {
      throw std::invalid_argument(std::string("report missing key '") + key + "'");
    }
  };
  require("kind");
  if (report.at("kind").get<std::string>() != "epdms_report") {
    throw std::invalid_argument("report kind must be 'epdms_report'");
  }
  for (const char* key : {"config_hash", "dataset_hash", "variant", "training_vocab",
                          "inference_vocab", "n_scenes", "stage1", "stage2",
                          "final_epdms", "scenes"}) {
    require(key);
  }
  for (const char* stage : {"stage1", "stage2"}) {
    const json& s = report.at(stage);
    for (const auto& name : metrics::kMetricNames) {
      if (!s.contains(name)) {
        throw std::invalid_argument(std::string("report ") + stage + " missing metric '" +
                                    std::string(name) + "'");
      }
    }
    if (!s.contains("epdms")) {
      throw std::invalid_argument(std::string("report ") + stage + " missing 'epdms'");
    }
  }
  if (!report.at("scenes").is_array()) {
    throw std::invalid_argument("report 'scenes' must be an array");
  }
  if (report.at("scenes").size() != report.at("n_scenes").get<std::size_t>()) {
    throw std::invalid_argument("report scene count disagrees with n_scenes");
  }
}

}  // namespace gtrs::io
