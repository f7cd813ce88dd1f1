#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "gtrs/geom.hpp"
#include "gtrs/metrics.hpp"
#include "gtrs/nn.hpp"
#include "gtrs/vocab.hpp"
#include "gtrs/world.hpp"

namespace gtrs::io {

using json = nlohmann::json;

// Trajectories travel as {"dt": .., "points": [[x, y, heading], ..]}; this
// is the interchange unit for datasets, vocabulary files and reports.
json to_json(const geom::Trajectory& traj);
geom::Trajectory trajectory_from_json(const json& j);

json to_json(const world::Scene& scene);
world::Scene scene_from_json(const json& j);

// Sub-metric labels serialize as a 9-element array in canonical order.
json to_json(const metrics::SubScores& s);
metrics::SubScores subscores_from_json(const json& j);

// Header {tag, k, seed, T_wp, dt} plus the trajectory point arrays.
json to_json(const vocab::Vocabulary& v);
vocab::Vocabulary vocabulary_from_json(const json& j);

json params_to_json(const nn::ParamStore& ps);
nn::ParamStore params_from_json(const json& j);

json adam_to_json(const nn::Adam& opt);
void adam_from_json(const json& j, nn::Adam& opt);

// File helpers; all throw std::runtime_error with the path in the message.
json read_json_file(const std::string& path);
// Writes to <path>.tmp then renames, so a crash never leaves half a file.
void write_json_file(const std::string& path, const json& j, int indent = -1);
std::vector<json> read_jsonl(const std::string& path);
void write_jsonl(const std::string& path, const std::vector<json>& rows);
std::size_t count_lines(const std::string& path);

// Structural schema check for evaluation reports; throws on violations.
void validate_report(const json& report);

}  // namespace gtrs::io
