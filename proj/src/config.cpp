#include "gtrs/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include "gtrs/rng.hpp"

namespace gtrs::config {

using nlohmann::json;

std::string_view selector_name(Selector s) {
  switch (s) {
    case Selector::kDpOnly: return "dp";
    case Selector::kXl: return "xl";
    case Selector::kDpXl: return "dp+xl";
    case Selector::kDpL: return "dp+l";
  }
  throw std::logic_error("selector_name: unknown selector");
}

Selector selector_from_name(std::string_view name) {
  if (name == "dp") return Selector::kDpOnly;
  if (name == "xl") return Selector::kXl;
  if (name == "dp+xl") return Selector::kDpXl;
  if (name == "dp+l") return Selector::kDpL;
  throw std::invalid_argument("unknown inference vocabulary '" + std::string(name) +
                              "' (expected dp, xl, dp+xl or dp+l)");
}

namespace {

// Strict field reader: every key must exist, and the caller's visited set
// lets config_from_json reject keys it never asked for.
class Reader {
 public:
  Reader(const json& j, std::string scope) : j_(j), scope_(std::move(scope)) {
    if (!j_.is_object()) {
      throw std::invalid_argument("config section '" + scope_ + "' must be an object");
    }
  }

  template <typename T>
  T get(const std::string& key) {
    if (!j_.contains(key)) {
      throw std::invalid_argument("config missing key '" + scope_ + key + "'");
    }
    visited_.insert(key);
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw std::invalid_argument("config key '" + scope_ + key + "' has the wrong type");
    }
  }

  const json& section(const std::string& key) {
    if (!j_.contains(key)) {
      throw std::invalid_argument("config missing section '" + scope_ + key + "'");
    }
    visited_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!visited_.count(it.key())) {
        throw std::invalid_argument("config has unknown key '" + scope_ + it.key() + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string scope_;
  std::set<std::string> visited_;
};

}  // namespace

json to_json(const ExperimentConfig& cfg) {
  return json{
      {"master_seed", cfg.master_seed},
      {"out_dir", cfg.out_dir},
      {"scenes",
       {{"train", cfg.scenes.train},
        {"eval", cfg.scenes.eval},
        {"hard_fraction", cfg.scenes.hard_fraction}}},
      {"vocab",
       {{"n_samples", cfg.vocab.n_samples},
        {"k_xl", cfg.vocab.k_xl},
        {"k_l", cfg.vocab.k_l}}},
      {"generator",
       {{"steps", cfg.generator.steps},
        {"beta_min", cfg.generator.beta_min},
        {"beta_max", cfg.generator.beta_max},
        {"epochs", cfg.generator.epochs},
        {"hidden", cfg.generator.hidden},
        {"lr", cfg.generator.lr}}},
      {"scorer",
       {{"epochs", cfg.scorer.epochs},
        {"lr", cfg.scorer.lr},
        {"dropout_rate", cfg.scorer.dropout_rate},
        {"lambda_imitation", cfg.scorer.lambda_imitation},
        {"sigma_imitation", cfg.scorer.sigma_imitation},
        {"rotation_range", cfg.scorer.rotation_range},
        {"k_topk", cfg.scorer.k_topk},
        {"refine_delta", cfg.scorer.refine_delta},
        {"refine_weight", cfg.scorer.refine_weight},
        {"ema_decay", cfg.scorer.ema_decay},
        {"refine_into_trunk", cfg.scorer.refine_into_trunk}}},
      {"eval",
       {{"selector", std::string(selector_name(cfg.eval.selector))},
        {"n_dp", cfg.eval.n_dp},
        {"stage2",
         {{"rotation_range", cfg.eval.stage2.rotation_range},
          {"noise_sigma", cfg.eval.stage2.noise_sigma},
          {"dropout_frac", cfg.eval.stage2.dropout_frac}}}}}};
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  Reader top(j, "");
  cfg.master_seed = top.get<std::uint64_t>("master_seed");
  cfg.out_dir = top.get<std::string>("out_dir");

  Reader scenes(top.section("scenes"), "scenes.");
  cfg.scenes.train = scenes.get<std::size_t>("train");
  cfg.scenes.eval = scenes.get<std::size_t>("eval");
  cfg.scenes.hard_fraction = scenes.get<double>("hard_fraction");
  scenes.finish();

  Reader vocab(top.section("vocab"), "vocab.");
  cfg.vocab.n_samples = vocab.get<std::size_t>("n_samples");
  cfg.vocab.k_xl = vocab.get<std::size_t>("k_xl");
  cfg.vocab.k_l = vocab.get<std::size_t>("k_l");
  vocab.finish();

  Reader gen(top.section("generator"), "generator.");
  cfg.generator.steps = gen.get<int>("steps");
  cfg.generator.beta_min = gen.get<double>("beta_min");
  cfg.generator.beta_max = gen.get<double>("beta_max");
  cfg.generator.epochs = gen.get<std::size_t>("epochs");
  cfg.generator.hidden = gen.get<std::size_t>("hidden");
  cfg.generator.lr = gen.get<double>("lr");
  gen.finish();

  Reader sc(top.section("scorer"), "scorer.");
  cfg.scorer.epochs = sc.get<std::size_t>("epochs");
  cfg.scorer.lr = sc.get<double>("lr");
  cfg.scorer.dropout_rate = sc.get<double>("dropout_rate");
  cfg.scorer.lambda_imitation = sc.get<double>("lambda_imitation");
  cfg.scorer.sigma_imitation = sc.get<double>("sigma_imitation");
  cfg.scorer.rotation_range = sc.get<double>("rotation_range");
  cfg.scorer.k_topk = sc.get<std::size_t>("k_topk");
  cfg.scorer.refine_delta = sc.get<double>("refine_delta");
  cfg.scorer.refine_weight = sc.get<double>("refine_weight");
  cfg.scorer.ema_decay = sc.get<double>("ema_decay");
  cfg.scorer.refine_into_trunk = sc.get<bool>("refine_into_trunk");
  sc.finish();

  Reader ev(top.section("eval"), "eval.");
  cfg.eval.selector = selector_from_name(ev.get<std::string>("selector"));
  cfg.eval.n_dp = ev.get<std::size_t>("n_dp");
  Reader s2(ev.section("stage2"), "eval.stage2.");
  cfg.eval.stage2.rotation_range = s2.get<double>("rotation_range");
  cfg.eval.stage2.noise_sigma = s2.get<double>("noise_sigma");
  cfg.eval.stage2.dropout_frac = s2.get<double>("dropout_frac");
  s2.finish();
  ev.finish();
  top.finish();

  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("malformed config JSON in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config " + path);
  out << to_json(cfg).dump(2) << '\n';
}

void validate(const ExperimentConfig& cfg) {
  const auto fail = [](const std::string& msg) {
    throw std::invalid_argument("config: " + msg);
  };
  if (cfg.scenes.train == 0) fail("scenes.train must be positive");
  if (cfg.scenes.eval == 0) fail("scenes.eval must be positive");
  if (!(cfg.scenes.hard_fraction >= 0.0 && cfg.scenes.hard_fraction <= 1.0)) {
    fail("scenes.hard_fraction must lie in [0, 1]");
  }
  if (cfg.vocab.k_xl == 0 || cfg.vocab.k_l == 0) fail("vocabulary sizes must be positive");
  if (cfg.vocab.k_xl > cfg.vocab.n_samples) fail("vocab.k_xl exceeds vocab.n_samples");
  if (cfg.vocab.k_l > cfg.vocab.n_samples) fail("vocab.k_l exceeds vocab.n_samples");
  if (cfg.vocab.k_xl <= cfg.vocab.k_l) fail("vocab.k_xl must exceed vocab.k_l");
  if (cfg.generator.steps < 1) fail("generator.steps must be >= 1");
  if (!(cfg.generator.beta_min > 0.0 && cfg.generator.beta_min <= cfg.generator.beta_max &&
        cfg.generator.beta_max < 1.0)) {
    fail("generator betas must satisfy 0 < beta_min <= beta_max < 1");
  }
  if (cfg.generator.epochs == 0 || cfg.scorer.epochs == 0) fail("epochs must be positive");
  if (cfg.generator.hidden == 0) fail("generator.hidden must be positive");
  if (!(cfg.scorer.dropout_rate >= 0.0 && cfg.scorer.dropout_rate < 1.0)) {
    fail("scorer.dropout_rate must lie in [0, 1)");
  }
  if (cfg.scorer.sigma_imitation <= 0.0) fail("scorer.sigma_imitation must be positive");
  if (cfg.scorer.rotation_range < 0.0 ||
      cfg.scorer.rotation_range > std::numbers::pi / 6.0) {
    fail("scorer.rotation_range must lie in [0, pi/6]");
  }
  if (cfg.scorer.refine_delta < 0.0) fail("scorer.refine_delta must be >= 0");
  if (!(cfg.scorer.ema_decay >= 0.0 && cfg.scorer.ema_decay <= 1.0)) {
    fail("scorer.ema_decay must lie in [0, 1]");
  }
  if (cfg.eval.stage2.rotation_range < 0.0 ||
      cfg.eval.stage2.rotation_range > std::numbers::pi / 6.0) {
    fail("eval.stage2.rotation_range must lie in [0, pi/6]");
  }
  if (cfg.eval.stage2.noise_sigma < 0.0) fail("eval.stage2.noise_sigma must be >= 0");
  if (!(cfg.eval.stage2.dropout_frac >= 0.0 && cfg.eval.stage2.dropout_frac < 1.0)) {
    fail("eval.stage2.dropout_frac must lie in [0, 1)");
  }
  const bool uses_dp = cfg.eval.selector != Selector::kXl;
  if (uses_dp && cfg.eval.n_dp == 0) {
    fail("eval.n_dp must be positive when the selector includes dynamic proposals");
  }
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  json j = to_json(cfg);
  j.erase("out_dir");
  return fnv1a64(j.dump());
}

std::uint64_t dataset_hash(const ExperimentConfig& cfg) {
  const json j = {{"master_seed", cfg.master_seed},
                  {"scenes",
                   {{"train", cfg.scenes.train},
                    {"eval", cfg.scenes.eval},
                    {"hard_fraction", cfg.scenes.hard_fraction}}},
                  {"vocab",
                   {{"n_samples", cfg.vocab.n_samples},
                    {"k_xl", cfg.vocab.k_xl},
                    {"k_l", cfg.vocab.k_l}}}};
  return fnv1a64(j.dump());
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace gtrs::config
