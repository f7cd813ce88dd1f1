#include "gtrs/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "gtrs/rng.hpp"

namespace gtrs::harness {

namespace fs = std::filesystem;
using io::json;

// ---------------------------------------------------------------- paths

fs::path Paths::vocab_file(vocab::Tag tag) const {
  return dataset_dir() / ("vocab-" + std::string(vocab::tag_name(tag)) + ".json");
}

fs::path Paths::train_shard(std::size_t idx) const {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "train-%03zu.jsonl", idx);
  return dataset_dir() / buf;
}

fs::path Paths::checkpoint(const std::string& component, std::uint32_t instance) const {
  return checkpoints_dir() / (component + "-" + std::to_string(instance) + ".json");
}

fs::path Paths::train_log(const std::string& component, std::uint32_t instance) const {
  return logs_dir() / ("train-" + component + "-" + std::to_string(instance) + ".json");
}

// ---------------------------------------------------------------- seeds

std::uint64_t scene_seed(std::uint64_t master_seed, std::string_view split,
                         std::size_t index) {
  return Rng(master_seed).derive("scenes").derive(split).derive(index).key();
}

world::Difficulty scene_difficulty(std::size_t index, double hard_fraction) {
  // spreads the hard scenes evenly through the index range
  const double lo = std::floor(static_cast<double>(index) * hard_fraction);
  const double hi = std::floor(static_cast<double>(index + 1) * hard_fraction);
  return hi > lo ? world::Difficulty::kHard : world::Difficulty::kEasy;
}

world::ObservedScene canonical_obs(const world::Scene& scene) {
  return world::ObservedScene{scene, 0.0, 0.0, 0.0, scene.seed};
}

namespace {

std::uint64_t vocab_pool_seed(std::uint64_t master_seed) {
  return Rng(master_seed).derive("vocab").key();
}

std::uint64_t init_seed_for(std::uint64_t master_seed, const std::string& component,
                            std::uint32_t instance) {
  return Rng(master_seed).derive("init").derive(component).derive(instance).key();
}

// Training identity: everything that must match for a checkpoint to be
// resumable. Epoch counts are deliberately excluded so a run can be
// extended; the dataset hash pins seeds, scene counts and vocabularies.
std::uint64_t train_hash_for(const config::ExperimentConfig& cfg,
                             const std::string& component, std::uint32_t instance) {
  json j{{"dataset_hash", config::hash_hex(config::dataset_hash(cfg))},
         {"component", component},
         {"instance", instance}};
  if (component == "generator") {
    j["hp"] = {{"steps", cfg.generator.steps},
               {"beta_min", cfg.generator.beta_min},
               {"beta_max", cfg.generator.beta_max},
               {"hidden", cfg.generator.hidden},
               {"lr", cfg.generator.lr}};
  } else {
    j["hp"] = {{"lr", cfg.scorer.lr},
               {"dropout_rate", cfg.scorer.dropout_rate},
               {"lambda_imitation", cfg.scorer.lambda_imitation},
               {"sigma_imitation", cfg.scorer.sigma_imitation}};
    if (component == "aug") {
      j["aug"] = {{"rotation_range", cfg.scorer.rotation_range},
                  {"k_topk", cfg.scorer.k_topk},
                  {"refine_delta", cfg.scorer.refine_delta},
                  {"refine_weight", cfg.scorer.refine_weight},
                  {"ema_decay", cfg.scorer.ema_decay},
                  {"refine_into_trunk", cfg.scorer.refine_into_trunk}};
    }
  }
  return fnv1a64(j.dump());
}

std::uint64_t parse_hash(const json& j, const char* key) {
  return std::stoull(j.at(key).get<std::string>(), nullptr, 16);
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

vocab::Vocabulary load_or_build_vocab(const config::ExperimentConfig& cfg, vocab::Tag tag,
                                      std::size_t k) {
  const Paths paths{cfg.out_dir};
  const fs::path file = paths.vocab_file(tag);
  const std::uint64_t seed = vocab_pool_seed(cfg.master_seed);
  if (fs::exists(file)) {
    vocab::Vocabulary v = io::vocabulary_from_json(io::read_json_file(file.string()));
    if (v.tag != tag || v.seed != seed || v.size() != k) {
      throw std::runtime_error("vocabulary file " + file.string() +
                               " disagrees with the config; use a clean out_dir");
    }
    return v;
  }
  vocab::Vocabulary v = vocab::build_vocabulary(cfg.vocab.n_samples, k, seed, tag);
  io::write_json_file(file.string(), io::to_json(v));
  return v;
}

SceneRecord make_record(std::uint64_t seed, world::Difficulty difficulty,
                        const vocab::Vocabulary& v_xl) {
  SceneRecord rec;
  rec.scene = world::generate_scene(seed, difficulty, v_xl.trajectories);
  rec.labels.reserve(v_xl.size());
  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t i = 0; i < v_xl.size(); ++i) {
    rec.labels.push_back(metrics::evaluate_metrics(rec.scene, v_xl.trajectories[i]));
    const double score = metrics::aggregate_epdms(rec.labels.back());
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  rec.gt = v_xl.trajectories[best];
  return rec;
}

json record_to_json(const SceneRecord& rec) {
  json labels = json::array();
  for (const auto& s : rec.labels) labels.push_back(io::to_json(s));
  return json{{"scene", io::to_json(rec.scene)},
              {"gt", io::to_json(rec.gt)},
              {"labels", labels}};
}

SceneRecord record_from_json(const json& j) {
  SceneRecord rec;
  rec.scene = io::scene_from_json(j.at("scene"));
  rec.gt = io::trajectory_from_json(j.at("gt"));
  for (const auto& l : j.at("labels")) rec.labels.push_back(io::subscores_from_json(l));
  return rec;
}

json manifest_checked(const config::ExperimentConfig& cfg) {
  const Paths paths{cfg.out_dir};
  if (!fs::exists(paths.manifest())) {
    throw std::runtime_error("dataset not built: missing " + paths.manifest().string());
  }
  const json m = io::read_json_file(paths.manifest().string());
  const std::string want = config::hash_hex(config::dataset_hash(cfg));
  const std::string have = m.at("dataset_hash").get<std::string>();
  if (have != want) {
    throw std::runtime_error("dataset hash mismatch: manifest carries " + have +
                             " but the config requires " + want +
                             "; rebuild the dataset or fix the config");
  }
  return m;
}

std::vector<world::Scene> load_eval_scenes(const config::ExperimentConfig& cfg) {
  const Paths paths{cfg.out_dir};
  std::vector<world::Scene> scenes;
  for (const json& row : io::read_jsonl(paths.eval_scenes().string())) {
    scenes.push_back(io::scene_from_json(row.at("scene")));
  }
  if (scenes.size() != cfg.scenes.eval) {
    throw std::runtime_error("eval scene file has " + std::to_string(scenes.size()) +
                             " scenes, config expects " + std::to_string(cfg.scenes.eval));
  }
  return scenes;
}

}  // namespace

// ------------------------------------------------------------- building

void cmd_vocab_build(const config::ExperimentConfig& cfg) {
  config::validate(cfg);
  const Paths paths{cfg.out_dir};
  fs::create_directories(paths.dataset_dir());
  const auto v_xl = load_or_build_vocab(cfg, vocab::Tag::kXl, cfg.vocab.k_xl);
  const auto v_l = load_or_build_vocab(cfg, vocab::Tag::kL, cfg.vocab.k_l);
  std::cout << "vocab ready: |xl| = " << v_xl.size() << ", |l| = " << v_l.size() << '\n';
}

void cmd_dataset_build(const config::ExperimentConfig& cfg) {
  config::validate(cfg);
  const Paths paths{cfg.out_dir};
  fs::create_directories(paths.dataset_dir());

  const std::string dhash = config::hash_hex(config::dataset_hash(cfg));
  if (fs::exists(paths.manifest())) {
    const json m = io::read_json_file(paths.manifest().string());
    const std::string have = m.at("dataset_hash").get<std::string>();
    if (have == dhash) {
      std::cout << "dataset already built (hash " << dhash << ")\n";
      return;
    }
    throw std::runtime_error("out_dir holds a dataset with hash " + have +
                             " but the config requires " + dhash +
                             "; use a clean out_dir");
  }

  const auto v_xl = load_or_build_vocab(cfg, vocab::Tag::kXl, cfg.vocab.k_xl);
  load_or_build_vocab(cfg, vocab::Tag::kL, cfg.vocab.k_l);

  const std::size_t n_shards = (cfg.scenes.train + kShardScenes - 1) / kShardScenes;
  json shard_list = json::array();
  for (std::size_t s = 0; s < n_shards; ++s) {
    const std::size_t begin = s * kShardScenes;
    const std::size_t end = std::min(begin + kShardScenes, cfg.scenes.train);
    const fs::path file = paths.train_shard(s);
    const std::size_t expect = end - begin;
    const bool reusable = fs::exists(file) && io::count_lines(file.string()) == expect;
    if (!reusable) {
      std::vector<json> rows;
      rows.reserve(expect);
      for (std::size_t i = begin; i < end; ++i) {
        const auto rec = make_record(scene_seed(cfg.master_seed, "train", i),
                                     scene_difficulty(i, cfg.scenes.hard_fraction), v_xl);
        rows.push_back(record_to_json(rec));
      }
      io::write_jsonl(file.string(), rows);
    }
    shard_list.push_back(
        {{"file", file.filename().string()}, {"scenes", expect}});
    std::cout << "shard " << (s + 1) << "/" << n_shards
              << (reusable ? " reused" : " written") << '\n';
  }

  const fs::path eval_file = paths.eval_scenes();
  if (!(fs::exists(eval_file) && io::count_lines(eval_file.string()) == cfg.scenes.eval)) {
    std::vector<json> rows;
    rows.reserve(cfg.scenes.eval);
    for (std::size_t i = 0; i < cfg.scenes.eval; ++i) {
      const world::Scene scene =
          world::generate_scene(scene_seed(cfg.master_seed, "eval", i),
                                scene_difficulty(i, cfg.scenes.hard_fraction),
                                v_xl.trajectories);
      rows.push_back(json{{"scene", io::to_json(scene)}});
    }
    io::write_jsonl(eval_file.string(), rows);
  }

  const json manifest{{"kind", "dataset_manifest"},
                      {"dataset_hash", dhash},
                      {"master_seed", cfg.master_seed},
                      {"scenes",
                       {{"train", cfg.scenes.train},
                        {"eval", cfg.scenes.eval},
                        {"hard_fraction", cfg.scenes.hard_fraction}}},
                      {"vocab",
                       {{"n_samples", cfg.vocab.n_samples},
                        {"k_xl", cfg.vocab.k_xl},
                        {"k_l", cfg.vocab.k_l}}},
                      {"shard_scenes", kShardScenes},
                      {"shards", shard_list},
                      {"label_rows", cfg.scenes.train * cfg.vocab.k_xl}};
  io::write_json_file(paths.manifest().string(), manifest, 2);
  std::cout << "dataset built: " << cfg.scenes.train << " train scenes, "
            << cfg.scenes.eval << " eval scenes, hash " << dhash << '\n';
}

Dataset load_dataset(const config::ExperimentConfig& cfg) {
  const json manifest = manifest_checked(cfg);
  const Paths paths{cfg.out_dir};

  Dataset ds;
  ds.dataset_hash = config::dataset_hash(cfg);
  ds.v_xl = io::vocabulary_from_json(
      io::read_json_file(paths.vocab_file(vocab::Tag::kXl).string()));
  ds.v_l = io::vocabulary_from_json(
      io::read_json_file(paths.vocab_file(vocab::Tag::kL).string()));

  for (const auto& shard : manifest.at("shards")) {
    const fs::path file = paths.dataset_dir() / shard.at("file").get<std::string>();
    for (const json& row : io::read_jsonl(file.string())) {
      ds.train.push_back(record_from_json(row));
      if (ds.train.back().labels.size() != ds.v_xl.size()) {
        throw std::runtime_error("label row width mismatch in " + file.string());
      }
    }
  }
  if (ds.train.size() != cfg.scenes.train) {
    throw std::runtime_error("dataset holds " + std::to_string(ds.train.size()) +
                             " train scenes, config expects " +
                             std::to_string(cfg.scenes.train));
  }
  ds.eval_scenes = load_eval_scenes(cfg);
  return ds;
}

// ------------------------------------------------------------ training

namespace {

void write_train_log(const fs::path& path, const std::string& component,
                     std::uint32_t instance, const config::ExperimentConfig& cfg,
                     const json& epochs) {
  io::write_json_file(path.string(),
                      json{{"kind", "train_log"},
                           {"component", component},
                           {"instance", instance},
                           {"config_hash", config::hash_hex(config::config_hash(cfg))},
                           {"epochs", epochs}},
                      2);
}

json load_log_epochs(const fs::path& path) {
  if (!fs::exists(path)) return json::array();
  return io::read_json_file(path.string()).at("epochs");
}

nn::Adam adam_from_checkpoint(const json& j) {
  const json& a = j.at("adam");
  nn::AdamConfig cfg{a.at("lr").get<double>(), a.at("beta1").get<double>(),
                     a.at("beta2").get<double>(), a.at("eps").get<double>()};
  nn::Adam opt(cfg);
  io::adam_from_json(a, opt);
  return opt;
}

void save_generator_checkpoint(const fs::path& path, const config::ExperimentConfig& cfg,
                               std::uint32_t instance, std::uint64_t thash,
                               const dp::GeneratorModel& model, const nn::Adam& opt,
                               std::size_t epochs_done) {
  const json j{{"kind", "generator_checkpoint"},
               {"config_hash", config::hash_hex(config::config_hash(cfg))},
               {"dataset_hash", config::hash_hex(config::dataset_hash(cfg))},
               {"train_hash", config::hash_hex(thash)},
               {"instance", instance},
               {"init_seed", model.init_seed},
               {"hidden", cfg.generator.hidden},
               {"steps", cfg.generator.steps},
               {"beta_min", cfg.generator.beta_min},
               {"beta_max", cfg.generator.beta_max},
               {"epochs_done", epochs_done},
               {"delta_mean", model.delta_mean},
               {"delta_std", model.delta_std},
               {"params", io::params_to_json(model.params)},
               {"adam", io::adam_to_json(opt)}};
  io::write_json_file(path.string(), j);
}

void save_scorer_checkpoint(const fs::path& path, const config::ExperimentConfig& cfg,
                            const std::string& component, std::uint32_t instance,
                            std::uint64_t thash, const scorer::ScorerModel& model,
                            const nn::Adam& opt, const nn::EmaShadow* teacher,
                            std::size_t epochs_done) {
  json ema = nullptr;
  if (teacher != nullptr) {
    ema = json{{"decay", teacher->decay()}, {"params", io::params_to_json(teacher->shadow())}};
  }
  const json j{{"kind", "scorer_checkpoint"},
               {"component", component},
               {"variant", std::string(scorer::variant_name(model.variant))},
               {"training_vocab", component == "aug" ? "l" : "xl"},
               {"config_hash", config::hash_hex(config::config_hash(cfg))},
               {"dataset_hash", config::hash_hex(config::dataset_hash(cfg))},
               {"train_hash", config::hash_hex(thash)},
               {"instance", instance},
               {"init_seed", model.init_seed},
               {"feature_dim", model.feature_dim},
               {"epochs_done", epochs_done},
               {"params", io::params_to_json(model.params)},
               {"adam", io::adam_to_json(opt)},
               {"ema", ema}};
  io::write_json_file(path.string(), j);
}

void train_generator(const config::ExperimentConfig& cfg, const Dataset& ds,
                     std::uint32_t instance) {
  const Paths paths{cfg.out_dir};
  const std::uint64_t thash = train_hash_for(cfg, "generator", instance);
  const fs::path ckpt_path = paths.checkpoint("generator", instance);
  const fs::path log_path = paths.train_log("generator", instance);

  dp::GeneratorModel model;
  nn::Adam opt(nn::AdamConfig{.lr = cfg.generator.lr});
  std::size_t done = 0;
  json log_epochs = json::array();

  if (fs::exists(ckpt_path)) {
    LoadedGenerator lg = load_generator_checkpoint(ckpt_path);
    if (lg.train_hash != thash) {
      throw std::runtime_error("checkpoint " + ckpt_path.string() +
                               " was trained with different settings (train hash " +
                               config::hash_hex(lg.train_hash) + " vs " +
                               config::hash_hex(thash) + ")");
    }
    model = std::move(lg.model);
    opt = std::move(lg.opt);
    done = lg.epochs_done;
    log_epochs = load_log_epochs(log_path);
  } else {
    model = dp::make_generator(init_seed_for(cfg.master_seed, "generator", instance),
                               cfg.generator.hidden);
    std::vector<geom::Trajectory> gts;
    gts.reserve(ds.train.size());
    for (const auto& rec : ds.train) gts.push_back(rec.gt);
    dp::fit_normalizer(model, gts);
  }
  if (done >= cfg.generator.epochs) {
    std::cout << "generator already trained for " << done << " epochs\n";
    return;
  }

  const auto sched =
      dp::make_schedule(cfg.generator.steps, cfg.generator.beta_min, cfg.generator.beta_max);
  std::vector<world::SceneFeatures> feats;
  feats.reserve(ds.train.size());
  for (const auto& rec : ds.train) feats.push_back(world::encode_scene(canonical_obs(rec.scene)));

  const Rng train_rng =
      Rng(cfg.master_seed).derive("train").derive("generator").derive(instance);
  for (std::size_t epoch = done; epoch < cfg.generator.epochs; ++epoch) {
    const Rng erng = train_rng.derive(epoch);
    double sum = 0.0;
    for (const std::size_t idx : shuffled_indices(ds.train.size(), erng.derive("order"))) {
      Rng batch = erng.derive("batch").derive(idx);
      sum += dp::train_step_generator(model, opt, feats[idx], ds.train[idx].gt, sched, batch);
    }
    const double mean = sum / static_cast<double>(ds.train.size());
    log_epochs.push_back(
        {{"epoch", epoch}, {"loss", mean}, {"adam_steps", opt.step_count()}});
    save_generator_checkpoint(ckpt_path, cfg, instance, thash, model, opt, epoch + 1);
    write_train_log(log_path, "generator", instance, cfg, log_epochs);
    std::cout << "[generator " << instance << "] epoch " << epoch << " loss " << mean
              << '\n';
  }
}

void train_scorer(const config::ExperimentConfig& cfg, const Dataset& ds,
                  const std::string& component, std::uint32_t instance) {
  const bool is_aug = component == "aug";
  const Paths paths{cfg.out_dir};
  const std::uint64_t thash = train_hash_for(cfg, component, instance);
  const fs::path ckpt_path = paths.checkpoint(component, instance);
  const fs::path log_path = paths.train_log(component, instance);

  const vocab::Vocabulary& vtrain = is_aug ? ds.v_l : ds.v_xl;

  // The dataset stores labels only for the super-dense vocabulary; the aug
  // variant trains on the inference vocabulary, so label it here.
  std::vector<std::vector<metrics::SubScores>> aug_labels;
  if (is_aug) {
    aug_labels.resize(ds.train.size());
    for (std::size_t s = 0; s < ds.train.size(); ++s) {
      aug_labels[s].reserve(vtrain.size());
      for (const auto& cand : vtrain.trajectories) {
        aug_labels[s].push_back(metrics::evaluate_metrics(ds.train[s].scene, cand));
      }
    }
  }

  scorer::ScorerModel model;
  nn::Adam opt(nn::AdamConfig{.lr = cfg.scorer.lr});
  std::optional<nn::EmaShadow> teacher;
  std::size_t done = 0;
  json log_epochs = json::array();

  if (fs::exists(ckpt_path)) {
    LoadedScorer ls = load_scorer_checkpoint(ckpt_path);
    if (ls.train_hash != thash) {
      throw std::runtime_error("checkpoint " + ckpt_path.string() +
                               " was trained with different settings (train hash " +
                               config::hash_hex(ls.train_hash) + " vs " +
                               config::hash_hex(thash) + ")");
    }
    model = std::move(ls.model);
    opt = std::move(ls.opt);
    teacher = std::move(ls.ema);
    done = ls.epochs_done;
    log_epochs = load_log_epochs(log_path);
  } else {
    model = scorer::make_scorer(is_aug ? scorer::Variant::kAug : scorer::Variant::kDense,
                                init_seed_for(cfg.master_seed, component, instance));
    if (is_aug) teacher = nn::EmaShadow(model.params, cfg.scorer.ema_decay);
  }
  if (done >= cfg.scorer.epochs) {
    std::cout << component << " already trained for " << done << " epochs\n";
    return;
  }

  scorer::TrainOptions opts;
  opts.dropout_rate = cfg.scorer.dropout_rate;
  opts.lambda_imitation = cfg.scorer.lambda_imitation;
  opts.sigma_imitation = cfg.scorer.sigma_imitation;
  opts.rotation_range = cfg.scorer.rotation_range;
  opts.k_topk = cfg.scorer.k_topk;
  opts.refine_delta = cfg.scorer.refine_delta;
  opts.refine_weight = cfg.scorer.refine_weight;
  opts.ema_decay = cfg.scorer.ema_decay;
  opts.refine_into_trunk = cfg.scorer.refine_into_trunk;

  std::vector<world::SceneFeatures> feats;
  if (!is_aug) {
    feats.reserve(ds.train.size());
    for (const auto& rec : ds.train) {
      feats.push_back(world::encode_scene(canonical_obs(rec.scene)));
    }
  }

  const Rng train_rng =
      Rng(cfg.master_seed).derive("train").derive(component).derive(instance);
  for (std::size_t epoch = done; epoch < cfg.scorer.epochs; ++epoch) {
    const Rng erng = train_rng.derive(epoch);
    double sum = 0.0, refine_sum = 0.0;
    for (const std::size_t idx : shuffled_indices(ds.train.size(), erng.derive("order"))) {
      const Rng batch = erng.derive("batch").derive(idx);
      scorer::BatchStats stats;
      if (is_aug) {
        const double theta =
            batch.derive("rotation").uniform(-opts.rotation_range, opts.rotation_range);
        std::vector<geom::Trajectory> rotated;
        rotated.reserve(vtrain.size());
        for (const auto& t : vtrain.trajectories) {
          rotated.push_back(geom::rotate_traj(t, theta));
        }
        const geom::Trajectory rot_gt = geom::rotate_traj(ds.train[idx].gt, theta);
        const world::SceneFeatures fs_rot = world::encode_scene(
            world::ObservedScene{ds.train[idx].scene, theta, 0.0, 0.0,
                                 ds.train[idx].scene.seed});
        stats = scorer::scorer_train_step(model, opt, teacher ? &*teacher : nullptr,
                                          fs_rot, rotated, aug_labels[idx], rot_gt, opts,
                                          batch);
      } else {
        stats = scorer::scorer_train_step(model, opt, nullptr, feats[idx],
                                          vtrain.trajectories, ds.train[idx].labels,
                                          ds.train[idx].gt, opts, batch);
      }
      sum += stats.base_loss;
      refine_sum += stats.refine_loss;
    }
    const double n = static_cast<double>(ds.train.size());
    json entry{{"epoch", epoch}, {"loss", sum / n}, {"adam_steps", opt.step_count()}};
    if (is_aug) entry["refine_loss"] = refine_sum / n;
    log_epochs.push_back(entry);
    save_scorer_checkpoint(ckpt_path, cfg, component, instance, thash, model, opt,
                           teacher ? &*teacher : nullptr, epoch + 1);
    write_train_log(log_path, component, instance, cfg, log_epochs);
    std::cout << "[" << component << " " << instance << "] epoch " << epoch << " loss "
              << (sum / n) << '\n';
  }
}

}  // namespace

void cmd_train(const config::ExperimentConfig& cfg, const std::string& component,
               std::uint32_t instance) {
  if (component != "generator" && component != "dense" && component != "aug") {
    throw std::invalid_argument("unknown training component '" + component +
                                "' (expected generator, dense or aug)");
  }
  config::validate(cfg);
  const Dataset ds = load_dataset(cfg);
  const Paths paths{cfg.out_dir};
  fs::create_directories(paths.checkpoints_dir());
  fs::create_directories(paths.logs_dir());
  if (component == "generator") {
    train_generator(cfg, ds, instance);
  } else {
    train_scorer(cfg, ds, component, instance);
  }
}

// ------------------------------------------------------------- loading

LoadedScorer load_scorer_checkpoint(const fs::path& path) {
  const json j = io::read_json_file(path.string());
  if (j.value("kind", "") != "scorer_checkpoint") {
    throw std::runtime_error(path.string() + " is not a scorer checkpoint");
  }
  LoadedScorer out;
  out.model = scorer::make_scorer(
      scorer::variant_from_name(j.at("variant").get<std::string>()),
      j.at("init_seed").get<std::uint64_t>(), j.at("feature_dim").get<std::size_t>());
  out.model.params = io::params_from_json(j.at("params"));
  out.opt = adam_from_checkpoint(j);
  if (!j.at("ema").is_null()) {
    nn::EmaShadow ema(out.model.params, j.at("ema").at("decay").get<double>());
    ema.shadow() = io::params_from_json(j.at("ema").at("params"));
    out.ema = std::move(ema);
  }
  out.epochs_done = j.at("epochs_done").get<std::size_t>();
  out.config_hash = parse_hash(j, "config_hash");
  out.dataset_hash = parse_hash(j, "dataset_hash");
  out.train_hash = parse_hash(j, "train_hash");
  out.training_vocab = j.at("training_vocab").get<std::string>();
  out.instance = j.at("instance").get<std::uint32_t>();
  return out;
}

LoadedGenerator load_generator_checkpoint(const fs::path& path) {
  const json j = io::read_json_file(path.string());
  if (j.value("kind", "") != "generator_checkpoint") {
    throw std::runtime_error(path.string() + " is not a generator checkpoint");
  }
  LoadedGenerator out;
  out.model = dp::make_generator(j.at("init_seed").get<std::uint64_t>(),
                                 j.at("hidden").get<std::size_t>());
  out.model.params = io::params_from_json(j.at("params"));
  out.model.delta_mean = j.at("delta_mean").get<std::vector<double>>();
  out.model.delta_std = j.at("delta_std").get<std::vector<double>>();
  out.schedule = dp::make_schedule(j.at("steps").get<int>(), j.at("beta_min").get<double>(),
                                   j.at("beta_max").get<double>());
  out.opt = adam_from_checkpoint(j);
  out.epochs_done = j.at("epochs_done").get<std::size_t>();
  out.config_hash = parse_hash(j, "config_hash");
  out.dataset_hash = parse_hash(j, "dataset_hash");
  out.train_hash = parse_hash(j, "train_hash");
  out.instance = j.at("instance").get<std::uint32_t>();
  return out;
}

// ---------------------------------------------------------------- eval

namespace {

json stage_summary(const metrics::SubScores& mean, double epdms) {
  json s;
  const auto arr = mean.as_array();
  for (std::size_t m = 0; m < metrics::kMetricCount; ++m) {
    s[std::string(metrics::kMetricNames[m])] = arr[m];
  }
  s["epdms"] = epdms;
  return s;
}

void print_eval_table(const json& report) {
  const auto row = [](const std::string& name, const json& s) {
    std::ostringstream os;
    os << std::left << std::setw(8) << name << std::right << std::fixed;
    for (const auto& metric : metrics::kMetricNames) {
      os << std::setw(7) << std::setprecision(3) << s.at(std::string(metric)).get<double>();
    }
    os << std::setw(9) << std::setprecision(2) << s.at("epdms").get<double>();
    return os.str();
  };
  std::ostringstream head;
  head << std::left << std::setw(8) << "stage" << std::right;
  for (const auto& metric : metrics::kMetricNames) {
    std::string upper(metric);
    for (char& c : upper) c = static_cast<char>(std::toupper(c));
    head << std::setw(7) << upper;
  }
  head << std::setw(9) << "EPDMS";
  std::cout << head.str() << '\n';
  std::cout << row("stage1", report.at("stage1")) << '\n';
  std::cout << row("stage2", report.at("stage2")) << '\n';
  std::cout << "final EPDMS " << std::fixed << std::setprecision(2)
            << report.at("final_epdms").get<double>();
  if (!report.at("random_baseline").is_null()) {
    std::cout << "   (random V_dp baseline "
              << report.at("random_baseline").at("final_epdms").get<double>() << ")";
  }
  std::cout << '\n';
}

}  // namespace

io::json cmd_eval(const config::ExperimentConfig& cfg, const EvalRequest& req) {
  config::validate(cfg);
  if (req.scorer_checkpoints.empty()) {
    throw std::invalid_argument("eval needs at least one scorer checkpoint");
  }
  const Paths paths{cfg.out_dir};
  manifest_checked(cfg);
  const auto scenes = load_eval_scenes(cfg);

  const config::Selector sel = cfg.eval.selector;
  const bool uses_dp = sel != config::Selector::kXl;
  const std::size_t n_dp = uses_dp ? cfg.eval.n_dp : 0;

  vocab::Vocabulary v_static;
  if (sel == config::Selector::kXl || sel == config::Selector::kDpXl) {
    v_static = io::vocabulary_from_json(
        io::read_json_file(paths.vocab_file(vocab::Tag::kXl).string()));
  } else if (sel == config::Selector::kDpL) {
    v_static = io::vocabulary_from_json(
        io::read_json_file(paths.vocab_file(vocab::Tag::kL).string()));
  }  // kDpOnly keeps the static set empty

  const std::string want_dhash = config::hash_hex(config::dataset_hash(cfg));
  std::vector<scorer::ScorerModel> models;
  json members = json::array();
  std::vector<std::string> member_names;
  std::set<std::string> train_vocabs;
  for (const std::string& p : req.scorer_checkpoints) {
    LoadedScorer ls = load_scorer_checkpoint(p);
    if (config::hash_hex(ls.dataset_hash) != want_dhash) {
      throw std::runtime_error("checkpoint " + p + " carries dataset hash " +
                               config::hash_hex(ls.dataset_hash) +
                               " but the config requires " + want_dhash);
    }
    const std::string base = fs::path(p).stem().string();
    members.push_back({{"checkpoint", base},
                       {"variant", std::string(scorer::variant_name(ls.model.variant))},
                       {"training_vocab", ls.training_vocab}});
    member_names.push_back(base);
    train_vocabs.insert(ls.training_vocab);
    models.push_back(std::move(ls.model));
  }

  std::optional<LoadedGenerator> gen;
  if (n_dp > 0) {
    const std::string gpath = req.generator_checkpoint.empty()
                                  ? paths.checkpoint("generator", 0).string()
                                  : req.generator_checkpoint;
    gen = load_generator_checkpoint(gpath);
    if (config::hash_hex(gen->dataset_hash) != want_dhash) {
      throw std::runtime_error("generator checkpoint " + gpath + " carries dataset hash " +
                               config::hash_hex(gen->dataset_hash) +
                               " but the config requires " + want_dhash);
    }
  }

  const Rng eval_rng = Rng(cfg.master_seed).derive("eval");
  std::vector<double> e1s, e2s, re1s, re2s;
  metrics::SubScores sum1, sum2;
  json scene_rows = json::array();

  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const world::Scene& scene = scenes[i];
    const Rng srng = eval_rng.derive(i);

    const world::ObservedScene obs1 = canonical_obs(scene);
    Rng rot_rng = srng.derive("rotation");
    const double theta = rot_rng.uniform(-cfg.eval.stage2.rotation_range,
                                         cfg.eval.stage2.rotation_range);
    const world::ObservedScene obs2 =
        world::perturb_scene(scene, theta, cfg.eval.stage2.noise_sigma,
                             cfg.eval.stage2.dropout_frac, srng.derive("obs-seed").key());

    const auto inf1 = scorer::run_inference(
        models, obs1, v_static, gen ? &gen->model : nullptr,
        gen ? &gen->schedule : nullptr, n_dp, srng.derive("infer1"),
        cfg.scorer.lambda_imitation);
    const auto inf2 = scorer::run_inference(
        models, obs2, v_static, gen ? &gen->model : nullptr,
        gen ? &gen->schedule : nullptr, n_dp, srng.derive("infer2"),
        cfg.scorer.lambda_imitation);

    // Stage-2 truth: the same world re-observed in the rotated frame. The
    // feature noise and dropout are pure observation corruption, so only
    // the rotation carries into the world the oracle scores against.
    const world::Scene truth2 = world::rotate_scene(scene, theta);

    const metrics::SubScores s1 = metrics::evaluate_metrics(scene, inf1.trajectory);
    const metrics::SubScores s2 = metrics::evaluate_metrics(truth2, inf2.trajectory);
    const double e1 = metrics::aggregate_epdms(s1);
    const double e2 = metrics::aggregate_epdms(s2);
    e1s.push_back(e1);
    e2s.push_back(e2);
    const auto a1 = s1.as_array(), a2 = s2.as_array();
    auto acc1 = sum1.as_array(), acc2 = sum2.as_array();
    for (std::size_t m = 0; m < metrics::kMetricCount; ++m) {
      acc1[m] += a1[m];
      acc2[m] += a2[m];
    }
    sum1 = metrics::SubScores::from_array(acc1);
    sum2 = metrics::SubScores::from_array(acc2);

    json row{{"seed", scene.seed},
             {"epdms1", e1},
             {"epdms2", e2},
             {"pick1", inf1.index},
             {"pick2", inf2.index}};
    if (n_dp > 0) {
      Rng rrng = srng.derive("random");
      const std::size_t r1 = inf1.n_static + static_cast<std::size_t>(rrng.below(n_dp));
      const std::size_t r2 = inf2.n_static + static_cast<std::size_t>(rrng.below(n_dp));
      const double re1 = metrics::aggregate_epdms(
          metrics::evaluate_metrics(scene, inf1.merged.trajectories[r1]));
      const double re2 = metrics::aggregate_epdms(
          metrics::evaluate_metrics(truth2, inf2.merged.trajectories[r2]));
      re1s.push_back(re1);
      re2s.push_back(re2);
      row["random_epdms1"] = re1;
      row["random_epdms2"] = re2;
    }
    scene_rows.push_back(std::move(row));
  }

  const auto ts = metrics::two_stage_score(e1s, e2s);
  const double inv_n = 1.0 / static_cast<double>(scenes.size());
  auto m1 = sum1.as_array(), m2 = sum2.as_array();
  for (std::size_t m = 0; m < metrics::kMetricCount; ++m) {
    m1[m] *= inv_n;
    m2[m] *= inv_n;
  }

  json random_baseline = nullptr;
  if (!re1s.empty()) {
    const auto rts = metrics::two_stage_score(re1s, re2s);
    random_baseline = json{{"stage1_epdms", rts.stage1_mean},
                           {"stage2_epdms", rts.stage2_mean},
                           {"final_epdms", rts.final_score}};
  }

  std::string training_vocab;
  for (const auto& tv : train_vocabs) {
    if (!training_vocab.empty()) training_vocab += "+";
    training_vocab += tv;
  }

  json report{{"kind", "epdms_report"},
              {"config_hash", config::hash_hex(config::config_hash(cfg))},
              {"dataset_hash", want_dhash},
              {"variant", models.size() == 1
                              ? std::string(scorer::variant_name(models[0].variant))
                              : std::string("ensemble")},
              {"training_vocab", training_vocab},
              {"inference_vocab", std::string(config::selector_name(sel))},
              {"checkpoints", member_names},
              {"members", members},
              {"n_scenes", scenes.size()},
              {"stage1", stage_summary(metrics::SubScores::from_array(m1), ts.stage1_mean)},
              {"stage2", stage_summary(metrics::SubScores::from_array(m2), ts.stage2_mean)},
              {"final_epdms", ts.final_score},
              {"random_baseline", random_baseline},
              {"scenes", scene_rows}};
  io::validate_report(report);

  fs::create_directories(paths.reports_dir());
  std::string joined;
  for (const auto& name : member_names) {
    if (!joined.empty()) joined += "+";
    joined += name;
  }
  const fs::path out = paths.reports_dir() /
                       ("eval-" + std::string(config::selector_name(sel)) + "-" + joined +
                        ".json");
  io::write_json_file(out.string(), report, 2);
  std::cout << "report written to " << out.string() << '\n';
  print_eval_table(report);
  return report;
}

// --------------------------------------------------------------- report

void cmd_report(const fs::path& dir) {
  if (!fs::exists(dir)) throw std::runtime_error("no such directory: " + dir.string());
  struct Row {
    std::string variant, training_vocab, inference_vocab;
    double e1, e2, final_epdms;
  };
  std::vector<Row> rows;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    json j;
    try {
      j = io::read_json_file(entry.path().string());
    } catch (const std::exception&) {
      continue;  // unrelated or unreadable json is not ours to judge
    }
    if (!j.is_object() || j.value("kind", "") != "epdms_report") continue;
    io::validate_report(j);
    rows.push_back(Row{j.at("variant").get<std::string>(),
                       j.at("training_vocab").get<std::string>(),
                       j.at("inference_vocab").get<std::string>(),
                       j.at("stage1").at("epdms").get<double>(),
                       j.at("stage2").at("epdms").get<double>(),
                       j.at("final_epdms").get<double>()});
  }
  if (rows.empty()) {
    throw std::runtime_error("no evaluation reports found under " + dir.string());
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.final_epdms != b.final_epdms) return a.final_epdms > b.final_epdms;
    if (a.variant != b.variant) return a.variant < b.variant;
    return a.inference_vocab < b.inference_vocab;
  });

  // CSV: numbers rendered by the JSON writer so the file re-parses to the
  // exact doubles the reports contain.
  std::ostringstream csv;
  csv << "variant,training_vocab,inference_vocab,epdms1,epdms2,epdms\n";
  for (const Row& r : rows) {
    csv << r.variant << ',' << r.training_vocab << ',' << r.inference_vocab << ','
        << json(r.e1).dump() << ',' << json(r.e2).dump() << ',' << json(r.final_epdms).dump()
        << '\n';
  }

  std::ostringstream txt;
  txt << std::left << std::setw(12) << "variant" << std::setw(16) << "training_vocab"
      << std::setw(16) << "inference_vocab" << std::right << std::setw(9) << "EPDMS1"
      << std::setw(9) << "EPDMS2" << std::setw(9) << "EPDMS" << '\n';
  txt << std::string(71, '-') << '\n';
  txt << std::fixed << std::setprecision(2);
  for (const Row& r : rows) {
    txt << std::left << std::setw(12) << r.variant << std::setw(16) << r.training_vocab
        << std::setw(16) << r.inference_vocab << std::right << std::setw(9) << r.e1
        << std::setw(9) << r.e2 << std::setw(9) << r.final_epdms << '\n';
  }

  {
    std::ofstream out(dir / "report.csv");
    if (!out) throw std::runtime_error("cannot write report.csv");
    out << csv.str();
  }
  {
    std::ofstream out(dir / "report.txt");
    if (!out) throw std::runtime_error("cannot write report.txt");
    out << txt.str();
  }
  std::cout << txt.str();
}

}  // namespace gtrs::harness
