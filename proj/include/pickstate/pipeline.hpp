#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "pickstate/core.hpp"
#include "pickstate/dataset.hpp"
#include "pickstate/eval.hpp"
#include "pickstate/forest.hpp"
#include "pickstate/io.hpp"
#include "pickstate/mlp.hpp"
#include "pickstate/preprocess.hpp"
#include "pickstate/simulator.hpp"

namespace pickstate {

// ---------------------------------------------------------------------------
// One config object drives every stage. Each stage draws its seed from the
// master seed with a fixed tag, so running subcommands separately with the
// same master seed reproduces the single-shot pipeline bit for bit.
// ---------------------------------------------------------------------------

struct EvalConfig {
  int debounce_k = 2;
  int importance_repeats = 10;

  void validate() const {
    if (debounce_k < 1) throw ConfigError("debounce_k must be >= 1");
    if (importance_repeats < 1) throw ConfigError("importance_repeats must be >= 1");
  }
};

struct PipelineConfig {
  RngSeed master_seed{42};
  int n_success = 72;
  int n_fail = 11;
  SimConfig simulator;
  PreprocessConfig preprocess;
  SplitFractions split;
  AugmentConfig augment;
  WindowingConfig windowing;
  ForestConfig forest;
  MlpConfig mlp;
  EvalConfig eval;

  void validate() const {
    if (n_success < 0 || n_fail < 0 || n_success + n_fail < 3)
      throw ConfigError("corpus needs at least 3 trials");
    simulator.validate();
    preprocess.validate();
    split.validate();
    augment.validate();
    windowing.validate();
    forest.validate();
    mlp.validate();
    eval.validate();
  }
};

namespace config_detail {

inline void check_keys(const Json& j, const char* section,
                       std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    throw ConfigError(std::string(section) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok)
      throw ConfigError(std::string("unknown config key ") + section + "." + key);
  }
}

inline Json range_to_json(const Range& r) { return Json::array({r.lo, r.hi}); }

inline Range range_from_json(const Json& j, const char* name) {
  if (!j.is_array() || j.size() != 2)
    throw ConfigError(std::string(name) + " must be a [lo, hi] pair");
  return Range{j[0].get<double>(), j[1].get<double>()};
}

}  // namespace config_detail

inline Json sim_config_to_json(const SimConfig& c) {
  Json j;
  j["sample_rate_hz"] = c.sample_rate_hz;
  j["duration_s"] = config_detail::range_to_json(c.duration_s);
  j["event_fraction"] = config_detail::range_to_json(c.event_fraction);
  j["noise_std_frac"] = c.noise_std_frac;
  j["pull_slope_n_per_s"] = config_detail::range_to_json(c.pull_slope_n_per_s);
  j["fruit_weight_n"] = config_detail::range_to_json(c.fruit_weight_n);
  j["leak_ramp_s"] = c.leak_ramp_s;
  j["flex_tremor_frac"] = c.flex_tremor_frac;
  j["tof_step_mm"] = c.tof_step_mm;
  j["onset_delay_s"] = config_detail::range_to_json(c.onset_delay_s);
  j["hard"] = c.hard;
  return j;
}

inline SimConfig sim_config_from_json(const Json& j) {
  config_detail::check_keys(j, "simulator",
                            {"sample_rate_hz", "duration_s", "event_fraction",
                             "noise_std_frac", "pull_slope_n_per_s", "fruit_weight_n",
                             "leak_ramp_s", "flex_tremor_frac", "tof_step_mm",
                             "onset_delay_s", "hard"});
  SimConfig c;
  c.sample_rate_hz = j.value("sample_rate_hz", c.sample_rate_hz);
  if (j.contains("duration_s"))
    c.duration_s = config_detail::range_from_json(j["duration_s"], "duration_s");
  if (j.contains("event_fraction"))
    c.event_fraction =
        config_detail::range_from_json(j["event_fraction"], "event_fraction");
  c.noise_std_frac = j.value("noise_std_frac", c.noise_std_frac);
  if (j.contains("pull_slope_n_per_s"))
    c.pull_slope_n_per_s =
        config_detail::range_from_json(j["pull_slope_n_per_s"], "pull_slope_n_per_s");
  if (j.contains("fruit_weight_n"))
    c.fruit_weight_n =
        config_detail::range_from_json(j["fruit_weight_n"], "fruit_weight_n");
  c.leak_ramp_s = j.value("leak_ramp_s", c.leak_ramp_s);
  c.flex_tremor_frac = j.value("flex_tremor_frac", c.flex_tremor_frac);
  c.tof_step_mm = j.value("tof_step_mm", c.tof_step_mm);
  if (j.contains("onset_delay_s"))
    c.onset_delay_s = config_detail::range_from_json(j["onset_delay_s"], "onset_delay_s");
  c.hard = j.value("hard", c.hard);
  return c;
}

inline Json preprocess_config_to_json(const PreprocessConfig& c) {
  Json j;
  j["median_window"] = c.median_window;
  j["smooth_window"] = c.smooth_window;
  if (c.onset_pressure_threshold)
    j["onset_pressure_threshold"] = *c.onset_pressure_threshold;
  else
    j["onset_pressure_threshold"] = nullptr;
  j["target_length"] = c.target_length;
  j["pre_failure_band_s"] = c.pre_failure_band_s;
  return j;
}

inline PreprocessConfig preprocess_config_from_json(const Json& j) {
  config_detail::check_keys(j, "preprocess",
                            {"median_window", "smooth_window",
                             "onset_pressure_threshold", "target_length",
                             "pre_failure_band_s"});
  PreprocessConfig c;
  c.median_window = j.value("median_window", c.median_window);
  c.smooth_window = j.value("smooth_window", c.smooth_window);
  if (j.contains("onset_pressure_threshold") && !j["onset_pressure_threshold"].is_null())
    c.onset_pressure_threshold = j["onset_pressure_threshold"].get<double>();
  c.target_length = j.value("target_length", c.target_length);
  c.pre_failure_band_s = j.value("pre_failure_band_s", c.pre_failure_band_s);
  return c;
}

inline Json split_fractions_to_json(const SplitFractions& c) {
  return Json{{"train", c.train}, {"val", c.val}, {"test", c.test}};
}

inline SplitFractions split_fractions_from_json(const Json& j) {
  config_detail::check_keys(j, "split", {"train", "val", "test"});
  SplitFractions c;
  c.train = j.value("train", c.train);
  c.val = j.value("val", c.val);
  c.test = j.value("test", c.test);
  return c;
}

inline Json augment_config_to_json(const AugmentConfig& c) {
  return Json{{"alpha", c.alpha},
              {"copies_failed", c.copies_failed},
              {"copies_success", c.copies_success}};
}

inline AugmentConfig augment_config_from_json(const Json& j) {
  config_detail::check_keys(j, "augment", {"alpha", "copies_failed", "copies_success"});
  AugmentConfig c;
  c.alpha = j.value("alpha", c.alpha);
  c.copies_failed = j.value("copies_failed", c.copies_failed);
  c.copies_success = j.value("copies_success", c.copies_success);
  return c;
}

inline Json windowing_config_to_json(const WindowingConfig& c) {
  return Json{{"window_len", c.window_len}, {"stride", c.stride}};
}

inline WindowingConfig windowing_config_from_json(const Json& j) {
  config_detail::check_keys(j, "windowing", {"window_len", "stride"});
  WindowingConfig c;
  c.window_len = j.value("window_len", c.window_len);
  c.stride = j.value("stride", c.stride);
  return c;
}

inline Json forest_config_to_json(const ForestConfig& c) {
  Json j;
  j["n_trees"] = c.n_trees;
  if (c.max_depth)
    j["max_depth"] = *c.max_depth;
  else
    j["max_depth"] = nullptr;
  j["min_samples_split"] = c.min_samples_split;
  j["features_per_split"] = c.features_per_split;
  j["bootstrap"] = c.bootstrap;
  return j;
}

inline ForestConfig forest_config_from_json(const Json& j) {
  config_detail::check_keys(j, "forest",
                            {"n_trees", "max_depth", "min_samples_split",
                             "features_per_split", "bootstrap"});
  ForestConfig c;
  c.n_trees = j.value("n_trees", c.n_trees);
  if (j.contains("max_depth") && !j["max_depth"].is_null())
    c.max_depth = j["max_depth"].get<int>();
  c.min_samples_split = j.value("min_samples_split", c.min_samples_split);
  c.features_per_split = j.value("features_per_split", c.features_per_split);
  c.bootstrap = j.value("bootstrap", c.bootstrap);
  return c;
}

inline Json mlp_config_to_json(const MlpConfig& c) {
  Json j;
  j["hidden"] = c.hidden;
  j["max_epochs"] = c.max_epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["epsilon"] = c.epsilon;
  j["patience"] = c.patience;
  j["stop_on_loss"] = c.stop_on_loss;
  return j;
}

inline MlpConfig mlp_config_from_json(const Json& j) {
  config_detail::check_keys(j, "mlp",
                            {"hidden", "max_epochs", "batch_size", "learning_rate",
                             "beta1", "beta2", "epsilon", "patience", "stop_on_loss"});
  MlpConfig c;
  if (j.contains("hidden")) c.hidden = j["hidden"].get<std::vector<int>>();
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.patience = j.value("patience", c.patience);
  c.stop_on_loss = j.value("stop_on_loss", c.stop_on_loss);
  return c;
}

inline Json eval_config_to_json(const EvalConfig& c) {
  return Json{{"debounce_k", c.debounce_k},
              {"importance_repeats", c.importance_repeats}};
}

inline EvalConfig eval_config_from_json(const Json& j) {
  config_detail::check_keys(j, "eval", {"debounce_k", "importance_repeats"});
  EvalConfig c;
  c.debounce_k = j.value("debounce_k", c.debounce_k);
  c.importance_repeats = j.value("importance_repeats", c.importance_repeats);
  return c;
}

/// Canonical form: every field materialized, keys sorted by the JSON type.
inline Json pipeline_config_to_json(const PipelineConfig& c) {
  Json j;
  j["master_seed"] = c.master_seed.value;
  j["corpus"] = Json{{"n_success", c.n_success}, {"n_fail", c.n_fail}};
  j["simulator"] = sim_config_to_json(c.simulator);
  j["preprocess"] = preprocess_config_to_json(c.preprocess);
  j["split"] = split_fractions_to_json(c.split);
  j["augment"] = augment_config_to_json(c.augment);
  j["windowing"] = windowing_config_to_json(c.windowing);
  j["forest"] = forest_config_to_json(c.forest);
  j["mlp"] = mlp_config_to_json(c.mlp);
  j["eval"] = eval_config_to_json(c.eval);
  return j;
}

inline PipelineConfig pipeline_config_from_json(const Json& j) {
  config_detail::check_keys(j, "config",
                            {"master_seed", "corpus", "simulator", "preprocess",
                             "split", "augment", "windowing", "forest", "mlp", "eval"});
  PipelineConfig c;
  if (j.contains("master_seed")) c.master_seed.value = j["master_seed"].get<std::uint64_t>();
  if (j.contains("corpus")) {
    config_detail::check_keys(j["corpus"], "corpus", {"n_success", "n_fail"});
    c.n_success = j["corpus"].value("n_success", c.n_success);
    c.n_fail = j["corpus"].value("n_fail", c.n_fail);
  }
  if (j.contains("simulator")) c.simulator = sim_config_from_json(j["simulator"]);
  if (j.contains("preprocess")) c.preprocess = preprocess_config_from_json(j["preprocess"]);
  if (j.contains("split")) c.split = split_fractions_from_json(j["split"]);
  if (j.contains("augment")) c.augment = augment_config_from_json(j["augment"]);
  if (j.contains("windowing")) c.windowing = windowing_config_from_json(j["windowing"]);
  if (j.contains("forest")) c.forest = forest_config_from_json(j["forest"]);
  if (j.contains("mlp")) c.mlp = mlp_config_from_json(j["mlp"]);
  if (j.contains("eval")) c.eval = eval_config_from_json(j["eval"]);
  return c;
}

/// Stable 16-hex-digit digest of the canonical config dump. Identical configs
/// always hash identically; any field change changes the digest.
inline std::string config_digest(const PipelineConfig& c) {
  const std::string dump = pipeline_config_to_json(c).dump();
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(dump)));
  return std::string(buf);
}

// Stage seed tags. Fixed names keep subcommand runs and run_pipeline aligned.
inline RngSeed stage_seed(RngSeed master, const char* tag) {
  return derive_seed(master, tag, 0);
}

struct PipelineResult {
  std::vector<LabeledTrial> corpus;
  SplitAssignment split;
  double onset_threshold = 0.0;
  ForestModel forest;
  MlpModel mlp;
  ModelEvaluation rf_eval;
  ModelEvaluation mlp_eval;
  std::string config_digest;
  RngSeed master_seed{};
};

namespace pipeline_detail {

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(std::string(name) + ": " + e.what());
  }
}

}  // namespace pipeline_detail

/// Raw corpus for the configured trial counts, seeded from the master seed.
inline std::vector<Trial> simulate_stage(const PipelineConfig& cfg) {
  return generate_corpus(cfg.simulator, cfg.n_success, cfg.n_fail,
                         stage_seed(cfg.master_seed, "sim"));
}

/// Preprocesses every trial with a corpus-wide onset threshold (unless the
/// config pins one). Returns the labeled corpus and the threshold used.
inline std::pair<std::vector<LabeledTrial>, double> prep_stage(
    const std::vector<Trial>& raw, const PreprocessConfig& cfg) {
  PreprocessConfig resolved = cfg;
  if (!resolved.onset_pressure_threshold)
    resolved.onset_pressure_threshold = corpus_pressure_threshold(raw);
  std::vector<LabeledTrial> corpus;
  corpus.reserve(raw.size());
  for (const auto& trial : raw) corpus.push_back(preprocess_trial(trial, resolved));
  return {std::move(corpus), *resolved.onset_pressure_threshold};
}

struct BuiltData {
  SplitAssignment split;
  std::vector<WindowSample> train_windows;
  std::vector<WindowSample> val_windows;
  std::vector<WindowSample> test_windows;
};

/// Split, augment the training part, window all three parts.
inline BuiltData build_stage(const std::vector<LabeledTrial>& corpus,
                             const PipelineConfig& cfg) {
  BuiltData out;
  out.split = split_trials(corpus, cfg.split, stage_seed(cfg.master_seed, "split"));
  const auto train = select_trials(corpus, out.split.train);
  const auto val = select_trials(corpus, out.split.val);
  const auto test = select_trials(corpus, out.split.test);
  const auto augmented =
      augment_split(train, cfg.augment, stage_seed(cfg.master_seed, "aug"));
  out.train_windows = make_windows(augmented, cfg.windowing);
  out.val_windows = make_windows(val, cfg.windowing);
  out.test_windows = make_windows(test, cfg.windowing);
  return out;
}

inline PredictFn forest_predictor(const ForestModel& model) {
  return [&model](const std::vector<double>& f) { return predict_forest(model, f); };
}

inline PredictFn mlp_predictor(const MlpModel& model) {
  return [&model](const std::vector<double>& f) { return predict_mlp(model, f); };
}

/// simulate -> preprocess -> split/augment/window -> train both -> evaluate
/// both. Every stage failure is rethrown with the stage name prefixed.
inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  namespace pd = pipeline_detail;

  PipelineResult result;
  result.master_seed = cfg.master_seed;
  result.config_digest = config_digest(cfg);

  const auto raw = pd::stage("simulate", [&] { return simulate_stage(cfg); });
  auto prepped = pd::stage("prep", [&] { return prep_stage(raw, cfg.preprocess); });
  result.corpus = std::move(prepped.first);
  result.onset_threshold = prepped.second;

  auto built = pd::stage("build", [&] { return build_stage(result.corpus, cfg); });
  result.split = std::move(built.split);

  result.forest = pd::stage("train-rf", [&] {
    return train_forest(built.train_windows, cfg.forest,
                        stage_seed(cfg.master_seed, "rf"));
  });
  result.mlp = pd::stage("train-mlp", [&] {
    return train_mlp(built.train_windows, built.val_windows, cfg.mlp,
                     stage_seed(cfg.master_seed, "mlp"));
  });

  const auto test = select_trials(result.corpus, result.split.test);
  result.rf_eval = pd::stage("eval-rf", [&] {
    return evaluate_model(forest_predictor(result.forest), test, cfg.windowing,
                          cfg.eval.debounce_k, cfg.eval.importance_repeats,
                          stage_seed(cfg.master_seed, "eval-rf"));
  });
  result.mlp_eval = pd::stage("eval-mlp", [&] {
    return evaluate_model(mlp_predictor(result.mlp), test, cfg.windowing,
                          cfg.eval.debounce_k, cfg.eval.importance_repeats,
                          stage_seed(cfg.master_seed, "eval-mlp"));
  });
  return result;
}

// ---------------------------------------------------------------------------
// Sensor-subset ablation. Shares the pipeline's data stages and stage seeds,
// so the all-groups subset reproduces the full pipeline's models exactly.
// ---------------------------------------------------------------------------

inline std::vector<int> channels_for_groups(const std::vector<SensorGroup>& groups) {
  std::vector<int> channels;
  for (int c = 0; c < kChannelCount; ++c)
    for (SensorGroup g : groups)
      if (group_of_channel(c) == g) {
        channels.push_back(c);
        break;
      }
  return channels;
}

inline std::string subset_name(const std::vector<SensorGroup>& groups) {
  if (groups.size() == static_cast<std::size_t>(kGroupCount)) {
    bool all[kGroupCount] = {};
    for (SensorGroup g : groups) all[static_cast<int>(g)] = true;
    if (all[0] && all[1] && all[2] && all[3]) return "all";
  }
  std::string name;
  for (int g = 0; g < kGroupCount; ++g)
    for (SensorGroup s : groups)
      if (static_cast<int>(s) == g) {
        if (!name.empty()) name += "+";
        name += std::string(group_name(static_cast<SensorGroup>(g)));
        break;
      }
  return name;
}

/// "force+flex;pressure;all" -> group sets. Unknown names throw.
inline std::vector<std::vector<SensorGroup>> parse_subsets(const std::string& text) {
  std::vector<std::vector<SensorGroup>> out;
  std::string rest = text;
  auto parse_one = [](const std::string& token) {
    std::vector<SensorGroup> groups;
    if (token == "all") {
      for (int g = 0; g < kGroupCount; ++g) groups.push_back(static_cast<SensorGroup>(g));
      return groups;
    }
    std::size_t at = 0;
    while (at <= token.size()) {
      const auto plus = token.find('+', at);
      const std::string name =
          token.substr(at, plus == std::string::npos ? std::string::npos : plus - at);
      bool found = false;
      for (int g = 0; g < kGroupCount; ++g)
        if (name == group_name(static_cast<SensorGroup>(g))) {
          groups.push_back(static_cast<SensorGroup>(g));
          found = true;
          break;
        }
      if (!found) throw ConfigError("unknown sensor group: " + name);
      if (plus == std::string::npos) break;
      at = plus + 1;
    }
    return groups;
  };
  while (!rest.empty()) {
    const auto semi = rest.find(';');
    const std::string token = rest.substr(0, semi);
    if (!token.empty()) out.push_back(parse_one(token));
    if (semi == std::string::npos) break;
    rest = rest.substr(semi + 1);
  }
  return out;
}

struct AblationRow {
  std::string subset;
  std::string model;  // "rf" or "mlp"
  double accuracy = 0.0;
  double pre_failure_recall = 0.0;
  double picked_recall = 0.0;
};

struct AblationTable {
  std::vector<AblationRow> rows;
  std::vector<std::string> warnings;
};

/// Restricts a full-width feature vector to the kept channels, preserving
/// time-major order.
inline std::vector<double> restrict_features(const std::vector<double>& features,
                                             const std::array<bool, kChannelCount>& keep) {
  std::vector<double> out;
  out.reserve(features.size());
  for (std::size_t f = 0; f < features.size(); ++f)
    if (keep[f % kChannelCount]) out.push_back(features[f]);
  return out;
}

/// Retrains and re-evaluates both models per channel subset over the shared
/// pipeline data. Empty subsets are skipped with a warning row.
inline AblationTable ablate_sensor_subsets(
    const PipelineConfig& cfg, const std::vector<std::vector<SensorGroup>>& subsets) {
  cfg.validate();
  namespace pd = pipeline_detail;

  const auto raw = pd::stage("simulate", [&] { return simulate_stage(cfg); });
  auto prepped = pd::stage("prep", [&] { return prep_stage(raw, cfg.preprocess); });
  const auto& corpus = prepped.first;
  const auto built = pd::stage("build", [&] { return build_stage(corpus, cfg); });
  const auto test = select_trials(corpus, built.split.test);

  AblationTable table;
  for (const auto& groups : subsets) {
    if (groups.empty()) {
      table.warnings.push_back("skipping empty sensor subset");
      continue;
    }
    const auto channels = channels_for_groups(groups);
    std::array<bool, kChannelCount> keep{};
    for (int c : channels) keep[c] = true;
    const std::string name = subset_name(groups);

    const auto train_w = restrict_windows(built.train_windows, channels);
    const auto val_w = restrict_windows(built.val_windows, channels);

    const auto rf = pd::stage("train-rf", [&] {
      return train_forest(train_w, cfg.forest, stage_seed(cfg.master_seed, "rf"));
    });
    const auto mlp = pd::stage("train-mlp", [&] {
      return train_mlp(train_w, val_w, cfg.mlp, stage_seed(cfg.master_seed, "mlp"));
    });

    PredictFn rf_fn = [&rf, &keep](const std::vector<double>& f) {
      return predict_forest(rf, restrict_features(f, keep));
    };
    PredictFn mlp_fn = [&mlp, &keep](const std::vector<double>& f) {
      return predict_mlp(mlp, restrict_features(f, keep));
    };

    const auto rf_eval = pd::stage("eval-rf", [&] {
      return evaluate_model(rf_fn, test, cfg.windowing, cfg.eval.debounce_k,
                            cfg.eval.importance_repeats,
                            stage_seed(cfg.master_seed, "eval-rf"));
    });
    const auto mlp_eval = pd::stage("eval-mlp", [&] {
      return evaluate_model(mlp_fn, test, cfg.windowing, cfg.eval.debounce_k,
                            cfg.eval.importance_repeats,
                            stage_seed(cfg.master_seed, "eval-mlp"));
    });

    auto add_row = [&](const char* model, const ModelEvaluation& ev) {
      AblationRow row;
      row.subset = name;
      row.model = model;
      row.accuracy = ev.metrics.accuracy;
      row.pre_failure_recall =
          ev.metrics.per_state[static_cast<int>(PickState::PreFailure)].recall;
      row.picked_recall =
          ev.metrics.per_state[static_cast<int>(PickState::Picked)].recall;
      table.rows.push_back(std::move(row));
    };
    add_row("rf", rf_eval);
    add_row("mlp", mlp_eval);
  }
  return table;
}

}  // namespace pickstate
