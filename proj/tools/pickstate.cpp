#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pickstate/forest.hpp"
#include "pickstate/mlp.hpp"
#include "pickstate/pipeline.hpp"
#include "pickstate/report.hpp"

namespace {

using namespace pickstate;

std::string default_out(const char* leaf) {
  const char* root = std::getenv("PICKSTATE_OUT_ROOT");
  return (root && *root ? std::string(root) : std::string("out")) + "/" + leaf;
}

struct CommonOpts {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::optional<int> n_success;
  std::optional<int> n_fail;
  bool hard = false;

  PipelineConfig resolve() const {
    PipelineConfig cfg;
    if (!config_path.empty())
      cfg = pipeline_config_from_json(Json::parse(read_text_file(config_path)));
    if (seed) cfg.master_seed.value = *seed;
    if (n_success) cfg.n_success = *n_success;
    if (n_fail) cfg.n_fail = *n_fail;
    if (hard) cfg.simulator.hard = true;
    cfg.validate();
    return cfg;
  }
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--seed", opts.seed, "Master seed (overrides the config file)");
  cmd->add_option("--config", opts.config_path, "Pipeline config JSON file")
      ->check(CLI::ExistingFile);
  cmd->add_option("--n-success", opts.n_success, "Successful trial count override");
  cmd->add_option("--n-fail", opts.n_fail, "Failed trial count override");
  cmd->add_flag("--hard", opts.hard, "Triple the simulator noise");
}

void save_split(const std::filesystem::path& path, const SplitAssignment& split,
                const std::string& digest, std::uint64_t seed) {
  Json j;
  j["format"] = "pickstate-split";
  j["version"] = 1;
  j["config_digest"] = digest;
  j["master_seed"] = seed;
  j["train"] = split.train;
  j["val"] = split.val;
  j["test"] = split.test;
  write_text_file(path, j.dump(1) + "\n");
}

SplitAssignment load_split(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
    SplitAssignment split;
    split.train = j.at("train").get<std::vector<std::string>>();
    split.val = j.at("val").get<std::vector<std::string>>();
    split.test = j.at("test").get<std::vector<std::string>>();
    return split;
  } catch (const Json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::vector<Trial> load_raw_corpus(const std::filesystem::path& dir) {
  auto labeled = load_corpus(dir);
  std::vector<Trial> out;
  out.reserve(labeled.size());
  for (auto& lt : labeled) out.push_back(std::move(lt.trial));
  return out;
}

int cmd_simulate(const CommonOpts& opts, const std::string& out_dir) {
  const auto cfg = opts.resolve();
  const auto digest = config_digest(cfg);
  const auto raw = simulate_stage(cfg);

  std::filesystem::create_directories(out_dir);
  CorpusManifest manifest;
  manifest.master_seed = cfg.master_seed.value;
  manifest.config_digest = digest;
  manifest.stage = Json{{"name", "simulate"},
                        {"simulator", sim_config_to_json(cfg.simulator)},
                        {"n_success", cfg.n_success},
                        {"n_fail", cfg.n_fail}};
  for (const auto& trial : raw) {
    manifest.trial_ids.push_back(trial.id);
    save_trial(std::filesystem::path(out_dir) / (trial.id + ".json"), trial, nullptr,
               digest, cfg.master_seed.value);
  }
  save_manifest(std::filesystem::path(out_dir) / "manifest.json", manifest);
  std::cerr << "[pickstate] simulate: wrote " << raw.size() << " trials to " << out_dir
            << "\n";
  return 0;
}

int cmd_prep(const CommonOpts& opts, const std::string& in_dir,
             const std::string& out_dir) {
  const auto cfg = opts.resolve();
  const auto digest = config_digest(cfg);
  const auto raw = load_raw_corpus(in_dir);
  auto [corpus, threshold] = prep_stage(raw, cfg.preprocess);

  std::filesystem::create_directories(out_dir);
  CorpusManifest manifest;
  manifest.master_seed = cfg.master_seed.value;
  manifest.config_digest = digest;
  auto stage_cfg = preprocess_config_to_json(cfg.preprocess);
  stage_cfg["onset_pressure_threshold"] = threshold;  // resolved value
  manifest.stage = Json{{"name", "prep"}, {"preprocess", std::move(stage_cfg)}};
  for (const auto& lt : corpus) {
    manifest.trial_ids.push_back(lt.trial.id);
    save_trial(std::filesystem::path(out_dir) / (lt.trial.id + ".json"), lt.trial,
               &lt.labels, digest, cfg.master_seed.value);
  }
  save_manifest(std::filesystem::path(out_dir) / "manifest.json", manifest);
  std::cerr << "[pickstate] prep: labeled " << corpus.size() << " trials, onset threshold "
            << threshold << "\n";
  return 0;
}

int cmd_build(const CommonOpts& opts, const std::string& in_dir,
              const std::string& out_dir, std::optional<double> alpha) {
  auto cfg = opts.resolve();
  if (alpha) cfg.augment.alpha = *alpha;
  const auto digest = config_digest(cfg);
  const auto corpus = load_corpus(in_dir);
  for (const auto& lt : corpus)
    if (lt.labels.empty())
      throw DataError(lt.trial.id + " has no labels; run prep before build");

  const auto built = build_stage(corpus, cfg);
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  save_split(dir / "split.json", built.split, digest, cfg.master_seed.value);
  save_windows_csv(dir / "train_windows.csv", built.train_windows, digest,
                   cfg.master_seed.value);
  save_windows_csv(dir / "val_windows.csv", built.val_windows, digest,
                   cfg.master_seed.value);
  save_windows_csv(dir / "test_windows.csv", built.test_windows, digest,
                   cfg.master_seed.value);
  std::cerr << "[pickstate] build: " << built.train_windows.size() << " train / "
            << built.val_windows.size() << " val / " << built.test_windows.size()
            << " test windows\n";
  return 0;
}

int cmd_train_rf(const CommonOpts& opts, const std::string& windows_path,
                 const std::string& out_path) {
  const auto cfg = opts.resolve();
  const auto windows = load_windows_csv(windows_path);
  const auto model =
      train_forest(windows, cfg.forest, stage_seed(cfg.master_seed, "rf"));
  std::filesystem::create_directories(
      std::filesystem::path(out_path).parent_path().empty()
          ? "."
          : std::filesystem::path(out_path).parent_path());
  save_forest(out_path, model);
  std::cerr << "[pickstate] train rf: " << model.trees.size() << " trees on "
            << windows.size() << " windows -> " << out_path << "\n";
  return 0;
}

int cmd_train_mlp(const CommonOpts& opts, const std::string& windows_path,
                  const std::string& val_path, const std::string& out_path) {
  const auto cfg = opts.resolve();
  const auto train = load_windows_csv(windows_path);
  const auto val = load_windows_csv(val_path);
  const auto model = train_mlp(train, val, cfg.mlp, stage_seed(cfg.master_seed, "mlp"));
  std::filesystem::create_directories(
      std::filesystem::path(out_path).parent_path().empty()
          ? "."
          : std::filesystem::path(out_path).parent_path());
  save_mlp(out_path, model);
  std::cerr << "[pickstate] train mlp: stopped after " << model.train_loss.size()
            << " epochs (best " << model.best_epoch << ") -> " << out_path << "\n";
  return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& model_path,
             const std::string& trials_dir, const std::string& split_path,
             const std::string& out_dir, bool emit_svg) {
  const auto cfg = opts.resolve();
  const auto digest = config_digest(cfg);
  const auto corpus = load_corpus(trials_dir);
  const auto split = load_split(split_path);
  const auto test = select_trials(corpus, split.test);

  const Json model_json = Json::parse(read_text_file(model_path));
  const std::string format = model_json.value("format", "");
  std::string model_id;
  PredictFn predict;
  ForestModel forest;
  MlpModel mlp;
  if (format == "pickstate-forest") {
    forest = forest_from_json(model_json);
    predict = forest_predictor(forest);
    model_id = "rf";
  } else if (format == "pickstate-mlp") {
    mlp = mlp_from_json(model_json);
    predict = mlp_predictor(mlp);
    model_id = "mlp";
  } else {
    throw DataError(model_path + ": unrecognized model format");
  }

  const auto evaluation = evaluate_model(
      predict, test, cfg.windowing, cfg.eval.debounce_k, cfg.eval.importance_repeats,
      stage_seed(cfg.master_seed, model_id == "rf" ? "eval-rf" : "eval-mlp"));
  emit_eval_artifacts(model_id, evaluation, digest, cfg.master_seed, out_dir, emit_svg);
  std::cerr << "[pickstate] eval " << model_id << ": accuracy "
            << evaluation.metrics.accuracy << ", event error "
            << evaluation.events.mean_abs_error_s << " s -> " << out_dir << "\n";
  return 0;
}

int cmd_ablate(const CommonOpts& opts, const std::string& subsets_arg,
               const std::string& out_dir) {
  const auto cfg = opts.resolve();
  const auto subsets = parse_subsets(subsets_arg);
  if (subsets.empty()) throw ConfigError("no sensor subsets given");
  const auto table = ablate_sensor_subsets(cfg, subsets);
  for (const auto& w : table.warnings) std::cerr << "[pickstate] warning: " << w << "\n";
  emit_ablation_artifacts(table, cfg, out_dir);
  std::cerr << "[pickstate] ablate: " << table.rows.size() << " rows -> " << out_dir
            << "\n";
  return 0;
}

int cmd_pipeline(const CommonOpts& opts, const std::string& out_dir, bool emit_svg) {
  const auto cfg = opts.resolve();
  const auto result = run_pipeline(cfg);
  emit_pipeline_artifacts(result, cfg, out_dir, emit_svg);
  std::cout << "rf accuracy " << result.rf_eval.metrics.accuracy << ", mlp accuracy "
            << result.mlp_eval.metrics.accuracy << ", rf event error "
            << (result.rf_eval.events.detected > 0
                    ? result.rf_eval.events.mean_abs_error_s
                    : -1.0)
            << " s, reports in " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pick-state classification pipeline on synthetic gripper sensor data"};
  app.require_subcommand(1);

  CommonOpts opts;

  auto* sim = app.add_subcommand("simulate", "Generate a raw synthetic trial corpus");
  std::string sim_out = default_out("raw");
  add_common(sim, opts);
  sim->add_option("--out", sim_out, "Output corpus directory");

  auto* prep = app.add_subcommand("prep", "Preprocess and label a raw corpus");
  std::string prep_in = default_out("raw");
  std::string prep_out = default_out("prepped");
  add_common(prep, opts);
  prep->add_option("--in", prep_in, "Raw corpus directory");
  prep->add_option("--out", prep_out, "Labeled corpus directory");

  auto* build = app.add_subcommand("build", "Split, augment, and window a labeled corpus");
  std::string build_in = default_out("prepped");
  std::string build_out = default_out("data");
  std::optional<double> build_alpha;
  add_common(build, opts);
  build->add_option("--in", build_in, "Labeled corpus directory");
  build->add_option("--out", build_out, "Window table directory");
  build->add_option("--alpha", build_alpha, "Augmentation noise fraction override");

  auto* train = app.add_subcommand("train", "Train a classifier on window tables");
  train->require_subcommand(1);
  auto* train_rf = train->add_subcommand("rf", "Random forest");
  std::string rf_windows = default_out("data") + "/train_windows.csv";
  std::string rf_out = default_out("models") + "/rf.json";
  add_common(train_rf, opts);
  train_rf->add_option("--windows", rf_windows, "Training window CSV");
  train_rf->add_option("--out", rf_out, "Model output file");
  auto* train_mlp_cmd = train->add_subcommand("mlp", "Multilayer perceptron");
  std::string mlp_windows = default_out("data") + "/train_windows.csv";
  std::string mlp_val = default_out("data") + "/val_windows.csv";
  std::string mlp_out = default_out("models") + "/mlp.json";
  add_common(train_mlp_cmd, opts);
  train_mlp_cmd->add_option("--windows", mlp_windows, "Training window CSV");
  train_mlp_cmd->add_option("--val", mlp_val, "Validation window CSV");
  train_mlp_cmd->add_option("--out", mlp_out, "Model output file");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a trained model on the test split");
  std::string eval_model = default_out("models") + "/rf.json";
  std::string eval_trials = default_out("prepped");
  std::string eval_split = default_out("data") + "/split.json";
  std::string eval_out = default_out("eval");
  bool eval_svg = false;
  add_common(eval_cmd, opts);
  eval_cmd->add_option("--model", eval_model, "Model JSON file");
  eval_cmd->add_option("--trials", eval_trials, "Labeled corpus directory");
  eval_cmd->add_option("--split", eval_split, "Split manifest from build");
  eval_cmd->add_option("--out", eval_out, "Report directory");
  eval_cmd->add_flag("--svg", eval_svg, "Also write SVG timelines");

  auto* ablate = app.add_subcommand("ablate", "Compare sensor-subset retrainings");
  std::string ablate_subsets = "force;pressure;flex;tof;all";
  std::string ablate_out = default_out("ablation");
  add_common(ablate, opts);
  ablate->add_option("--subsets", ablate_subsets,
                     "Semicolon-separated sensor groups, e.g. force+flex;all");
  ablate->add_option("--out", ablate_out, "Report directory");

  auto* pipe = app.add_subcommand("pipeline", "Run every stage end to end");
  std::string pipe_out = default_out("report");
  bool pipe_svg = false;
  add_common(pipe, opts);
  pipe->add_option("--out", pipe_out, "Report directory");
  pipe->add_flag("--svg", pipe_svg, "Also write SVG timelines");

  CLI11_PARSE(app, argc, argv);

  const char* stage = "pickstate";
  try {
    if (sim->parsed()) {
      stage = "simulate";
      return cmd_simulate(opts, sim_out);
    }
    if (prep->parsed()) {
      stage = "prep";
      return cmd_prep(opts, prep_in, prep_out);
    }
    if (build->parsed()) {
      stage = "build";
      return cmd_build(opts, build_in, build_out, build_alpha);
    }
    if (train->parsed()) {
      if (train_rf->parsed()) {
        stage = "train-rf";
        return cmd_train_rf(opts, rf_windows, rf_out);
      }
      stage = "train-mlp";
      return cmd_train_mlp(opts, mlp_windows, mlp_val, mlp_out);
    }
    if (eval_cmd->parsed()) {
      stage = "eval";
      return cmd_eval(opts, eval_model, eval_trials, eval_split, eval_out, eval_svg);
    }
    if (ablate->parsed()) {
      stage = "ablate";
      return cmd_ablate(opts, ablate_subsets, ablate_out);
    }
    if (pipe->parsed()) {
      stage = "pipeline";
      return cmd_pipeline(opts, pipe_out, pipe_svg);
    }
  } catch (const pickstate::Error& e) {
    std::cerr << "pickstate " << stage << ": error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "pickstate " << stage << ": unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
