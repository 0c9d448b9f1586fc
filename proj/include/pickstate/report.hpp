#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "pickstate/core.hpp"
#include "pickstate/eval.hpp"
#include "pickstate/io.hpp"
#include "pickstate/pipeline.hpp"

namespace pickstate {

// ---------------------------------------------------------------------------
// Report emission. Every file starts with (or contains) the config digest and
// master seed that produced it, so artifacts are traceable to their run.
// ---------------------------------------------------------------------------

namespace report_detail {

inline std::string provenance_line(const char* kind, const std::string& digest,
                                   RngSeed seed) {
  return std::string("# pickstate ") + kind + " config_digest=" + digest +
         " master_seed=" + std::to_string(seed.value) + "\n";
}

inline Json class_metrics_json(const ClassMetrics& m) {
  Json j;
  if (m.defined) {
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    j["f1"] = m.f1;
  } else {
    j["precision"] = nullptr;
    j["recall"] = nullptr;
    j["f1"] = nullptr;
  }
  j["support"] = m.support;
  j["predicted"] = m.predicted;
  j["defined"] = m.defined;
  j["zero_denominator"] = m.zero_denominator;
  return j;
}

inline Json detection_json(const EventDetection& d) {
  Json j;
  j["detected"] = d.detected;
  if (d.detected) {
    j["outcome"] = std::string(outcome_name(d.outcome));
    j["time_s"] = d.time_s;
  } else {
    j["outcome"] = nullptr;
    j["time_s"] = nullptr;
  }
  return j;
}

}  // namespace report_detail

inline Json model_eval_to_json(const ModelEvaluation& ev) {
  Json j;
  j["accuracy"] = ev.metrics.accuracy;

  Json confusion = Json::array();
  for (const auto& row : ev.metrics.confusion.counts) confusion.push_back(row);
  j["confusion"] = std::move(confusion);

  Json per_state;
  for (int s = 0; s < kStateCount; ++s)
    per_state[std::string(state_name(static_cast<PickState>(s)))] =
        report_detail::class_metrics_json(ev.metrics.per_state[s]);
  j["per_state"] = std::move(per_state);

  Json events;
  events["mean_abs_error_s"] =
      ev.events.detected > 0 ? Json(ev.events.mean_abs_error_s) : Json(nullptr);
  events["detected"] = ev.events.detected;
  events["missed"] = ev.events.missed;
  events["miss_rate"] = ev.events.miss_rate();
  Json per_trial = Json::array();
  for (const auto& t : ev.events.per_trial) {
    Json row;
    row["trial_id"] = t.trial_id;
    row["truth_outcome"] = std::string(outcome_name(t.truth_outcome));
    row["truth_time_s"] = t.truth_time_s;
    row["detection"] = report_detail::detection_json(t.detection);
    row["abs_error_s"] = t.detection.detected ? Json(t.abs_error_s) : Json(nullptr);
    per_trial.push_back(std::move(row));
  }
  events["per_trial"] = std::move(per_trial);
  j["events"] = std::move(events);

  Json matrix = Json::array();
  for (const auto& row : ev.importance) matrix.push_back(row);
  Json states = Json::array();
  for (auto name : kStateNames) states.push_back(std::string(name));
  Json groups = Json::array();
  for (auto name : kGroupNames) groups.push_back(std::string(name));
  j["importance"] =
      Json{{"states", std::move(states)}, {"groups", std::move(groups)},
           {"matrix", std::move(matrix)}};
  return j;
}

inline std::string metrics_csv(
    const std::vector<std::pair<std::string, const ModelEvaluation*>>& models,
    const std::string& digest, RngSeed seed) {
  std::string out = report_detail::provenance_line("metrics", digest, seed);
  out += "model,state,precision,recall,f1,support,predicted,defined,zero_denominator\n";
  for (const auto& [name, ev] : models) {
    for (int s = 0; s < kStateCount; ++s) {
      const auto& m = ev->metrics.per_state[s];
      out += name;
      out += ',';
      out += std::string(state_name(static_cast<PickState>(s)));
      out += ',';
      if (m.defined) {
        out += format_double(m.precision) + ',' + format_double(m.recall) + ',' +
               format_double(m.f1);
      } else {
        out += ",,";
      }
      out += ',' + std::to_string(m.support) + ',' + std::to_string(m.predicted);
      out += m.defined ? ",1" : ",0";
      out += m.zero_denominator ? ",1\n" : ",0\n";
    }
  }
  return out;
}

inline std::string importance_csv(
    const std::vector<std::pair<std::string, const ModelEvaluation*>>& models,
    const std::string& digest, RngSeed seed) {
  std::string out = report_detail::provenance_line("importance", digest, seed);
  out += "model,state";
  for (auto name : kGroupNames) out += ',' + std::string(name);
  out += '\n';
  for (const auto& [name, ev] : models) {
    for (int s = 0; s < kStateCount; ++s) {
      out += name;
      out += ',';
      out += std::string(state_name(static_cast<PickState>(s)));
      for (int g = 0; g < kGroupCount; ++g) out += ',' + format_double(ev->importance[s][g]);
      out += '\n';
    }
  }
  return out;
}

inline std::string timeline_csv(const TrialTimeline& t, const std::string& model,
                                const std::string& digest, RngSeed seed) {
  std::string out = report_detail::provenance_line("timeline", digest, seed);
  out += "# model=" + model + " trial=" + t.trial_id +
         " truth_outcome=" + std::string(outcome_name(t.truth_outcome)) +
         " truth_event_s=" + format_double(t.truth_event_s);
  if (t.detection.detected) {
    out += " predicted_outcome=" + std::string(outcome_name(t.detection.outcome)) +
           " predicted_event_s=" + format_double(t.detection.time_s);
  } else {
    out += " predicted_outcome=none";
  }
  out += '\n';
  out += "end_time_s,truth_state,predicted_state\n";
  for (const auto& step : t.steps) {
    out += format_double(step.end_time_s);
    out += ',' + std::string(state_name(step.truth));
    out += ',' + std::string(state_name(step.predicted));
    out += '\n';
  }
  return out;
}

/// Static two-band timeline: truth on top, prediction below, vertical rules
/// at the truth and detected event times.
inline std::string timeline_svg(const TrialTimeline& t) {
  static constexpr const char* kFill[kStateCount] = {"#4c78a8", "#f58518", "#54a24b",
                                                     "#e45756"};
  const double t_end = t.steps.empty() ? 1.0 : t.steps.back().end_time_s;
  const double width = 760.0;
  const double x0 = 20.0;
  auto x_of = [&](double time) { return x0 + width * time / t_end; };
  char buf[256];
  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"140\" "
      "viewBox=\"0 0 800 140\">\n";
  svg += "<text x=\"20\" y=\"16\" font-size=\"12\" font-family=\"sans-serif\">" +
         t.trial_id + " (" + std::string(outcome_name(t.truth_outcome)) + ")</text>\n";
  double prev = 0.0;
  for (const auto& step : t.steps) {
    const double xa = x_of(prev);
    const double xb = x_of(step.end_time_s);
    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%.2f\" y=\"30\" width=\"%.2f\" height=\"30\" fill=\"%s\"/>\n",
                  xa, xb - xa, kFill[static_cast<int>(step.truth)]);
    svg += buf;
    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%.2f\" y=\"70\" width=\"%.2f\" height=\"30\" fill=\"%s\"/>\n",
                  xa, xb - xa, kFill[static_cast<int>(step.predicted)]);
    svg += buf;
    prev = step.end_time_s;
  }
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%.2f\" y1=\"24\" x2=\"%.2f\" y2=\"106\" stroke=\"#000\" "
                "stroke-width=\"1.5\"/>\n",
                x_of(t.truth_event_s), x_of(t.truth_event_s));
  svg += buf;
  if (t.detection.detected) {
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.2f\" y1=\"24\" x2=\"%.2f\" y2=\"106\" stroke=\"#000\" "
                  "stroke-width=\"1.5\" stroke-dasharray=\"4 3\"/>\n",
                  x_of(t.detection.time_s), x_of(t.detection.time_s));
    svg += buf;
  }
  svg += "<text x=\"20\" y=\"122\" font-size=\"10\" font-family=\"sans-serif\">"
         "truth band above, prediction band below; solid rule = truth event, "
         "dashed = detected</text>\n";
  svg += "</svg>\n";
  return svg;
}

inline void write_timelines(const std::string& dir, const std::string& model,
                            const ModelEvaluation& ev, const std::string& digest,
                            RngSeed seed, bool emit_svg) {
  std::filesystem::create_directories(dir);
  for (const auto& t : ev.timelines) {
    const std::string base = dir + "/" + model + "_" + t.trial_id;
    write_text_file(base + ".csv", timeline_csv(t, model, digest, seed));
    if (emit_svg) write_text_file(base + ".svg", timeline_svg(t));
  }
}

inline Json pipeline_report_json(const PipelineResult& result,
                                 const PipelineConfig& cfg) {
  int n_success = 0;
  int n_fail = 0;
  for (const auto& lt : result.corpus)
    (lt.trial.outcome == Outcome::Success ? n_success : n_fail) += 1;

  Json j;
  j["format"] = "pickstate-report";
  j["version"] = 1;
  j["config"] = pipeline_config_to_json(cfg);
  j["config_digest"] = result.config_digest;
  j["master_seed"] = result.master_seed.value;
  j["corpus"] = Json{{"n_trials", result.corpus.size()},
                     {"n_success", n_success},
                     {"n_fail", n_fail},
                     {"onset_pressure_threshold", result.onset_threshold}};
  j["split"] = Json{{"train", result.split.train},
                    {"val", result.split.val},
                    {"test", result.split.test}};

  Json rf = model_eval_to_json(result.rf_eval);
  rf["n_trees"] = static_cast<int>(result.forest.trees.size());
  Json mlp = model_eval_to_json(result.mlp_eval);
  mlp["best_epoch"] = result.mlp.best_epoch;
  mlp["epochs_run"] = static_cast<int>(result.mlp.train_loss.size());
  j["models"] = Json{{"rf", std::move(rf)}, {"mlp", std::move(mlp)}};
  return j;
}

/// report.json + metrics.csv + importance.csv + timelines/ under out_dir.
inline void emit_pipeline_artifacts(const PipelineResult& result,
                                    const PipelineConfig& cfg,
                                    const std::string& out_dir, bool emit_svg = false) {
  std::filesystem::create_directories(out_dir);
  write_text_file(out_dir + "/report.json",
                  pipeline_report_json(result, cfg).dump(1) + "\n");
  const std::vector<std::pair<std::string, const ModelEvaluation*>> models = {
      {"rf", &result.rf_eval}, {"mlp", &result.mlp_eval}};
  write_text_file(out_dir + "/metrics.csv",
                  metrics_csv(models, result.config_digest, result.master_seed));
  write_text_file(out_dir + "/importance.csv",
                  importance_csv(models, result.config_digest, result.master_seed));
  write_timelines(out_dir + "/timelines", "rf", result.rf_eval, result.config_digest,
                  result.master_seed, emit_svg);
  write_timelines(out_dir + "/timelines", "mlp", result.mlp_eval, result.config_digest,
                  result.master_seed, emit_svg);
}

/// Single-model variant used by the eval subcommand.
inline void emit_eval_artifacts(const std::string& model_id, const ModelEvaluation& ev,
                                const std::string& digest, RngSeed seed,
                                const std::string& out_dir, bool emit_svg = false) {
  std::filesystem::create_directories(out_dir);
  Json j;
  j["format"] = "pickstate-report";
  j["version"] = 1;
  j["config_digest"] = digest;
  j["master_seed"] = seed.value;
  j["models"] = Json{{model_id, model_eval_to_json(ev)}};
  write_text_file(out_dir + "/report.json", j.dump(1) + "\n");
  const std::vector<std::pair<std::string, const ModelEvaluation*>> models = {
      {model_id, &ev}};
  write_text_file(out_dir + "/metrics.csv", metrics_csv(models, digest, seed));
  write_text_file(out_dir + "/importance.csv", importance_csv(models, digest, seed));
  write_timelines(out_dir + "/timelines", model_id, ev, digest, seed, emit_svg);
}

inline std::string ablation_csv(const AblationTable& table, const std::string& digest,
                                RngSeed seed) {
  std::string out = report_detail::provenance_line("ablation", digest, seed);
  out += "subset,model,accuracy,pre_failure_recall,picked_recall\n";
  for (const auto& row : table.rows) {
    out += row.subset + ',' + row.model + ',' + format_double(row.accuracy) + ',' +
           format_double(row.pre_failure_recall) + ',' +
           format_double(row.picked_recall) + '\n';
  }
  return out;
}

inline void emit_ablation_artifacts(const AblationTable& table,
                                    const PipelineConfig& cfg,
                                    const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::string digest = config_digest(cfg);
  write_text_file(out_dir + "/ablation.csv", ablation_csv(table, digest, cfg.master_seed));
  Json rows = Json::array();
  for (const auto& row : table.rows)
    rows.push_back(Json{{"subset", row.subset},
                        {"model", row.model},
                        {"accuracy", row.accuracy},
                        {"pre_failure_recall", row.pre_failure_recall},
                        {"picked_recall", row.picked_recall}});
  Json j;
  j["format"] = "pickstate-ablation";
  j["version"] = 1;
  j["config"] = pipeline_config_to_json(cfg);
  j["config_digest"] = digest;
  j["master_seed"] = cfg.master_seed.value;
  j["rows"] = std::move(rows);
  j["warnings"] = table.warnings;
  write_text_file(out_dir + "/ablation.json", j.dump(1) + "\n");
}

}  // namespace pickstate
