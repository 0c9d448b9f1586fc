#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "pickstate/core.hpp"
#include "pickstate/dataset.hpp"

namespace pickstate {

// ---------------------------------------------------------------------------
// Window-level metrics, debounced event-time detection, per-state permutation
// importance, and channel-subset window restriction. Models enter through a
// plain prediction callable so the forest and the MLP share every code path.
// ---------------------------------------------------------------------------

using PredictFn = std::function<Prediction(const std::vector<double>&)>;

struct ConfusionMatrix {
  /// counts[true_state][predicted_state]
  std::array<std::array<std::int64_t, kStateCount>, kStateCount> counts{};

  std::int64_t total() const {
    std::int64_t t = 0;
    for (const auto& row : counts)
      for (auto c : row) t += c;
    return t;
  }

  std::int64_t trace() const {
    std::int64_t t = 0;
    for (int s = 0; s < kStateCount; ++s) t += counts[s][s];
    return t;
  }
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;    // appearances in truth
  std::int64_t predicted = 0;  // appearances in predictions
  /// False when the class appears in neither truth nor predictions; the
  /// metric values are then meaningless and reports omit them.
  bool defined = false;
  /// A zero denominator forced some metric to 0.
  bool zero_denominator = false;
};

struct MetricsSummary {
  double accuracy = 0.0;
  ConfusionMatrix confusion;
  std::array<ClassMetrics, kStateCount> per_state{};
};

inline MetricsSummary compute_metrics(const std::vector<PickState>& truth,
                                      const std::vector<PickState>& pred) {
  if (truth.size() != pred.size())
    throw DataError("truth and prediction lists differ in length");
  if (truth.empty()) throw DataError("cannot compute metrics on empty lists");

  MetricsSummary out;
  for (std::size_t i = 0; i < truth.size(); ++i)
    ++out.confusion.counts[static_cast<int>(truth[i])][static_cast<int>(pred[i])];
  out.accuracy = static_cast<double>(out.confusion.trace()) /
                 static_cast<double>(out.confusion.total());

  for (int s = 0; s < kStateCount; ++s) {
    auto& m = out.per_state[s];
    const std::int64_t tp = out.confusion.counts[s][s];
    std::int64_t fn = 0;
    std::int64_t fp = 0;
    for (int o = 0; o < kStateCount; ++o) {
      if (o == s) continue;
      fn += out.confusion.counts[s][o];
      fp += out.confusion.counts[o][s];
    }
    m.support = tp + fn;
    m.predicted = tp + fp;
    m.defined = m.support > 0 || m.predicted > 0;
    if (!m.defined) continue;
    if (m.predicted > 0) {
      m.precision = static_cast<double>(tp) / static_cast<double>(m.predicted);
    } else {
      m.zero_denominator = true;
    }
    if (m.support > 0) {
      m.recall = static_cast<double>(tp) / static_cast<double>(m.support);
    } else {
      m.zero_denominator = true;
    }
    if (m.precision + m.recall > 0.0) {
      m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    } else {
      m.zero_denominator = true;
    }
  }
  return out;
}

struct EventDetection {
  bool detected = false;
  Outcome outcome = Outcome::Success;
  double time_s = 0.0;
};

/// Online debounced scan over one trial's chronological window predictions.
/// A run of >= k Picked windows reports Success at the run's first end time;
/// a run of >= k PreFailure-or-FailedPick windows that contains a FailedPick
/// reports Failure at the run's first FailedPick end time. Nothing after the
/// triggering window is examined.
inline EventDetection detect_event_time(
    const std::vector<std::pair<double, PickState>>& preds, int debounce_k = 2) {
  if (preds.empty()) throw DataError("cannot detect events on an empty prediction list");
  if (debounce_k < 1) throw ConfigError("debounce_k must be >= 1");
  for (std::size_t i = 1; i < preds.size(); ++i)
    if (preds[i].first < preds[i - 1].first)
      throw DataError("window predictions must be chronologically ordered");

  int picked_run = 0;
  double picked_start = 0.0;
  int slip_run = 0;
  bool slip_has_failed = false;
  double slip_failed_at = 0.0;

  for (const auto& [t, state] : preds) {
    if (state == PickState::Picked) {
      if (picked_run == 0) picked_start = t;
      ++picked_run;
    } else {
      picked_run = 0;
    }
    if (state == PickState::PreFailure || state == PickState::FailedPick) {
      ++slip_run;
      if (state == PickState::FailedPick && !slip_has_failed) {
        slip_has_failed = true;
        slip_failed_at = t;
      }
    } else {
      slip_run = 0;
      slip_has_failed = false;
    }
    if (picked_run >= debounce_k) return {true, Outcome::Success, picked_start};
    if (slip_run >= debounce_k && slip_has_failed)
      return {true, Outcome::Failure, slip_failed_at};
  }
  return {};
}

struct TrialEventResult {
  std::string trial_id;
  Outcome truth_outcome = Outcome::Success;
  double truth_time_s = 0.0;
  EventDetection detection;
  double abs_error_s = 0.0;  // meaningful only when detection.detected
};

struct EventTimeStats {
  double mean_abs_error_s = 0.0;  // over detected trials only
  int detected = 0;
  int missed = 0;
  std::vector<TrialEventResult> per_trial;

  double miss_rate() const {
    const int n = detected + missed;
    return n == 0 ? 0.0 : static_cast<double>(missed) / static_cast<double>(n);
  }
};

/// Per-trial timeline of truth vs prediction, for plotting and reports.
struct TimelineStep {
  double end_time_s = 0.0;
  PickState truth = PickState::Picking;
  PickState predicted = PickState::Picking;
};

struct TrialTimeline {
  std::string trial_id;
  Outcome truth_outcome = Outcome::Success;
  double truth_event_s = 0.0;
  EventDetection detection;
  std::vector<TimelineStep> steps;
};

using ImportanceMatrix = std::array<std::array<double, kGroupCount>, kStateCount>;

/// Joint column shuffle per sensor group: one permutation of window indices
/// per repeat moves every feature column of the group together. Entries are
/// the mean drop in per-state recall, then each state row is divided by its
/// maximum absolute entry (all-zero rows stay zero).
inline ImportanceMatrix permutation_importance(const PredictFn& predict,
                                               const std::vector<WindowSample>& windows,
                                               int n_repeats, RngSeed seed) {
  if (windows.empty())
    throw DataError("permutation importance needs a nonempty window set");
  if (n_repeats < 1) throw ConfigError("n_repeats must be >= 1");
  const std::size_t n = windows.size();
  const std::size_t f_count = windows.front().features.size();
  if (f_count % kChannelCount != 0)
    throw DataError("window feature length must be a multiple of the channel count");

  std::vector<PickState> truth(n);
  std::vector<PickState> base_pred(n);
  for (std::size_t i = 0; i < n; ++i) {
    truth[i] = windows[i].label;
    base_pred[i] = predict(windows[i].features).state;
  }
  const auto baseline = compute_metrics(truth, base_pred);

  ImportanceMatrix matrix{};
  std::vector<std::vector<double>> permuted(n);
  std::vector<PickState> perm_pred(n);
  for (int g = 0; g < kGroupCount; ++g) {
    std::vector<std::size_t> group_cols;
    for (std::size_t f = 0; f < f_count; ++f)
      if (group_of_channel(static_cast<int>(f % kChannelCount)) ==
          static_cast<SensorGroup>(g))
        group_cols.push_back(f);

    std::array<double, kStateCount> drop_sum{};
    for (int r = 0; r < n_repeats; ++r) {
      Rng rng(derive_seed(seed, "perm",
                          static_cast<std::uint64_t>(g) *
                                  static_cast<std::uint64_t>(n_repeats) +
                              static_cast<std::uint64_t>(r)));
      const auto perm = rng.permutation(n);
      for (std::size_t i = 0; i < n; ++i) {
        permuted[i] = windows[i].features;
        for (std::size_t col : group_cols)
          permuted[i][col] = windows[perm[i]].features[col];
      }
      for (std::size_t i = 0; i < n; ++i) perm_pred[i] = predict(permuted[i]).state;
      const auto shuffled = compute_metrics(truth, perm_pred);
      for (int s = 0; s < kStateCount; ++s)
        drop_sum[s] += baseline.per_state[s].recall - shuffled.per_state[s].recall;
    }
    for (int s = 0; s < kStateCount; ++s)
      matrix[s][g] = drop_sum[s] / static_cast<double>(n_repeats);
  }

  for (int s = 0; s < kStateCount; ++s) {
    double peak = 0.0;
    for (double v : matrix[s]) peak = std::max(peak, std::abs(v));
    if (peak > 0.0)
      for (double& v : matrix[s]) v /= peak;
  }
  return matrix;
}

/// Drops every feature column whose channel is not in `channels`, keeping
/// time-major order. Labels, ids, and end times are untouched.
inline std::vector<WindowSample> restrict_windows(const std::vector<WindowSample>& windows,
                                                  const std::vector<int>& channels) {
  if (channels.empty()) throw ConfigError("channel subset must be nonempty");
  std::array<bool, kChannelCount> keep{};
  for (int c : channels) {
    if (c < 0 || c >= kChannelCount) throw ConfigError("channel index out of range");
    keep[c] = true;
  }
  std::vector<WindowSample> out;
  out.reserve(windows.size());
  for (const auto& w : windows) {
    if (w.features.size() % kChannelCount != 0)
      throw DataError("window feature length must be a multiple of the channel count");
    WindowSample r;
    r.label = w.label;
    r.trial_id = w.trial_id;
    r.end_time_s = w.end_time_s;
    r.features.reserve(w.features.size());
    for (std::size_t f = 0; f < w.features.size(); ++f)
      if (keep[f % kChannelCount]) r.features.push_back(w.features[f]);
    out.push_back(std::move(r));
  }
  return out;
}

struct ModelEvaluation {
  MetricsSummary metrics;
  EventTimeStats events;
  ImportanceMatrix importance{};
  std::vector<TrialTimeline> timelines;
};

/// Full test-set evaluation: window metrics, per-trial event detection against
/// ground truth, permutation importance, timelines.
inline ModelEvaluation evaluate_model(const PredictFn& predict,
                                      const std::vector<LabeledTrial>& test_trials,
                                      const WindowingConfig& windowing, int debounce_k,
                                      int importance_repeats, RngSeed seed) {
  if (test_trials.empty()) throw DataError("evaluation needs at least one test trial");

  ModelEvaluation out;
  std::vector<PickState> truth;
  std::vector<PickState> pred;
  std::vector<WindowSample> all_windows;

  for (const auto& lt : test_trials) {
    const auto windows = make_windows(lt, windowing);
    if (windows.empty()) continue;

    TrialTimeline timeline;
    timeline.trial_id = lt.trial.id;
    timeline.truth_outcome = lt.trial.outcome;
    timeline.truth_event_s = lt.trial.event_time_s;

    std::vector<std::pair<double, PickState>> ordered;
    ordered.reserve(windows.size());
    for (const auto& w : windows) {
      const auto p = predict(w.features);
      truth.push_back(w.label);
      pred.push_back(p.state);
      ordered.emplace_back(w.end_time_s, p.state);
      timeline.steps.push_back({w.end_time_s, w.label, p.state});
      all_windows.push_back(w);
    }

    TrialEventResult ev;
    ev.trial_id = lt.trial.id;
    ev.truth_outcome = lt.trial.outcome;
    ev.truth_time_s = lt.trial.event_time_s;
    ev.detection = detect_event_time(ordered, debounce_k);
    if (ev.detection.detected) {
      ev.abs_error_s = std::abs(ev.detection.time_s - ev.truth_time_s);
      out.events.mean_abs_error_s += ev.abs_error_s;
      ++out.events.detected;
    } else {
      ++out.events.missed;
    }
    timeline.detection = ev.detection;
    out.events.per_trial.push_back(std::move(ev));
    out.timelines.push_back(std::move(timeline));
  }

  if (truth.empty()) throw DataError("test trials produced no windows");
  if (out.events.detected > 0)
    out.events.mean_abs_error_s /= static_cast<double>(out.events.detected);
  out.metrics = compute_metrics(truth, pred);
  out.importance = permutation_importance(predict, all_windows, importance_repeats, seed);
  return out;
}

}  // namespace pickstate
