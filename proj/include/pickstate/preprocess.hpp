#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "pickstate/core.hpp"

namespace pickstate {

// ---------------------------------------------------------------------------
// Signal conditioning: grasp-onset cropping, median filtering of force,
// normalization + smoothing of flex, resampling to a common length, and
// per-sample state labeling.
// ---------------------------------------------------------------------------

struct PreprocessConfig {
  int median_window = 5;
  int smooth_window = 5;
  /// Pressure level below which suction counts as engaged (vacuum-low
  /// convention). Unset: resolved to the corpus midpoint by the prep stage,
  /// or to the trial's own (max+min)/2 midpoint by preprocess_trial.
  std::optional<double> onset_pressure_threshold;
  int target_length = 256;
  double pre_failure_band_s = 1.0;

  void validate() const {
    if (median_window < 1 || median_window % 2 == 0)
      throw ConfigError("median_window must be odd and >= 1");
    if (smooth_window < 1 || smooth_window % 2 == 0)
      throw ConfigError("smooth_window must be odd and >= 1");
    if (target_length < 2) throw ConfigError("target_length must be >= 2");
    if (pre_failure_band_s <= 0.0)
      throw ConfigError("pre_failure_band_s must be positive");
  }
};

namespace detail {
inline std::size_t clamp_index(long i, std::size_t n) {
  if (i < 0) return 0;
  if (i >= static_cast<long>(n)) return n - 1;
  return static_cast<std::size_t>(i);
}
}  // namespace detail

/// Same-length median filter with replicate-edge padding.
inline std::vector<double> median_filter(const std::vector<double>& x, int w) {
  if (w < 1 || w % 2 == 0) throw ConfigError("median filter window must be odd and >= 1");
  if (x.empty()) throw DataError("median_filter: empty series");
  const std::size_t n = x.size();
  const int half = w / 2;
  std::vector<double> out(n);
  std::vector<double> window(static_cast<std::size_t>(w));
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = -half; k <= half; ++k)
      window[static_cast<std::size_t>(k + half)] =
          x[detail::clamp_index(static_cast<long>(i) + k, n)];
    auto mid = window.begin() + half;
    std::nth_element(window.begin(), mid, window.end());
    out[i] = *mid;
  }
  return out;
}

/// (x - min) / (max - min); a constant series maps to all zeros.
inline std::vector<double> min_max_normalize(const std::vector<double>& x) {
  if (x.empty()) throw DataError("min_max_normalize: empty series");
  auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<double> out(x.size());
  if (hi == lo) return out;  // all zeros
  const double inv = 1.0 / (hi - lo);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - lo) * inv;
  return out;
}

/// Same-length moving average with replicate-edge padding.
inline std::vector<double> moving_average(const std::vector<double>& x, int w) {
  if (w < 1 || w % 2 == 0) throw ConfigError("moving average window must be odd and >= 1");
  if (x.empty()) throw DataError("moving_average: empty series");
  const std::size_t n = x.size();
  const int half = w / 2;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int k = -half; k <= half; ++k)
      sum += x[detail::clamp_index(static_cast<long>(i) + k, n)];
    out[i] = sum / w;
  }
  return out;
}

/// First index where pressure drops below the threshold.
inline std::size_t detect_grasp_onset(const std::vector<double>& pressure,
                                      double threshold) {
  if (pressure.empty()) throw DataError("detect_grasp_onset: empty series");
  for (std::size_t i = 0; i < pressure.size(); ++i)
    if (pressure[i] < threshold) return i;
  throw OnsetNotFound("no pressure sample below onset threshold");
}

/// Midpoint between the corpus-wide pressure extremes (atmospheric plateau
/// vs. deepest vacuum).
inline double corpus_pressure_threshold(const std::vector<Trial>& trials) {
  if (trials.empty()) throw DataError("corpus_pressure_threshold: empty corpus");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  const int pc = group_offset(SensorGroup::Pressure);
  for (const auto& t : trials) {
    for (double v : t.channels[pc]) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  return 0.5 * (lo + hi);
}

/// Crops every channel at `onset`, linearly resamples the remainder to
/// `target_length` samples spanning the cropped duration, and re-expresses
/// the event time relative to the new origin.
inline Trial crop_and_resample(const Trial& trial, std::size_t onset,
                               int target_length) {
  if (target_length < 2) throw ConfigError("target_length must be >= 2");
  const std::size_t t = trial.length();
  if (onset >= t) throw DataError(trial.id + ": onset index beyond series end");
  if (t - onset < 2) throw DataError(trial.id + ": fewer than 2 samples after onset");
  const double onset_time_s = static_cast<double>(onset) / trial.sample_rate_hz;
  if (trial.event_time_s < onset_time_s)
    throw DataError(trial.id + ": event precedes grasp onset");

  Trial out;
  out.id = trial.id;
  out.outcome = trial.outcome;
  out.event_time_s = trial.event_time_s - onset_time_s;
  out.onset_index = 0;
  const double span_src = static_cast<double>(t - 1 - onset);
  const double span_s = span_src / trial.sample_rate_hz;
  out.sample_rate_hz = static_cast<double>(target_length - 1) / span_s;
  const double step = span_src / static_cast<double>(target_length - 1);
  for (int c = 0; c < kChannelCount; ++c) {
    const auto& src = trial.channels[c];
    auto& dst = out.channels[c];
    dst.resize(static_cast<std::size_t>(target_length));
    for (int j = 0; j < target_length; ++j) {
      const double pos = static_cast<double>(onset) + step * j;
      const std::size_t i0 = std::min(static_cast<std::size_t>(pos), t - 1);
      const std::size_t i1 = std::min(i0 + 1, t - 1);
      const double frac = pos - static_cast<double>(i0);
      dst[static_cast<std::size_t>(j)] = src[i0] + frac * (src[i1] - src[i0]);
    }
    // Endpoints are preserved exactly.
    dst.front() = src[onset];
    dst.back() = src[t - 1];
  }
  return out;
}

/// Per-sample state sequence for a preprocessed trial (onset at 0).
/// Success: Picking on [0, event), Picked from the event on. Failure:
/// Picking, then PreFailure on the band before the slip, then FailedPick.
/// The sample at the event boundary belongs to the later state.
inline std::vector<PickState> label_states(const Trial& trial,
                                           double pre_failure_band_s = 1.0) {
  const std::size_t t = trial.length();
  std::vector<PickState> labels(t);
  const double event = trial.event_time_s;
  const double band_start = std::max(0.0, event - pre_failure_band_s);
  for (std::size_t i = 0; i < t; ++i) {
    const double ti = static_cast<double>(i) / trial.sample_rate_hz;
    if (trial.outcome == Outcome::Success) {
      labels[i] = ti < event ? PickState::Picking : PickState::Picked;
    } else {
      if (ti < band_start)
        labels[i] = PickState::Picking;
      else if (ti < event)
        labels[i] = PickState::PreFailure;
      else
        labels[i] = PickState::FailedPick;
    }
  }
  return labels;
}

/// Full conditioning pass: median-filter force, normalize + smooth flex,
/// pass pressure and ToF through, crop at the detected onset, resample to
/// the common length, label.
inline LabeledTrial preprocess_trial(const Trial& raw,
                                     const PreprocessConfig& cfg) {
  cfg.validate();
  raw.validate();
  Trial filtered = raw;
  for (int c : channels_in_group(SensorGroup::Force))
    filtered.channels[c] = median_filter(raw.channels[c], cfg.median_window);
  for (int c : channels_in_group(SensorGroup::Flex))
    filtered.channels[c] =
        moving_average(min_max_normalize(raw.channels[c]), cfg.smooth_window);

  const int pc = group_offset(SensorGroup::Pressure);
  double threshold;
  if (cfg.onset_pressure_threshold) {
    threshold = *cfg.onset_pressure_threshold;
  } else {
    auto [lo, hi] = std::minmax_element(filtered.channels[pc].begin(),
                                        filtered.channels[pc].end());
    threshold = 0.5 * (*lo + *hi);
  }
  const std::size_t onset = detect_grasp_onset(filtered.channels[pc], threshold);

  LabeledTrial out;
  out.trial = crop_and_resample(filtered, onset, cfg.target_length);
  out.labels = label_states(out.trial, cfg.pre_failure_band_s);
  return out;
}

}  // namespace pickstate
