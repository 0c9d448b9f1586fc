#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "pickstate/core.hpp"

namespace pickstate {

// ---------------------------------------------------------------------------
// Trial-level splitting, range-scaled Gaussian augmentation with class
// rebalancing, and sliding-window featurization.
// ---------------------------------------------------------------------------

struct AugmentConfig {
  /// Maximum noise std as a fraction of each channel's range.
  double alpha = 0.05;
  int copies_failed = 7;
  int copies_success = 1;

  void validate() const {
    if (alpha < 0.0) throw ConfigError("alpha must be >= 0");
    if (copies_failed < 0 || copies_success < 0)
      throw ConfigError("augmentation copy counts must be >= 0");
  }
};

struct WindowingConfig {
  int window_len = 5;
  int stride = 5;

  void validate() const {
    if (window_len < 1) throw ConfigError("window_len must be >= 1");
    if (stride < 1) throw ConfigError("stride must be >= 1");
  }
};

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;

  void validate() const {
    if (train < 0.0 || val < 0.0 || test < 0.0)
      throw ConfigError("split fractions must be >= 0");
    if (std::abs(train + val + test - 1.0) > 1e-9)
      throw ConfigError("split fractions must sum to 1");
  }
};

namespace split_detail {

// Global sizes follow the rounding rule exactly; per-outcome allocation
// apportions those sizes proportionally, then repairs rounding drift and
// guarantees every nonempty part at least one failure trial when the failure
// count allows it (priority train, test, val).
struct PartSizes {
  long train = 0;
  long val = 0;
  long test = 0;
};

inline PartSizes global_sizes(long n, const SplitFractions& f) {
  PartSizes s;
  s.train = std::llround(f.train * static_cast<double>(n));
  s.val = std::llround(f.val * static_cast<double>(n));
  s.train = std::clamp(s.train, 0L, n);
  s.val = std::clamp(s.val, 0L, n - s.train);
  s.test = n - s.train - s.val;
  return s;
}

}  // namespace split_detail

/// Stratified trial-level split. Sizes obey round(f_train·N), round(f_val·N),
/// remainder to test; assignment is deterministic in the seed.
inline SplitAssignment split_trials(const std::vector<std::string>& ids,
                                    const std::vector<Outcome>& outcomes,
                                    const SplitFractions& fractions, RngSeed seed) {
  fractions.validate();
  if (ids.empty()) throw DataError("cannot split an empty corpus");
  if (ids.size() != outcomes.size())
    throw DataError("ids and outcomes must be the same length");
  {
    std::unordered_set<std::string> seen;
    for (const auto& id : ids)
      if (!seen.insert(id).second) throw DataError("duplicate trial id: " + id);
  }

  const long n = static_cast<long>(ids.size());
  const auto target = split_detail::global_sizes(n, fractions);

  std::vector<std::size_t> success_idx;
  std::vector<std::size_t> failure_idx;
  for (std::size_t i = 0; i < outcomes.size(); ++i)
    (outcomes[i] == Outcome::Success ? success_idx : failure_idx).push_back(i);

  Rng rng(seed);
  rng.shuffle(success_idx);
  rng.shuffle(failure_idx);

  const long n_fail = static_cast<long>(failure_idx.size());
  // Failure quota per part: proportional share, repaired to sum exactly,
  // then bumped so each nonempty part holds >= 1 failure while quotas fit.
  long f_train = std::llround(fractions.train * static_cast<double>(n_fail));
  long f_val = std::llround(fractions.val * static_cast<double>(n_fail));
  f_train = std::clamp(f_train, 0L, std::min(n_fail, target.train));
  f_val = std::clamp(f_val, 0L, std::min(n_fail - f_train, target.val));
  long f_test = std::clamp(n_fail - f_train - f_val, 0L, target.test);
  f_train = std::min(n_fail - f_val - f_test, target.train);

  struct Slot {
    long* quota;
    long cap;
  };
  Slot prio[3] = {{&f_train, target.train}, {&f_test, target.test}, {&f_val, target.val}};
  long assigned = f_train + f_val + f_test;
  for (auto& s : prio) {  // leftover failures, by priority
    while (assigned < n_fail && *s.quota < s.cap) {
      ++*s.quota;
      ++assigned;
    }
  }
  for (auto& s : prio) {  // minimum one failure per nonempty part
    if (s.cap > 0 && *s.quota == 0) {
      for (auto& donor : prio) {
        if (&donor != &s && *donor.quota > 1) {
          --*donor.quota;
          ++*s.quota;
          break;
        }
      }
    }
  }

  SplitAssignment out;
  auto take = [&](std::vector<std::size_t>& pool, long count,
                  std::vector<std::string>& dest) {
    for (long k = 0; k < count && !pool.empty(); ++k) {
      dest.push_back(ids[pool.back()]);
      pool.pop_back();
    }
  };
  take(failure_idx, f_train, out.train);
  take(failure_idx, f_val, out.val);
  take(failure_idx, f_test, out.test);
  take(success_idx, target.train - static_cast<long>(out.train.size()), out.train);
  take(success_idx, target.val - static_cast<long>(out.val.size()), out.val);
  take(success_idx, target.test - static_cast<long>(out.test.size()), out.test);

  if (static_cast<long>(out.train.size() + out.val.size() + out.test.size()) != n)
    throw Error("split allocation lost trials");
  return out;
}

inline SplitAssignment split_trials(const std::vector<LabeledTrial>& trials,
                                    const SplitFractions& fractions, RngSeed seed) {
  std::vector<std::string> ids;
  std::vector<Outcome> outcomes;
  ids.reserve(trials.size());
  outcomes.reserve(trials.size());
  for (const auto& lt : trials) {
    ids.push_back(lt.trial.id);
    outcomes.push_back(lt.trial.outcome);
  }
  return split_trials(ids, outcomes, fractions, seed);
}

/// Adds zero-mean Gaussian noise per channel with std drawn uniformly from
/// [0, alpha * channel range]. Labels, outcome, and event time are untouched.
inline LabeledTrial augment_trial(const LabeledTrial& src, double alpha, RngSeed seed) {
  if (alpha < 0.0) throw ConfigError("alpha must be >= 0");
  LabeledTrial out = src;
  Rng rng(seed);
  for (int c = 0; c < kChannelCount; ++c) {
    auto& series = out.trial.channels[c];
    if (series.empty()) continue;
    const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
    const double range = *hi - *lo;
    const double sigma = rng.uniform(0.0, alpha * range);
    if (sigma == 0.0) continue;
    for (double& v : series) v += rng.normal(0.0, sigma);
  }
  return out;
}

/// Originals plus per-outcome noisy copies. Copy ids get a deterministic
/// "#augN" suffix; per-copy seeds derive from the trial index and copy number.
inline std::vector<LabeledTrial> augment_split(const std::vector<LabeledTrial>& train,
                                               const AugmentConfig& cfg, RngSeed seed) {
  cfg.validate();
  std::vector<LabeledTrial> out;
  out.reserve(train.size() * 2);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto& lt = train[i];
    out.push_back(lt);
    const int copies =
        lt.trial.outcome == Outcome::Failure ? cfg.copies_failed : cfg.copies_success;
    for (int k = 0; k < copies; ++k) {
      const RngSeed copy_seed =
          derive_seed(derive_seed(seed, "trial", static_cast<std::uint64_t>(i)), "copy",
                      static_cast<std::uint64_t>(k));
      LabeledTrial aug = augment_trial(lt, cfg.alpha, copy_seed);
      aug.trial.id += "#aug" + std::to_string(k);
      out.push_back(std::move(aug));
    }
  }
  return out;
}

/// Fixed-length sliding windows starting at 0, S, 2S, ... Features are
/// flattened time-major (all channels of step 0, then step 1, ...); the label
/// is the state at the window's final step. T < L yields an empty list.
inline std::vector<WindowSample> make_windows(const LabeledTrial& lt,
                                              const WindowingConfig& cfg) {
  cfg.validate();
  const auto& trial = lt.trial;
  const std::size_t t_len = trial.length();
  if (lt.labels.size() != t_len)
    throw DataError("trial " + trial.id + ": label count does not match length");
  const auto L = static_cast<std::size_t>(cfg.window_len);
  const auto S = static_cast<std::size_t>(cfg.stride);

  std::vector<WindowSample> out;
  if (t_len < L) return out;
  const std::size_t count = (t_len - L) / S + 1;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t start = w * S;
    WindowSample sample;
    sample.trial_id = trial.id;
    sample.features.reserve(L * kChannelCount);
    for (std::size_t step = 0; step < L; ++step)
      for (int c = 0; c < kChannelCount; ++c)
        sample.features.push_back(trial.channels[c][start + step]);
    const std::size_t last = start + L - 1;
    sample.label = lt.labels[last];
    sample.end_time_s = static_cast<double>(last) / trial.sample_rate_hz;
    out.push_back(std::move(sample));
  }
  return out;
}

inline std::vector<WindowSample> make_windows(const std::vector<LabeledTrial>& trials,
                                              const WindowingConfig& cfg) {
  std::vector<WindowSample> out;
  for (const auto& lt : trials) {
    auto w = make_windows(lt, cfg);
    out.insert(out.end(), std::make_move_iterator(w.begin()),
               std::make_move_iterator(w.end()));
  }
  return out;
}

/// Filters a labeled corpus down to the ids in one split part, keeping the
/// part's order.
inline std::vector<LabeledTrial> select_trials(const std::vector<LabeledTrial>& corpus,
                                               const std::vector<std::string>& part) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < corpus.size(); ++i) index[corpus[i].trial.id] = i;
  std::vector<LabeledTrial> out;
  out.reserve(part.size());
  for (const auto& id : part) {
    auto it = index.find(id);
    if (it == index.end()) throw DataError("split names unknown trial id: " + id);
    out.push_back(corpus[it->second]);
  }
  return out;
}

}  // namespace pickstate
