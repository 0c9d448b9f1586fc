#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pickstate/core.hpp"

namespace pickstate {

// ---------------------------------------------------------------------------
// Synthetic trial generator. Channel dynamics follow the qualitative event
// signatures of a suction pick: load transfer onto the wrist at abscission,
// vacuum leak in the second before a slip, flex tremor while the grip
// degrades, and a ToF jump once the fruit moves away. Piecewise-linear
// segments plus Gaussian noise plus a slow drift term; ground-truth event
// times are recorded exactly.
// ---------------------------------------------------------------------------

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool valid() const { return lo <= hi; }
};

struct SimConfig {
  double sample_rate_hz = 50.0;
  Range duration_s{4.0, 8.0};
  /// Event time as a fraction of the trial duration.
  Range event_fraction{0.4, 0.8};
  /// Per-channel Gaussian noise std as a fraction of that channel's signal range.
  double noise_std_frac = 0.03;
  /// Pull-force ramp slope on fz while the stem holds (N/s).
  Range pull_slope_n_per_s{1.2, 2.2};
  /// Sustained fz offset after abscission (fruit weight, N).
  Range fruit_weight_n{0.8, 2.5};
  /// Vacuum-leak ramp length before a slip event.
  double leak_ramp_s = 1.0;
  /// Flex tremor amplitude during the leak band, as a fraction of flex swing.
  double flex_tremor_frac = 0.12;
  /// ToF step after a failed pick (mm).
  double tof_step_mm = 40.0;
  /// Suction engagement delay from trial start.
  Range onset_delay_s{0.3, 0.6};
  /// Scales noise x3 for ablation studies on a harder regime.
  bool hard = false;

  void validate() const {
    if (sample_rate_hz <= 0.0) throw ConfigError("sample_rate_hz must be positive");
    if (!duration_s.valid() || !event_fraction.valid() ||
        !pull_slope_n_per_s.valid() || !fruit_weight_n.valid() ||
        !onset_delay_s.valid())
      throw ConfigError("all simulator ranges must satisfy lo <= hi");
    if (duration_s.lo < 2.0)
      throw ConfigError("duration_s must allow at least 2 s so the pre-failure band fits");
    if (event_fraction.lo <= 0.0 || event_fraction.hi >= 1.0)
      throw ConfigError("event_fraction must lie strictly inside (0, 1)");
    if (noise_std_frac < 0.0) throw ConfigError("noise_std_frac must be >= 0");
    if (leak_ramp_s <= 0.0) throw ConfigError("leak_ramp_s must be positive");
    if (flex_tremor_frac < 0.0) throw ConfigError("flex_tremor_frac must be >= 0");
    if (pull_slope_n_per_s.lo <= 0.0) throw ConfigError("pull slope must be positive");
    if (onset_delay_s.lo < 0.0) throw ConfigError("onset_delay_s must be >= 0");
    if (onset_delay_s.hi + leak_ramp_s + 0.5 > duration_s.lo * event_fraction.hi)
      throw ConfigError("onset delay leaves no room for the pre-failure band");
  }
};

namespace sim_detail {

// Fixed reference levels, arbitrary but consistent units.
inline constexpr double kAtmospheric = 101.3;  // pressure, vacuum-low convention
inline constexpr double kEngageRampS = 0.08;   // suction spin-up
inline constexpr double kFzLateralCoupling = 0.12;
inline constexpr double kTorqueCoupling = 0.05;

struct DriftTerm {
  double amplitude = 0.0;
  double freq_hz = 0.0;
  double phase = 0.0;
  double at(double t) const {
    return amplitude * std::sin(2.0 * 3.141592653589793 * freq_hz * t + phase);
  }
};

inline DriftTerm draw_drift(Rng& rng, double amplitude) {
  DriftTerm d;
  d.amplitude = amplitude;
  d.freq_hz = rng.uniform(0.05, 0.2);
  d.phase = rng.uniform(0.0, 2.0 * 3.141592653589793);
  return d;
}

}  // namespace sim_detail

/// Generates one seeded trial with the configured outcome signatures.
inline Trial generate_trial(const SimConfig& cfg, Outcome outcome, RngSeed seed,
                            const std::string& id = "trial") {
  cfg.validate();
  Rng rng(seed);

  const double duration = rng.uniform(cfg.duration_s.lo, cfg.duration_s.hi);
  const double onset_t = rng.uniform(cfg.onset_delay_s.lo, cfg.onset_delay_s.hi);
  double event_t =
      rng.uniform(cfg.event_fraction.lo, cfg.event_fraction.hi) * duration;
  // Keep a picking stretch between engagement and the pre-failure band.
  event_t = std::max(event_t, onset_t + cfg.leak_ramp_s + 0.3);
  const double slope = rng.uniform(cfg.pull_slope_n_per_s.lo, cfg.pull_slope_n_per_s.hi);
  const double weight = rng.uniform(cfg.fruit_weight_n.lo, cfg.fruit_weight_n.hi);
  const double vacuum = rng.uniform(28.0, 34.0);
  const double tof_contact = rng.uniform(10.0, 14.0);
  const double lateral_x = rng.uniform(-1.0, 1.0);
  const double lateral_y = rng.uniform(-1.0, 1.0);
  const double leak_start = event_t - cfg.leak_ramp_s;
  const double leak_level = 0.75;  // fraction of the vacuum-to-atmospheric gap
  const double peak_load = slope * (event_t - onset_t);

  std::array<double, kChannelCount> noise_std;
  std::array<double, kGroupCount> group_range;
  group_range[0] = peak_load + weight;
  group_range[1] = sim_detail::kAtmospheric - vacuum;
  group_range[2] = 0.0;  // filled per flex channel below
  group_range[3] = cfg.tof_step_mm;

  std::array<double, 4> flex_gain;
  std::array<double, 4> flex_base;
  for (int k = 0; k < 4; ++k) {
    flex_base[k] = rng.uniform(10.0, 14.0);
    flex_gain[k] = rng.uniform(0.8, 1.2);
  }

  const double noise_scale = cfg.noise_std_frac * (cfg.hard ? 3.0 : 1.0);
  for (int c = 0; c < kChannelCount; ++c) {
    switch (group_of_channel(c)) {
      case SensorGroup::Force:
        noise_std[c] = noise_scale * group_range[0];
        break;
      case SensorGroup::Pressure:
        noise_std[c] = noise_scale * group_range[1];
        break;
      case SensorGroup::Flex: {
        int k = c - group_offset(SensorGroup::Flex);
        noise_std[c] = noise_scale * flex_gain[k] * peak_load;
        break;
      }
      case SensorGroup::Tof:
        noise_std[c] = noise_scale * group_range[3];
        break;
    }
  }

  std::array<sim_detail::DriftTerm, kChannelCount> drift;
  for (int c = 0; c < kChannelCount; ++c)
    drift[c] = sim_detail::draw_drift(rng, 0.5 * noise_std[c]);

  const double tremor_amp = cfg.flex_tremor_frac * peak_load;
  const double tremor_freq = rng.uniform(6.0, 9.0);
  std::array<double, 4> tremor_phase;
  for (int k = 0; k < 4; ++k) tremor_phase[k] = rng.uniform(0.0, 2.0 * 3.141592653589793);

  const auto n_samples = static_cast<std::size_t>(std::llround(duration * cfg.sample_rate_hz));

  Trial trial;
  trial.id = id;
  trial.sample_rate_hz = cfg.sample_rate_hz;
  trial.outcome = outcome;
  trial.event_time_s = event_t;
  for (auto& series : trial.channels) series.resize(n_samples);

  for (std::size_t i = 0; i < n_samples; ++i) {
    const double t = static_cast<double>(i) / cfg.sample_rate_hz;

    // Stem load carried by the wrist before/after the event.
    double load = 0.0;
    bool in_leak_band = false;
    if (t >= onset_t) {
      if (outcome == Outcome::Success) {
        load = t < event_t ? slope * (t - onset_t) : peak_load + weight;
      } else {
        in_leak_band = t >= leak_start && t < event_t;
        if (t < leak_start) {
          load = slope * (t - onset_t);
        } else if (t < event_t) {
          // Grip slipping: the pull stops building and sags slightly.
          const double l0 = slope * (leak_start - onset_t);
          load = l0 * (1.0 - 0.2 * (t - leak_start) / cfg.leak_ramp_s);
        } else {
          load = 0.0;  // stem never detached; fruit lost
        }
      }
    }

    // Vacuum line.
    double pressure;
    if (t < onset_t) {
      pressure = sim_detail::kAtmospheric;
    } else if (t < onset_t + sim_detail::kEngageRampS) {
      const double f = (t - onset_t) / sim_detail::kEngageRampS;
      pressure = sim_detail::kAtmospheric + f * (vacuum - sim_detail::kAtmospheric);
    } else if (outcome == Outcome::Success) {
      pressure = vacuum;
    } else if (t < leak_start) {
      pressure = vacuum;
    } else if (t < event_t) {
      const double f = (t - leak_start) / cfg.leak_ramp_s;
      pressure = vacuum + f * leak_level * (sim_detail::kAtmospheric - vacuum);
    } else {
      // Seal gone; settles at atmospheric quickly.
      const double f = std::min(1.0, (t - event_t) / 0.15);
      const double at_event = vacuum + leak_level * (sim_detail::kAtmospheric - vacuum);
      pressure = at_event + f * (sim_detail::kAtmospheric - at_event);
    }

    // ToF distance.
    double tof = tof_contact + (t < onset_t ? 2.0 : 0.0);
    if (outcome == Outcome::Failure && t >= event_t) {
      const double f = std::min(1.0, (t - event_t) / 0.12);
      tof = tof_contact + f * cfg.tof_step_mm;
    }

    // Force/torque block.
    const double fx = sim_detail::kFzLateralCoupling * lateral_x * load;
    const double fy = sim_detail::kFzLateralCoupling * lateral_y * load;
    const double fz = load;
    trial.channels[0][i] = fx + drift[0].at(t) + rng.normal(0.0, noise_std[0]);
    trial.channels[1][i] = fy + drift[1].at(t) + rng.normal(0.0, noise_std[1]);
    trial.channels[2][i] = fz + drift[2].at(t) + rng.normal(0.0, noise_std[2]);
    trial.channels[3][i] = sim_detail::kTorqueCoupling * lateral_y * load +
                           drift[3].at(t) + rng.normal(0.0, noise_std[3]);
    trial.channels[4][i] = sim_detail::kTorqueCoupling * lateral_x * load +
                           drift[4].at(t) + rng.normal(0.0, noise_std[4]);
    trial.channels[5][i] = 0.3 * sim_detail::kTorqueCoupling * load +
                           drift[5].at(t) + rng.normal(0.0, noise_std[5]);

    const int pc = group_offset(SensorGroup::Pressure);
    trial.channels[pc][i] = pressure + drift[pc].at(t) + rng.normal(0.0, noise_std[pc]);

    // Flex strips track cup deformation under load; after the event the cup
    // relaxes and the signal turns noisier.
    const int flex0 = group_offset(SensorGroup::Flex);
    for (int k = 0; k < 4; ++k) {
      const int c = flex0 + k;
      double deform;
      double noise_mult = 1.0;
      if (t < onset_t) {
        deform = 0.0;
      } else if (t < event_t) {
        deform = flex_gain[k] * load;
        if (in_leak_band) {
          deform += tremor_amp *
                    std::sin(2.0 * 3.141592653589793 * tremor_freq * (t - leak_start) +
                             tremor_phase[k]);
          noise_mult = 1.6;
        }
      } else {
        deform = flex_gain[k] * 0.1 * peak_load;
        noise_mult = outcome == Outcome::Success ? 1.8 : 1.5;
      }
      trial.channels[c][i] = flex_base[k] + deform + drift[c].at(t) +
                             rng.normal(0.0, noise_mult * noise_std[c]);
    }

    const int tc = group_offset(SensorGroup::Tof);
    trial.channels[tc][i] = tof + drift[tc].at(t) + rng.normal(0.0, noise_std[tc]);
  }

  trial.validate();
  return trial;
}

/// n_success Success trials followed by n_fail Failure trials, each generated
/// from its own derived seed so regeneration and parallel generation agree.
inline std::vector<Trial> generate_corpus(const SimConfig& cfg, int n_success,
                                          int n_fail, RngSeed seed) {
  cfg.validate();
  if (n_success < 0 || n_fail < 0 || n_success + n_fail < 1)
    throw ConfigError("corpus needs at least one trial");
  const int total = n_success + n_fail;
  int width = 3;
  for (int v = total; v >= 1000; v /= 10) ++width;
  std::vector<Trial> out;
  out.reserve(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) {
    std::string digits = std::to_string(i);
    if (static_cast<int>(digits.size()) < width)
      digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
    const Outcome outcome = i < n_success ? Outcome::Success : Outcome::Failure;
    out.push_back(generate_trial(cfg, outcome,
                                 derive_seed(seed, "trial", static_cast<std::uint64_t>(i)),
                                 "trial_" + digits));
  }
  return out;
}

}  // namespace pickstate
