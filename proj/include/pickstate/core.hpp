#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pickstate {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct DataError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};
struct OnsetNotFound : DataError {
  using DataError::DataError;
};
struct TrainingDiverged : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Channel taxonomy
//
// The channel layout is fixed and identical across all trials: six
// force/torque axes from the wrist sensor, one vacuum pressure line, four
// flex strips on the suction cup, one time-of-flight ranger. Everything that
// indexes channels goes through these tables.
// ---------------------------------------------------------------------------

inline constexpr int kChannelCount = 12;
inline constexpr int kStateCount = 4;
inline constexpr int kGroupCount = 4;

enum class SensorGroup : int { Force = 0, Pressure = 1, Flex = 2, Tof = 3 };

enum class PickState : int {
  Picking = 0,
  PreFailure = 1,
  Picked = 2,
  FailedPick = 3,
};

enum class Outcome : int { Success = 0, Failure = 1 };

inline constexpr std::array<int, kGroupCount> kGroupSizes = {6, 1, 4, 1};

inline constexpr std::array<SensorGroup, kChannelCount> kChannelGroups = {
    SensorGroup::Force,    SensorGroup::Force, SensorGroup::Force,
    SensorGroup::Force,    SensorGroup::Force, SensorGroup::Force,
    SensorGroup::Pressure, SensorGroup::Flex,  SensorGroup::Flex,
    SensorGroup::Flex,     SensorGroup::Flex,  SensorGroup::Tof,
};

inline constexpr std::array<std::string_view, kChannelCount> kChannelNames = {
    "fx",    "fy",    "fz",    "tx",    "ty",    "tz",
    "pressure", "flex0", "flex1", "flex2", "flex3", "tof",
};

inline constexpr std::array<std::string_view, kGroupCount> kGroupNames = {
    "force", "pressure", "flex", "tof"};

inline constexpr std::array<std::string_view, kStateCount> kStateNames = {
    "picking", "pre_failure", "picked", "failed_pick"};

static_assert(kGroupSizes[0] + kGroupSizes[1] + kGroupSizes[2] + kGroupSizes[3] ==
              kChannelCount);
static_assert([] {
  // kChannelGroups must list each group contiguously with kGroupSizes counts.
  std::array<int, kGroupCount> seen{};
  for (auto g : kChannelGroups) seen[static_cast<int>(g)]++;
  for (int g = 0; g < kGroupCount; ++g)
    if (seen[g] != kGroupSizes[g]) return false;
  return true;
}());

struct ChannelId {
  SensorGroup sensor_group = SensorGroup::Force;
  int index_within_group = 0;
};

constexpr int group_offset(SensorGroup g) {
  int off = 0;
  for (int i = 0; i < static_cast<int>(g); ++i) off += kGroupSizes[i];
  return off;
}

constexpr int flat_index(ChannelId id) {
  return group_offset(id.sensor_group) + id.index_within_group;
}

constexpr ChannelId channel_id(int flat) {
  SensorGroup g = kChannelGroups[flat];
  return ChannelId{g, flat - group_offset(g)};
}

constexpr SensorGroup group_of_channel(int flat) { return kChannelGroups[flat]; }

inline std::vector<int> channels_in_group(SensorGroup g) {
  std::vector<int> out;
  for (int c = 0; c < kChannelCount; ++c)
    if (kChannelGroups[c] == g) out.push_back(c);
  return out;
}

inline std::string_view state_name(PickState s) {
  return kStateNames[static_cast<int>(s)];
}

inline std::string_view group_name(SensorGroup g) {
  return kGroupNames[static_cast<int>(g)];
}

inline std::string_view outcome_name(Outcome o) {
  return o == Outcome::Success ? "success" : "failure";
}

inline Outcome outcome_from_name(std::string_view s) {
  if (s == "success") return Outcome::Success;
  if (s == "failure") return Outcome::Failure;
  throw DataError("unknown outcome: " + std::string(s));
}

inline PickState state_from_code(int code) {
  if (code < 0 || code >= kStateCount)
    throw DataError("pick state code out of range: " + std::to_string(code));
  return static_cast<PickState>(code);
}

// ---------------------------------------------------------------------------
// Seeding
//
// Every stochastic operation takes an explicit seed; sub-streams are derived
// by hash mixing so per-trial / per-tree work parallelizes without sharing
// generator state.
// ---------------------------------------------------------------------------

struct RngSeed {
  std::uint64_t value = 0;
};

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr RngSeed derive_seed(RngSeed master, std::string_view purpose_tag,
                              std::uint64_t index) {
  std::uint64_t h = splitmix64(master.value ^ fnv1a64(purpose_tag));
  h = splitmix64(h ^ (0x9e3779b97f4a7c15ULL + index));
  return RngSeed{h};
}

/// Deterministic random stream. std::mt19937_64 output is pinned by the
/// standard; the distribution transforms below are pinned here so identical
/// seeds give bit-identical draws on any conforming platform.
class Rng {
 public:
  explicit Rng(RngSeed seed) : engine_(seed.value) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; pairs are cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * kPi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw Error("Rng::below: n must be positive");
    std::uint64_t x, r;
    do {
      x = next_u64();
      r = x % n;
    } while (x - r > std::uint64_t(0) - n);
    return r;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[below(i)]);
  }

  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    shuffle(p);
    return p;
  }

 private:
  static constexpr double kPi = 3.141592653589793238462643383279502884;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// One pick attempt: C equal-length channel series at a fixed sample rate,
/// the recorded outcome, and the ground-truth event time (abscission for
/// successes, slip for failures) measured from the start of the series.
struct Trial {
  std::string id;
  double sample_rate_hz = 0.0;
  std::array<std::vector<double>, kChannelCount> channels;
  Outcome outcome = Outcome::Success;
  double event_time_s = 0.0;
  long onset_index = -1;  // grasp-onset sample; set by preprocessing, -1 = raw

  std::size_t length() const { return channels[0].size(); }

  /// Throws DataError if any structural invariant is violated.
  void validate() const {
    if (sample_rate_hz <= 0.0) throw DataError(id + ": sample_rate_hz must be positive");
    std::size_t t = channels[0].size();
    if (t < 1) throw DataError(id + ": empty channel series");
    for (const auto& ch : channels) {
      if (ch.size() != t) throw DataError(id + ": channel lengths differ");
      for (double v : ch)
        if (!std::isfinite(v)) throw DataError(id + ": non-finite sample");
    }
    if (event_time_s < 0.0 ||
        event_time_s > static_cast<double>(t) / sample_rate_hz)
      throw DataError(id + ": event_time_s outside the recorded span");
  }
};

/// A trial plus its per-sample state labels (available after preprocessing).
struct LabeledTrial {
  Trial trial;
  std::vector<PickState> labels;
};

/// Trial-level split: disjoint id sets whose union is the corpus.
struct SplitAssignment {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

/// Flattened features of `L` consecutive time steps across all channels,
/// time-major (step 0 channels, step 1 channels, ...), labeled by the state
/// at the window's final step.
struct WindowSample {
  std::vector<double> features;
  PickState label = PickState::Picking;
  std::string trial_id;
  double end_time_s = 0.0;
};

/// Classifier output shared by the forest and the MLP.
struct Prediction {
  PickState state = PickState::Picking;
  std::array<double, kStateCount> probabilities{};
};

/// Argmax with ties broken by the lowest class code.
inline PickState argmax_state(const std::array<double, kStateCount>& p) {
  int best = 0;
  for (int k = 1; k < kStateCount; ++k)
    if (p[k] > p[best]) best = k;
  return static_cast<PickState>(best);
}

}  // namespace pickstate
