#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <set>

#include "pickstate/io.hpp"

using namespace pickstate;

namespace {

std::filesystem::path scratch_dir(const char* leaf) {
  auto dir = std::filesystem::temp_directory_path() / "pickstate_tests" / leaf;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

Trial make_trial(const std::string& id, Outcome outcome, std::size_t t) {
  Trial trial;
  trial.id = id;
  trial.sample_rate_hz = 50.0;
  trial.outcome = outcome;
  trial.event_time_s = 0.25 * static_cast<double>(t) / trial.sample_rate_hz;
  for (int c = 0; c < kChannelCount; ++c) {
    trial.channels[c].resize(t);
    for (std::size_t i = 0; i < t; ++i)
      trial.channels[c][i] = 0.1 * c + 0.001 * static_cast<double>(i) + 1.0 / (c + 1);
  }
  return trial;
}

}  // namespace

TEST_CASE("channel tables are consistent") {
  CHECK(std::accumulate(kGroupSizes.begin(), kGroupSizes.end(), 0) == kChannelCount);
  CHECK(group_offset(SensorGroup::Force) == 0);
  CHECK(group_offset(SensorGroup::Pressure) == 6);
  CHECK(group_offset(SensorGroup::Flex) == 7);
  CHECK(group_offset(SensorGroup::Tof) == 11);

  for (int c = 0; c < kChannelCount; ++c) {
    const auto id = channel_id(c);
    CHECK(flat_index(id) == c);
    CHECK(group_of_channel(c) == kChannelGroups[static_cast<std::size_t>(c)]);
  }

  CHECK(kChannelNames[0] == "fx");
  CHECK(kChannelNames[5] == "tz");
  CHECK(kChannelNames[6] == "pressure");
  CHECK(kChannelNames[7] == "flex0");
  CHECK(kChannelNames[11] == "tof");

  CHECK(channels_in_group(SensorGroup::Flex) == std::vector<int>{7, 8, 9, 10});
  CHECK(channels_in_group(SensorGroup::Tof) == std::vector<int>{11});
}

TEST_CASE("state and outcome names round-trip") {
  CHECK(state_name(PickState::Picking) == "picking");
  CHECK(state_name(PickState::PreFailure) == "pre_failure");
  CHECK(state_name(PickState::Picked) == "picked");
  CHECK(state_name(PickState::FailedPick) == "failed_pick");
  for (int code = 0; code < kStateCount; ++code)
    CHECK(static_cast<int>(state_from_code(code)) == code);
  CHECK_THROWS_AS(state_from_code(4), DataError);
  CHECK_THROWS_AS(state_from_code(-1), DataError);

  CHECK(outcome_from_name(outcome_name(Outcome::Success)) == Outcome::Success);
  CHECK(outcome_from_name(outcome_name(Outcome::Failure)) == Outcome::Failure);
  CHECK_THROWS_AS(outcome_from_name("maybe"), DataError);
}

TEST_CASE("hash and seed derivation follow the documented formulas") {
  // FNV-1a 64-bit offset basis and one-step fold.
  CHECK(fnv1a64("") == 14695981039346656037ULL);
  CHECK(fnv1a64("a") == ((14695981039346656037ULL ^ 'a') * 1099511628211ULL));

  auto mix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  const RngSeed master{42};
  std::uint64_t h = mix(master.value ^ fnv1a64("sim"));
  h = mix(h ^ (0x9e3779b97f4a7c15ULL + 7));
  CHECK(derive_seed(master, "sim", 7).value == h);

  CHECK(derive_seed(master, "sim", 0).value != derive_seed(master, "split", 0).value);
  CHECK(derive_seed(master, "sim", 0).value != derive_seed(master, "sim", 1).value);
  CHECK(derive_seed(RngSeed{1}, "sim", 0).value != derive_seed(RngSeed{2}, "sim", 0).value);
}

TEST_CASE("rng streams are deterministic and well ranged") {
  Rng a(RngSeed{123});
  Rng b(RngSeed{123});
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng r(RngSeed{7});
  double lo = 1.0, hi = -1.0, sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  CHECK(sum / n == Catch::Approx(0.5).margin(0.01));

  double mean = 0.0, ssq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    mean += z;
    ssq += z * z;
  }
  mean /= n;
  CHECK(mean == Catch::Approx(0.0).margin(0.03));
  CHECK(ssq / n - mean * mean == Catch::Approx(1.0).margin(0.05));

  for (int i = 0; i < 1000; ++i) CHECK(r.below(13) < 13);
  CHECK(r.below(1) == 0);
}

TEST_CASE("shuffle and permutation are unbiased permutations") {
  Rng r(RngSeed{9});
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto shuffled = v;
  r.shuffle(shuffled);
  auto sorted = shuffled;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == v);

  const auto p = r.permutation(64);
  std::set<std::size_t> seen(p.begin(), p.end());
  CHECK(seen.size() == 64);
  CHECK(*seen.rbegin() == 63);
}

TEST_CASE("argmax breaks ties toward the lowest state code") {
  CHECK(argmax_state({0.25, 0.25, 0.25, 0.25}) == PickState::Picking);
  CHECK(argmax_state({0.1, 0.4, 0.4, 0.1}) == PickState::PreFailure);
  CHECK(argmax_state({0.0, 0.0, 0.2, 0.8}) == PickState::FailedPick);
}

TEST_CASE("trial validation rejects malformed series") {
  auto trial = make_trial("t", Outcome::Success, 20);
  CHECK_NOTHROW(trial.validate());

  auto ragged = trial;
  ragged.channels[3].pop_back();
  CHECK_THROWS_AS(ragged.validate(), DataError);

  auto nonfinite = trial;
  nonfinite.channels[0][5] = std::nan("");
  CHECK_THROWS_AS(nonfinite.validate(), DataError);

  auto empty = trial;
  for (auto& ch : empty.channels) ch.clear();
  CHECK_THROWS_AS(empty.validate(), DataError);

  auto bad_rate = trial;
  bad_rate.sample_rate_hz = 0.0;
  CHECK_THROWS_AS(bad_rate.validate(), DataError);
}

TEST_CASE("trial json round-trips every field") {
  auto trial = make_trial("trial_007", Outcome::Failure, 30);
  trial.onset_index = 4;
  std::vector<PickState> labels(30, PickState::Picking);
  for (std::size_t i = 20; i < 30; ++i) labels[i] = PickState::FailedPick;

  const auto dir = scratch_dir("trial_json");
  const auto path = dir / "trial_007.json";
  save_trial(path, trial, &labels, "deadbeefdeadbeef", 42);

  std::vector<PickState> labels_back;
  const Trial back = load_trial(path, &labels_back);
  CHECK(back.id == trial.id);
  CHECK(back.outcome == trial.outcome);
  CHECK(back.sample_rate_hz == trial.sample_rate_hz);
  CHECK(back.event_time_s == trial.event_time_s);
  CHECK(back.onset_index == trial.onset_index);
  for (int c = 0; c < kChannelCount; ++c) CHECK(back.channels[c] == trial.channels[c]);
  CHECK(labels_back == labels);

  const auto j = Json::parse(read_text_file(path));
  CHECK(j.at("config_digest") == "deadbeefdeadbeef");
  CHECK(j.at("master_seed") == 42);
}

TEST_CASE("trial json without labels loads with empty label vector") {
  auto trial = make_trial("raw_trial", Outcome::Success, 12);
  const auto dir = scratch_dir("trial_raw");
  const auto path = dir / "raw_trial.json";
  save_trial(path, trial, nullptr, "", std::nullopt);
  std::vector<PickState> labels;
  const Trial back = load_trial(path, &labels);
  CHECK(back.id == "raw_trial");
  CHECK(labels.empty());
}

TEST_CASE("corpus manifests and directories round-trip in order") {
  const auto dir = scratch_dir("corpus");
  CorpusManifest manifest;
  manifest.master_seed = 99;
  manifest.config_digest = "0123456789abcdef";
  manifest.stage = Json{{"name", "simulate"}};

  std::vector<Trial> trials;
  for (int i = 0; i < 3; ++i) {
    auto t = make_trial("trial_00" + std::to_string(i),
                        i == 2 ? Outcome::Failure : Outcome::Success, 10 + i);
    manifest.trial_ids.push_back(t.id);
    save_trial(dir / (t.id + ".json"), t, nullptr, manifest.config_digest, 99);
    trials.push_back(std::move(t));
  }
  save_manifest(dir / "manifest.json", manifest);

  const auto manifest_back = load_manifest(dir / "manifest.json");
  CHECK(manifest_back.trial_ids == manifest.trial_ids);
  CHECK(manifest_back.master_seed == 99);
  CHECK(manifest_back.config_digest == manifest.config_digest);
  CHECK(manifest_back.stage.at("name") == "simulate");

  const auto corpus = load_corpus(dir);
  REQUIRE(corpus.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(corpus[i].trial.id == trials[i].id);

  CHECK_THROWS_AS(load_corpus(dir / "missing"), IoError);
}

TEST_CASE("window csv round-trips doubles bit-exactly") {
  std::vector<WindowSample> windows;
  Rng r(RngSeed{5});
  for (int i = 0; i < 17; ++i) {
    WindowSample w;
    w.features.resize(60);
    for (auto& f : w.features) f = r.normal(0.0, 3.0);
    w.features[0] = 0.1;  // not exactly representable
    w.label = state_from_code(i % kStateCount);
    w.trial_id = "trial_" + std::to_string(i % 5);
    w.end_time_s = 0.1 * (i + 1);
    windows.push_back(std::move(w));
  }
  const auto dir = scratch_dir("windows");
  const auto path = dir / "w.csv";
  save_windows_csv(path, windows, "feedfacefeedface", 42);
  const auto back = load_windows_csv(path);
  REQUIRE(back.size() == windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    CHECK(back[i].features == windows[i].features);
    CHECK(back[i].label == windows[i].label);
    CHECK(back[i].trial_id == windows[i].trial_id);
    CHECK(back[i].end_time_s == windows[i].end_time_s);
  }

  const auto text = read_text_file(path);
  CHECK(text.rfind("# pickstate windows config_digest=feedfacefeedface master_seed=42",
                   0) == 0);
}

TEST_CASE("io errors carry the offending path") {
  CHECK_THROWS_AS(read_text_file("/nonexistent/pickstate.txt"), IoError);
  const auto dir = scratch_dir("bad_json");
  write_text_file(dir / "bad.json", "{not json");
  CHECK_THROWS_AS(load_trial(dir / "bad.json", nullptr), Error);
  write_text_file(dir / "bad.csv", "# pickstate windows\nnot,a,header\n1,2\n");
  CHECK_THROWS_AS(load_windows_csv(dir / "bad.csv"), Error);
}
