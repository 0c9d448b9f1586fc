#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "pickstate/dataset.hpp"

using namespace pickstate;

namespace {

LabeledTrial flat_trial(const std::string& id, Outcome outcome, std::size_t t,
                        double rate = 50.0) {
  LabeledTrial lt;
  lt.trial.id = id;
  lt.trial.sample_rate_hz = rate;
  lt.trial.outcome = outcome;
  lt.trial.event_time_s = 0.5 * static_cast<double>(t) / rate;
  for (int c = 0; c < kChannelCount; ++c) {
    lt.trial.channels[c].resize(t);
    for (std::size_t i = 0; i < t; ++i)
      lt.trial.channels[c][i] = 100.0 * c + static_cast<double>(i);
  }
  lt.labels.assign(t, PickState::Picking);
  for (std::size_t i = t / 2; i < t; ++i)
    lt.labels[i] = outcome == Outcome::Success ? PickState::Picked : PickState::FailedPick;
  return lt;
}

std::vector<std::string> make_ids(int n) {
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back("trial_" + std::to_string(i));
  return ids;
}

}  // namespace

TEST_CASE("global split sizes follow the rounding rule") {
  const SplitFractions f;
  const auto s83 = split_detail::global_sizes(83, f);
  CHECK(s83.train == 66);
  CHECK(s83.val == 8);
  CHECK(s83.test == 9);
  const auto s10 = split_detail::global_sizes(10, f);
  CHECK(s10.train == 8);
  CHECK(s10.val == 1);
  CHECK(s10.test == 1);
}

TEST_CASE("the 83-trial default corpus splits 66/8/9 with failures everywhere") {
  auto ids = make_ids(83);
  std::vector<Outcome> outcomes(83, Outcome::Success);
  for (int i = 72; i < 83; ++i) outcomes[static_cast<std::size_t>(i)] = Outcome::Failure;

  const auto split = split_trials(ids, outcomes, SplitFractions{}, RngSeed{42});
  CHECK(split.train.size() == 66);
  CHECK(split.val.size() == 8);
  CHECK(split.test.size() == 9);

  auto count_failures = [&](const std::vector<std::string>& part) {
    long n = 0;
    for (const auto& id : part) {
      const int idx = std::stoi(id.substr(6));
      if (outcomes[static_cast<std::size_t>(idx)] == Outcome::Failure) ++n;
    }
    return n;
  };
  CHECK(count_failures(split.train) == 9);
  CHECK(count_failures(split.val) == 1);
  CHECK(count_failures(split.test) == 1);

  std::set<std::string> all(split.train.begin(), split.train.end());
  all.insert(split.val.begin(), split.val.end());
  all.insert(split.test.begin(), split.test.end());
  CHECK(all.size() == 83);
}

TEST_CASE("an all-success corpus still splits by the rounding rule") {
  auto ids = make_ids(10);
  std::vector<Outcome> outcomes(10, Outcome::Success);
  const auto split = split_trials(ids, outcomes, SplitFractions{}, RngSeed{0});
  CHECK(split.train.size() == 8);
  CHECK(split.val.size() == 1);
  CHECK(split.test.size() == 1);
}

TEST_CASE("scarce failures go to train first, then test") {
  auto ids = make_ids(20);
  std::vector<Outcome> outcomes(20, Outcome::Success);
  outcomes[4] = Outcome::Failure;

  const auto one = split_trials(ids, outcomes, SplitFractions{}, RngSeed{5});
  auto has = [](const std::vector<std::string>& part, const std::string& id) {
    return std::find(part.begin(), part.end(), id) != part.end();
  };
  CHECK(has(one.train, "trial_4"));

  outcomes[9] = Outcome::Failure;
  const auto two = split_trials(ids, outcomes, SplitFractions{}, RngSeed{5});
  const bool f4_train = has(two.train, "trial_4");
  const bool f9_train = has(two.train, "trial_9");
  const bool f4_test = has(two.test, "trial_4");
  const bool f9_test = has(two.test, "trial_9");
  CHECK((f4_train || f9_train));
  CHECK(((f4_train && f9_test) || (f9_train && f4_test) || (f4_train && f9_train)));
}

TEST_CASE("split rejects duplicates and malformed fractions") {
  auto ids = make_ids(5);
  ids[3] = ids[1];
  std::vector<Outcome> outcomes(5, Outcome::Success);
  CHECK_THROWS_AS(split_trials(ids, outcomes, SplitFractions{}, RngSeed{1}), DataError);

  CHECK_THROWS_AS(split_trials(make_ids(5), outcomes, SplitFractions{0.5, 0.3, 0.1},
                               RngSeed{1}),
                  ConfigError);
  CHECK_THROWS_AS(split_trials(std::vector<std::string>{}, std::vector<Outcome>{},
                               SplitFractions{}, RngSeed{1}),
                  DataError);
}

TEST_CASE("splits are deterministic in the seed and sensitive to it") {
  auto ids = make_ids(40);
  std::vector<Outcome> outcomes(40, Outcome::Success);
  for (int i = 0; i < 8; ++i) outcomes[static_cast<std::size_t>(i)] = Outcome::Failure;
  const auto a = split_trials(ids, outcomes, SplitFractions{}, RngSeed{7});
  const auto b = split_trials(ids, outcomes, SplitFractions{}, RngSeed{7});
  const auto c = split_trials(ids, outcomes, SplitFractions{}, RngSeed{8});
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);
  CHECK((a.train != c.train || a.val != c.val || a.test != c.test));
}

TEST_CASE("alpha zero augmentation is the identity") {
  const auto src = flat_trial("t", Outcome::Failure, 40);
  const auto out = augment_trial(src, 0.0, RngSeed{13});
  for (int c = 0; c < kChannelCount; ++c)
    CHECK(out.trial.channels[c] == src.trial.channels[c]);
  CHECK(out.labels == src.labels);
  CHECK(out.trial.event_time_s == src.trial.event_time_s);
}

TEST_CASE("constant channels are never perturbed") {
  auto src = flat_trial("t", Outcome::Success, 64);
  src.trial.channels[3].assign(64, 7.25);
  const auto out = augment_trial(src, 0.25, RngSeed{99});
  CHECK(out.trial.channels[3] == std::vector<double>(64, 7.25));
  // Non-constant channels do change at this alpha (up to measure-zero sigma=0 draws).
  CHECK(out.trial.channels[0] != src.trial.channels[0]);
}

TEST_CASE("augmented noise standard deviation stays below alpha times range") {
  LabeledTrial src;
  src.trial.id = "mc";
  src.trial.sample_rate_hz = 50.0;
  src.trial.outcome = Outcome::Success;
  src.trial.event_time_s = 1.0;
  const std::size_t n = 4000;
  for (int c = 0; c < kChannelCount; ++c) {
    src.trial.channels[c].resize(n);
    for (std::size_t i = 0; i < n; ++i)
      src.trial.channels[c][i] = (i % 2 == 0) ? 0.0 : 10.0;  // range exactly 10
  }
  src.labels.assign(n, PickState::Picking);

  const double alpha = 0.1;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto out = augment_trial(src, alpha, RngSeed{1000 + s});
    for (int c = 0; c < kChannelCount; ++c) {
      double mean = 0.0, ssq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = out.trial.channels[c][i] - src.trial.channels[c][i];
        mean += d;
        ssq += d * d;
      }
      mean /= static_cast<double>(n);
      const double var = ssq / static_cast<double>(n) - mean * mean;
      const double sd = std::sqrt(std::max(0.0, var));
      const double cap = alpha * 10.0;
      const double se = sd / std::sqrt(2.0 * static_cast<double>(n - 1));
      CHECK(sd <= cap + 3.0 * se);
    }
  }
}

TEST_CASE("the default corpus augments 72/11 into 232 training trials") {
  std::vector<LabeledTrial> train;
  for (int i = 0; i < 72; ++i)
    train.push_back(flat_trial("s" + std::to_string(i), Outcome::Success, 16));
  for (int i = 0; i < 11; ++i)
    train.push_back(flat_trial("f" + std::to_string(i), Outcome::Failure, 16));

  const auto out = augment_split(train, AugmentConfig{}, RngSeed{42});
  CHECK(out.size() == 232);  // 72*2 + 11*8

  long originals = 0, copies = 0;
  for (const auto& lt : out) {
    if (lt.trial.id.find("#aug") == std::string::npos)
      ++originals;
    else
      ++copies;
  }
  CHECK(originals == 83);
  CHECK(copies == 149);

  // Copies preserve outcome, labels, and length.
  CHECK(out[1].trial.id == "s0#aug0");
  CHECK(out[1].trial.outcome == Outcome::Success);
  CHECK(out[1].labels == out[0].labels);
  CHECK(out[1].trial.length() == out[0].trial.length());
}

TEST_CASE("augment_split is deterministic and per-copy independent") {
  std::vector<LabeledTrial> train = {flat_trial("a", Outcome::Failure, 32)};
  const auto x = augment_split(train, AugmentConfig{}, RngSeed{3});
  const auto y = augment_split(train, AugmentConfig{}, RngSeed{3});
  REQUIRE(x.size() == 8);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(x[i].trial.channels[0] == y[i].trial.channels[0]);
  CHECK(x[1].trial.channels[0] != x[2].trial.channels[0]);
}

TEST_CASE("window counts follow floor((T-L)/S)+1") {
  WindowingConfig cfg;  // L = 5, S = 5
  CHECK(make_windows(flat_trial("t", Outcome::Success, 25), cfg).size() == 5);
  CHECK(make_windows(flat_trial("t", Outcome::Success, 5), cfg).size() == 1);
  CHECK(make_windows(flat_trial("t", Outcome::Success, 4), cfg).empty());
  CHECK(make_windows(flat_trial("t", Outcome::Success, 27), cfg).size() == 5);

  WindowingConfig overlap;
  overlap.window_len = 5;
  overlap.stride = 2;
  CHECK(make_windows(flat_trial("t", Outcome::Success, 25), overlap).size() == 11);
}

TEST_CASE("window features are flattened time-major with the final-step label") {
  const auto lt = flat_trial("t", Outcome::Failure, 12, 10.0);
  WindowingConfig cfg;
  const auto windows = make_windows(lt, cfg);
  REQUIRE(windows.size() == 2);

  // channels[c][i] = 100c + i, so feature[step*12 + c] of window w is 100c + (5w + step).
  for (std::size_t w = 0; w < windows.size(); ++w) {
    REQUIRE(windows[w].features.size() == 5 * kChannelCount);
    for (int step = 0; step < 5; ++step)
      for (int c = 0; c < kChannelCount; ++c)
        CHECK(windows[w].features[static_cast<std::size_t>(step * kChannelCount + c)] ==
              100.0 * c + static_cast<double>(5 * w + step));
    CHECK(windows[w].trial_id == "t");
  }
  CHECK(windows[0].label == lt.labels[4]);
  CHECK(windows[1].label == lt.labels[9]);
  CHECK(windows[0].end_time_s == Catch::Approx(0.4));
  CHECK(windows[1].end_time_s == Catch::Approx(0.9));

  auto bad = lt;
  bad.labels.pop_back();
  CHECK_THROWS_AS(make_windows(bad, cfg), DataError);
}

TEST_CASE("select_trials keeps the requested order and rejects unknown ids") {
  std::vector<LabeledTrial> corpus = {flat_trial("a", Outcome::Success, 8),
                                      flat_trial("b", Outcome::Failure, 8),
                                      flat_trial("c", Outcome::Success, 8)};
  const auto picked = select_trials(corpus, {"c", "a"});
  REQUIRE(picked.size() == 2);
  CHECK(picked[0].trial.id == "c");
  CHECK(picked[1].trial.id == "a");
  CHECK_THROWS_AS(select_trials(corpus, {"zzz"}), DataError);
}
