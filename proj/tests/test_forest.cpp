#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <set>

#include "pickstate/forest.hpp"

using namespace pickstate;

namespace {

WindowSample sample_of(std::vector<double> f, PickState label) {
  WindowSample w;
  w.features = std::move(f);
  w.label = label;
  w.trial_id = "toy";
  return w;
}

// Two-feature toy set separable on feature 0 at 0.5.
std::vector<WindowSample> separable_set(int n_per_class, RngSeed seed) {
  Rng rng(seed);
  std::vector<WindowSample> out;
  for (int i = 0; i < n_per_class; ++i) {
    out.push_back(sample_of({rng.uniform(0.0, 0.4), rng.uniform()}, PickState::Picking));
    out.push_back(sample_of({rng.uniform(0.6, 1.0), rng.uniform()}, PickState::Picked));
  }
  return out;
}

bool same_model(const ForestModel& a, const ForestModel& b) {
  return forest_to_json(a).dump() == forest_to_json(b).dump();
}

}  // namespace

TEST_CASE("gini impurity matches the closed form") {
  using forest_detail::gini;
  CHECK(gini({10, 0, 0, 0}, 10) == 0.0);
  CHECK(gini({5, 5, 0, 0}, 10) == Catch::Approx(0.5));
  CHECK(gini({1, 1, 1, 1}, 4) == Catch::Approx(0.75));
  CHECK(gini({0, 0, 0, 0}, 0) == 0.0);
}

TEST_CASE("a separable toy set is fit exactly") {
  const auto data = separable_set(40, RngSeed{1});
  ForestConfig cfg;
  cfg.n_trees = 15;
  const auto model = train_forest(data, cfg, RngSeed{11});
  CHECK(model.feature_count == 2);
  for (const auto& w : data) {
    const auto p = predict_forest(model, w.features);
    CHECK(p.state == w.label);
    CHECK(p.probabilities[static_cast<std::size_t>(w.label)] > 0.5);
  }
  const auto boundary_lo = predict_forest(model, {0.2, 0.5});
  const auto boundary_hi = predict_forest(model, {0.8, 0.5});
  CHECK(boundary_lo.state == PickState::Picking);
  CHECK(boundary_hi.state == PickState::Picked);
}

TEST_CASE("probabilities are leaf-frequency averages summing to one") {
  const auto data = separable_set(25, RngSeed{2});
  ForestConfig cfg;
  cfg.n_trees = 7;
  const auto model = train_forest(data, cfg, RngSeed{3});
  for (const auto& w : data) {
    const auto p = predict_forest(model, w.features);
    double sum = 0.0;
    for (double v : p.probabilities) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum == Catch::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("training is deterministic in the seed") {
  const auto data = separable_set(30, RngSeed{4});
  ForestConfig cfg;
  cfg.n_trees = 9;
  const auto a = train_forest(data, cfg, RngSeed{21});
  const auto b = train_forest(data, cfg, RngSeed{21});
  const auto c = train_forest(data, cfg, RngSeed{22});
  CHECK(same_model(a, b));
  CHECK_FALSE(same_model(a, c));
}

TEST_CASE("thread count never changes the trained model") {
  const auto data = separable_set(30, RngSeed{5});
  ForestConfig cfg;
  cfg.n_trees = 10;
  const auto seq = train_forest(data, cfg, RngSeed{33}, 1);
  const auto par = train_forest(data, cfg, RngSeed{33}, 3);
  CHECK(same_model(seq, par));
}

TEST_CASE("splits pick the midpoint and the lowest feature on ties") {
  // Feature 1 duplicates feature 0; both separate perfectly at 0.5.
  std::vector<WindowSample> data;
  for (double v : {0.0, 0.2, 0.4}) data.push_back(sample_of({v, v}, PickState::Picking));
  for (double v : {0.6, 0.8, 1.0}) data.push_back(sample_of({v, v}, PickState::Picked));

  ForestConfig cfg;
  cfg.n_trees = 5;
  cfg.bootstrap = false;
  cfg.features_per_split = 2;  // both features always candidates
  const auto model = train_forest(data, cfg, RngSeed{1});
  for (const auto& tree : model.trees) {
    REQUIRE_FALSE(tree.empty());
    CHECK(tree[0].feature == 0);
    CHECK(tree[0].threshold == Catch::Approx(0.5));
  }
}

TEST_CASE("bootstrap sampling leaves about a third of rows out of bag") {
  // One deep tree over n distinct single-feature rows; rows never drawn by the
  // bootstrap cannot appear in any leaf path, so distinct sampled values show
  // up as distinct thresholds. Count distinct sampled rows via leaf counts.
  const int n = 1000;
  std::vector<WindowSample> data;
  for (int i = 0; i < n; ++i)
    data.push_back(sample_of({static_cast<double>(i)},
                             i % 2 ? PickState::Picking : PickState::Picked));
  ForestConfig cfg;
  cfg.n_trees = 1;
  cfg.features_per_split = 1;
  const auto model = train_forest(data, cfg, RngSeed{8});
  // Row multiset size equals n; count distinct sampled rows from leaf supports.
  std::int64_t rows_in_leaves = 0;
  std::set<double> thresholds;
  for (const auto& node : model.trees[0]) {
    if (node.feature < 0)
      rows_in_leaves += node.counts[0] + node.counts[1] + node.counts[2] + node.counts[3];
    else
      thresholds.insert(node.threshold);
  }
  CHECK(rows_in_leaves == n);
  // Distinct values sampled ~ n(1 - e^-1) = 632; thresholds separate adjacent
  // distinct values of opposite class, an upper-bounded proxy.
  CHECK(thresholds.size() > 400);
  CHECK(thresholds.size() < 640);
}

TEST_CASE("node counts allow recomputing importance after serialization") {
  const auto data = separable_set(20, RngSeed{6});
  ForestConfig cfg;
  cfg.n_trees = 6;
  cfg.features_per_split = 2;  // both features compete at every node
  const auto model = train_forest(data, cfg, RngSeed{17});
  const auto direct = impurity_importance(model);
  const auto round_tripped = impurity_importance(forest_from_json(forest_to_json(model)));
  CHECK(direct == round_tripped);

  double sum = 0.0;
  for (double v : direct) sum += v;
  CHECK(sum == Catch::Approx(1.0).epsilon(1e-9));
  CHECK(direct[0] > 0.9);  // feature 0 carries the signal
}

TEST_CASE("pressure-only signal concentrates group importance on pressure") {
  // 60 features = 5 steps x 12 channels; only pressure (channel 6) informative.
  Rng rng(RngSeed{7});
  std::vector<WindowSample> data;
  for (int i = 0; i < 160; ++i) {
    WindowSample w;
    w.features.resize(60);
    const bool hot = i % 2 == 0;
    for (int step = 0; step < 5; ++step)
      for (int c = 0; c < kChannelCount; ++c)
        w.features[static_cast<std::size_t>(step * kChannelCount + c)] =
            c == 6 ? (hot ? 1.0 : 0.0) + rng.normal(0.0, 0.05) : rng.normal(0.0, 1.0);
    w.label = hot ? PickState::Picked : PickState::Picking;
    w.trial_id = "toy";
    data.push_back(std::move(w));
  }
  ForestConfig cfg;
  cfg.n_trees = 30;
  const auto model = train_forest(data, cfg, RngSeed{29});
  const auto groups = sensor_group_importance(impurity_importance(model));
  CHECK(groups[static_cast<std::size_t>(SensorGroup::Pressure)] > 0.8);
}

TEST_CASE("forest json round-trips predictions bit-exactly") {
  const auto data = separable_set(15, RngSeed{9});
  ForestConfig cfg;
  cfg.n_trees = 4;
  const auto model = train_forest(data, cfg, RngSeed{41});

  const auto dir = std::filesystem::temp_directory_path() / "pickstate_tests" / "forest";
  std::filesystem::create_directories(dir);
  save_forest(dir / "rf.json", model);
  const auto back = load_forest(dir / "rf.json");
  CHECK(same_model(model, back));
  for (const auto& w : data) {
    const auto p = predict_forest(model, w.features);
    const auto q = predict_forest(back, w.features);
    CHECK(p.state == q.state);
    CHECK(p.probabilities == q.probabilities);
  }

  const auto j = forest_to_json(model);
  CHECK(j.at("format") == "pickstate-forest");
  CHECK(j.at("feature_count") == 2);
}

TEST_CASE("degenerate and invalid inputs are rejected") {
  ForestConfig cfg;
  CHECK_THROWS_AS(train_forest({}, cfg, RngSeed{1}), DataError);

  auto ragged = separable_set(5, RngSeed{10});
  ragged[3].features.push_back(0.0);
  CHECK_THROWS_AS(train_forest(ragged, cfg, RngSeed{1}), DataError);

  ForestConfig bad;
  bad.n_trees = 0;
  CHECK_THROWS_AS(train_forest(separable_set(5, RngSeed{10}), bad, RngSeed{1}),
                  ConfigError);

  const auto data = separable_set(5, RngSeed{12});
  const auto model = train_forest(data, cfg, RngSeed{2});
  CHECK_THROWS_AS(predict_forest(model, {0.5}), DataError);
}

TEST_CASE("a single-class set collapses to leaves predicting that class") {
  std::vector<WindowSample> data;
  for (int i = 0; i < 12; ++i)
    data.push_back(sample_of({static_cast<double>(i), 1.0}, PickState::FailedPick));
  ForestConfig cfg;
  cfg.n_trees = 3;
  const auto model = train_forest(data, cfg, RngSeed{5});
  const auto p = predict_forest(model, {4.0, 1.0});
  CHECK(p.state == PickState::FailedPick);
  CHECK(p.probabilities[3] == 1.0);
  const auto imp = impurity_importance(model);
  for (double v : imp) CHECK(v == 0.0);
}

TEST_CASE("max depth limits the tree while default grows it pure") {
  const auto data = separable_set(20, RngSeed{14});
  ForestConfig stump;
  stump.n_trees = 3;
  stump.max_depth = 0;  // no splits at all
  const auto model = train_forest(data, stump, RngSeed{6});
  for (const auto& tree : model.trees) {
    REQUIRE(tree.size() == 1);
    CHECK(tree[0].feature == -1);
  }
}
