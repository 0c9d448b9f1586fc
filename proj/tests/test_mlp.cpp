#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "pickstate/mlp.hpp"

using namespace pickstate;

namespace {

WindowSample sample_of(std::vector<double> f, PickState label) {
  WindowSample w;
  w.features = std::move(f);
  w.label = label;
  w.trial_id = "toy";
  return w;
}

// Four well-separated 2-d blobs, one per state.
std::vector<WindowSample> blob_set(int n_per_class, double spread, RngSeed seed) {
  Rng rng(seed);
  const double cx[4] = {0.0, 4.0, 0.0, 4.0};
  const double cy[4] = {0.0, 0.0, 4.0, 4.0};
  std::vector<WindowSample> out;
  for (int i = 0; i < n_per_class; ++i)
    for (int s = 0; s < kStateCount; ++s)
      out.push_back(sample_of({cx[s] + rng.normal(0.0, spread),
                               cy[s] + rng.normal(0.0, spread)},
                              state_from_code(s)));
  return out;
}

std::vector<MlpLayer> toy_layers(const std::vector<int>& sizes, std::uint64_t seed) {
  Rng rng(RngSeed{seed});
  return mlp_detail::init_layers(sizes, rng);
}

// Nonzero biases keep every ReLU pre-activation away from the kink, where
// finite differences and subgradients legitimately disagree.
std::vector<MlpLayer> smooth_layers(const std::vector<int>& sizes, std::uint64_t seed) {
  Rng rng(RngSeed{seed});
  auto layers = mlp_detail::init_layers(sizes, rng);
  for (auto& layer : layers)
    for (auto& b : layer.b) b = rng.uniform(0.1, 0.5);
  return layers;
}

}  // namespace

TEST_CASE("standardizer matches hand-computed moments") {
  std::vector<WindowSample> data = {sample_of({1.0, 10.0}, PickState::Picking),
                                    sample_of({3.0, 10.0}, PickState::Picked)};
  const auto st = fit_standardizer(data);
  CHECK(st.mean == std::vector<double>{2.0, 10.0});
  CHECK(st.std_dev[0] == Catch::Approx(1.0));  // population std of {1, 3}
  CHECK(st.std_dev[1] == 1.0);                 // constant feature guard

  std::vector<double> x = {3.0, 10.0};
  st.apply(x);
  CHECK(x[0] == Catch::Approx(1.0));
  CHECK(x[1] == 0.0);

  CHECK_THROWS_AS(fit_standardizer({data[0]}), DataError);
  std::vector<double> bad = {1.0};
  CHECK_THROWS_AS(st.apply(bad), DataError);
}

TEST_CASE("he initialization has zero biases and seed-stable weights") {
  const auto a = toy_layers({6, 5, 4}, 3);
  const auto b = toy_layers({6, 5, 4}, 3);
  REQUIRE(a.size() == 2);
  CHECK(a[0].in == 6);
  CHECK(a[0].out == 5);
  CHECK(a[0].w.size() == 30);
  for (double bias : a[0].b) CHECK(bias == 0.0);
  CHECK(a[0].w == b[0].w);
  double ssq = 0.0;
  for (double w : a[0].w) ssq += w * w;
  // Var ~ 2 / fan_in = 1/3; loose sanity band for 30 draws.
  CHECK(ssq / 30.0 > 0.05);
  CHECK(ssq / 30.0 < 1.2);
}

TEST_CASE("a zero-weight network predicts the uniform distribution") {
  MlpModel model;
  MlpLayer l0;
  l0.in = 3;
  l0.out = 4;
  l0.w.assign(12, 0.0);
  l0.b.assign(4, 0.0);
  model.layers = {l0};
  model.standardizer.mean = {0.0, 0.0, 0.0};
  model.standardizer.std_dev = {1.0, 1.0, 1.0};
  const auto p = predict_mlp(model, {0.3, -0.2, 0.9});
  for (double v : p.probabilities) CHECK(v == Catch::Approx(0.25));
  CHECK(p.state == PickState::Picking);  // tie goes to the lowest code
}

TEST_CASE("gradients match central finite differences") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto layers = smooth_layers({6, 5, 4, 4}, 100 + s);
    Rng rng(RngSeed{200 + s});
    const int batch = 7;
    std::vector<double> input;
    std::vector<int> labels;
    for (int i = 0; i < batch; ++i) {
      for (int k = 0; k < 6; ++k) input.push_back(rng.normal(0.0, 1.0));
      labels.push_back(static_cast<int>(rng.below(4)));
    }
    const double err = gradient_check(layers, input, labels, RngSeed{300 + s});
    CHECK(err <= 1e-4);
  }
}

TEST_CASE("training separates well-spaced blobs") {
  const auto train = blob_set(60, 0.5, RngSeed{1});
  const auto val = blob_set(15, 0.5, RngSeed{2});
  MlpConfig cfg;
  cfg.hidden = {16};
  cfg.max_epochs = 120;
  const auto model = train_mlp(train, val, cfg, RngSeed{7});

  CHECK(model.val_accuracy.size() == model.train_loss.size());
  CHECK(model.best_epoch >= 0);
  CHECK(model.best_epoch < static_cast<int>(model.val_accuracy.size()));
  double best = 0.0;
  for (double a : model.val_accuracy) best = std::max(best, a);
  CHECK(best >= 0.99);
  CHECK(model.val_accuracy[static_cast<std::size_t>(model.best_epoch)] ==
        Catch::Approx(best));

  int correct = 0;
  for (const auto& w : val)
    if (predict_mlp(model, w.features).state == w.label) ++correct;
  CHECK(static_cast<double>(correct) / static_cast<double>(val.size()) >= 0.99);

  const auto p = predict_mlp(model, val[0].features);
  double sum = 0.0;
  for (double v : p.probabilities) sum += v;
  CHECK(sum == Catch::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("mlp training is deterministic in the seed") {
  const auto train = blob_set(20, 0.6, RngSeed{3});
  const auto val = blob_set(6, 0.6, RngSeed{4});
  MlpConfig cfg;
  cfg.hidden = {8};
  cfg.max_epochs = 15;
  cfg.patience = 100;
  const auto a = train_mlp(train, val, cfg, RngSeed{9});
  const auto b = train_mlp(train, val, cfg, RngSeed{9});
  const auto c = train_mlp(train, val, cfg, RngSeed{10});
  CHECK(mlp_to_json(a).dump() == mlp_to_json(b).dump());
  CHECK(mlp_to_json(a).dump() != mlp_to_json(c).dump());
}

TEST_CASE("patience stops training early") {
  const auto train = blob_set(20, 0.4, RngSeed{5});
  const auto val = blob_set(6, 0.4, RngSeed{6});
  MlpConfig cfg;
  cfg.hidden = {12};
  cfg.max_epochs = 200;
  cfg.patience = 5;
  const auto model = train_mlp(train, val, cfg, RngSeed{11});
  // Easy data converges immediately; patience must cut far below the cap.
  CHECK(model.train_loss.size() < 200);
  CHECK(model.train_loss.size() >=
        static_cast<std::size_t>(model.best_epoch + 1));
}

TEST_CASE("non-finite training data raises the divergence error") {
  auto train = blob_set(10, 0.4, RngSeed{12});
  const auto val = blob_set(4, 0.4, RngSeed{13});
  train[0].features[0] = std::numeric_limits<double>::infinity();
  MlpConfig cfg;
  cfg.hidden = {4};
  CHECK_THROWS_AS(train_mlp(train, val, cfg, RngSeed{14}), Error);
}

TEST_CASE("prediction rejects malformed feature vectors") {
  const auto train = blob_set(12, 0.4, RngSeed{15});
  const auto val = blob_set(4, 0.4, RngSeed{16});
  MlpConfig cfg;
  cfg.hidden = {4};
  cfg.max_epochs = 5;
  const auto model = train_mlp(train, val, cfg, RngSeed{17});
  CHECK_THROWS_AS(predict_mlp(model, {1.0}), DataError);
  CHECK_THROWS_AS(predict_mlp(model, {std::nan(""), 0.0}), DataError);
}

TEST_CASE("mlp json round-trips predictions bit-exactly") {
  const auto train = blob_set(15, 0.5, RngSeed{18});
  const auto val = blob_set(5, 0.5, RngSeed{19});
  MlpConfig cfg;
  cfg.hidden = {6, 5};
  cfg.max_epochs = 20;
  const auto model = train_mlp(train, val, cfg, RngSeed{20});

  const auto dir = std::filesystem::temp_directory_path() / "pickstate_tests" / "mlp";
  std::filesystem::create_directories(dir);
  save_mlp(dir / "mlp.json", model);
  const auto back = load_mlp(dir / "mlp.json");

  CHECK(back.best_epoch == model.best_epoch);
  CHECK(back.train_loss == model.train_loss);
  CHECK(back.val_accuracy == model.val_accuracy);
  for (const auto& w : val) {
    const auto p = predict_mlp(model, w.features);
    const auto q = predict_mlp(back, w.features);
    CHECK(p.state == q.state);
    CHECK(p.probabilities == q.probabilities);
  }

  const auto j = mlp_to_json(model);
  CHECK(j.at("format") == "pickstate-mlp");
}

TEST_CASE("mlp config validation rejects bad shapes") {
  MlpConfig bad;
  bad.hidden = {0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  MlpConfig neg;
  neg.learning_rate = 0.0;
  CHECK_THROWS_AS(neg.validate(), ConfigError);
  MlpConfig batch;
  batch.batch_size = 0;
  CHECK_THROWS_AS(batch.validate(), ConfigError);
}
