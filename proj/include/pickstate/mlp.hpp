#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "pickstate/core.hpp"
#include "pickstate/io.hpp"

namespace pickstate {

// ---------------------------------------------------------------------------
// Multilayer perceptron: affine layers with ReLU between them, softmax
// cross-entropy loss, adaptive-moment mini-batch updates, early stopping on
// validation accuracy with best-epoch parameter snapshots. Single-threaded
// and deterministic under a fixed seed.
// ---------------------------------------------------------------------------

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> std_dev;

  std::size_t size() const { return mean.size(); }

  void apply(std::vector<double>& features) const {
    if (features.size() != mean.size())
      throw DataError("feature length does not match the standardizer");
    for (std::size_t i = 0; i < features.size(); ++i)
      features[i] = (features[i] - mean[i]) / std_dev[i];
  }

  std::vector<double> transformed(const std::vector<double>& features) const {
    std::vector<double> out = features;
    apply(out);
    return out;
  }
};

/// Per-feature mean and population std over the training windows only.
/// Near-constant features (std < 1e-12) divide by 1 so they map to zero.
inline Standardizer fit_standardizer(const std::vector<WindowSample>& train) {
  if (train.size() < 2)
    throw DataError("standardizer needs at least 2 training windows");
  const std::size_t f_count = train.front().features.size();
  Standardizer s;
  s.mean.assign(f_count, 0.0);
  s.std_dev.assign(f_count, 0.0);
  for (const auto& w : train) {
    if (w.features.size() != f_count)
      throw DataError("inconsistent feature lengths across windows");
    for (std::size_t i = 0; i < f_count; ++i) s.mean[i] += w.features[i];
  }
  const double n = static_cast<double>(train.size());
  for (auto& m : s.mean) m /= n;
  for (const auto& w : train)
    for (std::size_t i = 0; i < f_count; ++i) {
      const double d = w.features[i] - s.mean[i];
      s.std_dev[i] += d * d;
    }
  for (auto& v : s.std_dev) {
    v = std::sqrt(v / n);
    if (v < 1e-12) v = 1.0;
  }
  return s;
}

struct MlpConfig {
  std::vector<int> hidden = {150, 50};
  int max_epochs = 200;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int patience = 10;
  /// Early-stop on validation loss instead of validation accuracy.
  bool stop_on_loss = false;

  void validate() const {
    for (int h : hidden)
      if (h < 1) throw ConfigError("hidden layer sizes must be positive");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
      throw ConfigError("moment decay rates must lie in [0, 1)");
    if (epsilon <= 0.0) throw ConfigError("epsilon must be positive");
  }
};

/// One affine layer, weights row-major with shape in x out.
struct MlpLayer {
  int in = 0;
  int out = 0;
  std::vector<double> w;
  std::vector<double> b;
};

struct MlpModel {
  std::vector<MlpLayer> layers;
  Standardizer standardizer;
  std::vector<double> train_loss;
  std::vector<double> val_accuracy;
  int best_epoch = -1;
  RngSeed seed{};

  void validate() const {
    if (layers.empty()) throw DataError("mlp model has no layers");
    int prev = layers.front().in;
    for (const auto& layer : layers) {
      if (layer.in != prev) throw DataError("mlp layer shapes do not chain");
      if (layer.in < 1 || layer.out < 1) throw DataError("mlp layer with empty shape");
      if (layer.w.size() != static_cast<std::size_t>(layer.in) * layer.out ||
          layer.b.size() != static_cast<std::size_t>(layer.out))
        throw DataError("mlp parameter array sizes do not match shapes");
      for (double v : layer.w)
        if (!std::isfinite(v)) throw DataError("mlp model has non-finite weights");
      for (double v : layer.b)
        if (!std::isfinite(v)) throw DataError("mlp model has non-finite biases");
      prev = layer.out;
    }
  }
};

namespace mlp_detail {

inline std::vector<MlpLayer> init_layers(const std::vector<int>& sizes, Rng& rng) {
  std::vector<MlpLayer> layers;
  layers.reserve(sizes.size() - 1);
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
    MlpLayer layer;
    layer.in = sizes[k];
    layer.out = sizes[k + 1];
    layer.w.resize(static_cast<std::size_t>(layer.in) * layer.out);
    layer.b.assign(static_cast<std::size_t>(layer.out), 0.0);
    const double scale = std::sqrt(2.0 / static_cast<double>(layer.in));
    for (auto& v : layer.w) v = rng.normal(0.0, scale);
    layers.push_back(std::move(layer));
  }
  return layers;
}

/// Row-major batch forward pass; `acts[k]` holds layer k's input, the last
/// entry the final logits. ReLU after every layer but the last.
inline void forward_batch(const std::vector<MlpLayer>& layers,
                          const std::vector<double>& input, std::size_t batch,
                          std::vector<std::vector<double>>& acts) {
  acts.resize(layers.size() + 1);
  acts[0] = input;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& layer = layers[k];
    const auto in = static_cast<std::size_t>(layer.in);
    const auto out = static_cast<std::size_t>(layer.out);
    auto& z = acts[k + 1];
    z.assign(batch * out, 0.0);
    for (std::size_t r = 0; r < batch; ++r) {
      const double* a = acts[k].data() + r * in;
      double* zr = z.data() + r * out;
      for (std::size_t j = 0; j < out; ++j) zr[j] = layer.b[j];
      for (std::size_t i = 0; i < in; ++i) {
        const double ai = a[i];
        if (ai == 0.0) continue;
        const double* wrow = layer.w.data() + i * out;
        for (std::size_t j = 0; j < out; ++j) zr[j] += ai * wrow[j];
      }
      if (k + 1 < layers.size())
        for (std::size_t j = 0; j < out; ++j) zr[j] = std::max(0.0, zr[j]);
    }
  }
}

inline void softmax_row(const double* z, std::size_t k, double* p) {
  double m = z[0];
  for (std::size_t j = 1; j < k; ++j) m = std::max(m, z[j]);
  double sum = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    p[j] = std::exp(z[j] - m);
    sum += p[j];
  }
  for (std::size_t j = 0; j < k; ++j) p[j] /= sum;
}

/// Mean cross-entropy over the batch plus parameter gradients (same layout
/// as the layers). Returns the loss.
inline double loss_and_grads(const std::vector<MlpLayer>& layers,
                             const std::vector<double>& input,
                             const std::vector<int>& labels,
                             std::vector<MlpLayer>& grads) {
  const std::size_t batch = labels.size();
  const auto n_classes = static_cast<std::size_t>(layers.back().out);
  std::vector<std::vector<double>> acts;
  forward_batch(layers, input, batch, acts);

  grads.resize(layers.size());
  for (std::size_t k = 0; k < layers.size(); ++k) {
    grads[k].in = layers[k].in;
    grads[k].out = layers[k].out;
    grads[k].w.assign(layers[k].w.size(), 0.0);
    grads[k].b.assign(layers[k].b.size(), 0.0);
  }

  // delta starts as dL/dlogits, then walks backwards through the stack.
  std::vector<double> delta(batch * n_classes);
  double loss = 0.0;
  std::vector<double> p(n_classes);
  for (std::size_t r = 0; r < batch; ++r) {
    const double* z = acts.back().data() + r * n_classes;
    softmax_row(z, n_classes, p.data());
    const auto label = static_cast<std::size_t>(labels[r]);
    loss += -std::log(std::max(p[label], 1e-12));
    double* d = delta.data() + r * n_classes;
    for (std::size_t j = 0; j < n_classes; ++j)
      d[j] = (p[j] - (j == label ? 1.0 : 0.0)) / static_cast<double>(batch);
  }
  loss /= static_cast<double>(batch);

  for (std::size_t k = layers.size(); k-- > 0;) {
    const auto& layer = layers[k];
    const auto in = static_cast<std::size_t>(layer.in);
    const auto out = static_cast<std::size_t>(layer.out);
    const auto& a_in = acts[k];
    for (std::size_t r = 0; r < batch; ++r) {
      const double* a = a_in.data() + r * in;
      const double* d = delta.data() + r * out;
      for (std::size_t j = 0; j < out; ++j) grads[k].b[j] += d[j];
      for (std::size_t i = 0; i < in; ++i) {
        const double ai = a[i];
        if (ai == 0.0) continue;
        double* grow = grads[k].w.data() + i * out;
        for (std::size_t j = 0; j < out; ++j) grow[j] += ai * d[j];
      }
    }
    if (k == 0) break;
    std::vector<double> prev_delta(batch * in, 0.0);
    for (std::size_t r = 0; r < batch; ++r) {
      const double* d = delta.data() + r * out;
      const double* a = a_in.data() + r * in;
      double* pd = prev_delta.data() + r * in;
      for (std::size_t i = 0; i < in; ++i) {
        if (a[i] <= 0.0) continue;  // ReLU gate: a == relu(z), zero blocks flow
        const double* wrow = layer.w.data() + i * out;
        double acc = 0.0;
        for (std::size_t j = 0; j < out; ++j) acc += wrow[j] * d[j];
        pd[i] = acc;
      }
    }
    delta.swap(prev_delta);
  }
  return loss;
}

struct AdamState {
  std::vector<MlpLayer> m;
  std::vector<MlpLayer> v;
  long t = 0;

  void init(const std::vector<MlpLayer>& layers) {
    m = layers;
    v = layers;
    for (auto* s : {&m, &v})
      for (auto& layer : *s) {
        std::fill(layer.w.begin(), layer.w.end(), 0.0);
        std::fill(layer.b.begin(), layer.b.end(), 0.0);
      }
  }

  void step(std::vector<MlpLayer>& layers, const std::vector<MlpLayer>& grads,
            const MlpConfig& cfg) {
    ++t;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t k = 0; k < layers.size(); ++k) {
      auto update = [&](std::vector<double>& p, const std::vector<double>& g,
                        std::vector<double>& mk, std::vector<double>& vk) {
        for (std::size_t i = 0; i < p.size(); ++i) {
          mk[i] = cfg.beta1 * mk[i] + (1.0 - cfg.beta1) * g[i];
          vk[i] = cfg.beta2 * vk[i] + (1.0 - cfg.beta2) * g[i] * g[i];
          const double mhat = mk[i] / c1;
          const double vhat = vk[i] / c2;
          p[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
      };
      update(layers[k].w, grads[k].w, m[k].w, v[k].w);
      update(layers[k].b, grads[k].b, m[k].b, v[k].b);
    }
  }
};

inline std::vector<double> flatten_standardized(const std::vector<WindowSample>& windows,
                                                const Standardizer& s) {
  const std::size_t f_count = s.size();
  std::vector<double> out(windows.size() * f_count);
  for (std::size_t r = 0; r < windows.size(); ++r) {
    if (windows[r].features.size() != f_count)
      throw DataError("inconsistent feature lengths across windows");
    for (std::size_t i = 0; i < f_count; ++i)
      out[r * f_count + i] = (windows[r].features[i] - s.mean[i]) / s.std_dev[i];
  }
  return out;
}

struct EvalCounts {
  double loss = 0.0;
  double accuracy = 0.0;
};

inline EvalCounts evaluate_batch(const std::vector<MlpLayer>& layers,
                                 const std::vector<double>& x,
                                 const std::vector<int>& labels) {
  const std::size_t batch = labels.size();
  const auto n_classes = static_cast<std::size_t>(layers.back().out);
  std::vector<std::vector<double>> acts;
  forward_batch(layers, x, batch, acts);
  std::vector<double> p(n_classes);
  EvalCounts out;
  std::size_t correct = 0;
  for (std::size_t r = 0; r < batch; ++r) {
    softmax_row(acts.back().data() + r * n_classes, n_classes, p.data());
    const auto label = static_cast<std::size_t>(labels[r]);
    out.loss += -std::log(std::max(p[label], 1e-12));
    std::size_t arg = 0;
    for (std::size_t j = 1; j < n_classes; ++j)
      if (p[j] > p[arg]) arg = j;
    if (arg == label) ++correct;
  }
  out.loss /= static_cast<double>(batch);
  out.accuracy = static_cast<double>(correct) / static_cast<double>(batch);
  return out;
}

}  // namespace mlp_detail

/// Fits the standardizer on `train`, then runs mini-batch updates for up to
/// cfg.max_epochs epochs, early-stopping after cfg.patience epochs without
/// validation improvement. The returned parameters are the best-epoch
/// snapshot, never a later, worse epoch.
inline MlpModel train_mlp(const std::vector<WindowSample>& train,
                          const std::vector<WindowSample>& val, const MlpConfig& cfg,
                          RngSeed seed) {
  cfg.validate();
  if (train.size() < 2) throw DataError("mlp training needs at least 2 windows");
  if (val.empty()) throw DataError("mlp training needs a nonempty validation set");

  MlpModel model;
  model.seed = seed;
  model.standardizer = fit_standardizer(train);
  const auto f_count = static_cast<int>(model.standardizer.size());

  std::vector<int> sizes;
  sizes.push_back(f_count);
  for (int h : cfg.hidden) sizes.push_back(h);
  sizes.push_back(kStateCount);
  Rng init_rng(derive_seed(seed, "init", 0));
  model.layers = mlp_detail::init_layers(sizes, init_rng);

  const auto x_train = mlp_detail::flatten_standardized(train, model.standardizer);
  const auto x_val = mlp_detail::flatten_standardized(val, model.standardizer);
  std::vector<int> y_train(train.size());
  for (std::size_t i = 0; i < train.size(); ++i)
    y_train[i] = static_cast<int>(train[i].label);
  std::vector<int> y_val(val.size());
  for (std::size_t i = 0; i < val.size(); ++i) y_val[i] = static_cast<int>(val[i].label);

  mlp_detail::AdamState adam;
  adam.init(model.layers);

  const std::size_t n = train.size();
  const auto f_sz = static_cast<std::size_t>(f_count);
  std::vector<MlpLayer> best_layers = model.layers;
  double best_metric = cfg.stop_on_loss ? std::numeric_limits<double>::infinity()
                                        : -std::numeric_limits<double>::infinity();
  int since_improved = 0;
  std::vector<MlpLayer> grads;
  std::vector<double> batch_x;
  std::vector<int> batch_y;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    Rng epoch_rng(derive_seed(seed, "epoch", static_cast<std::uint64_t>(epoch)));
    const auto order = epoch_rng.permutation(n);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      const std::size_t b = stop - start;
      batch_x.resize(b * f_sz);
      batch_y.resize(b);
      for (std::size_t r = 0; r < b; ++r) {
        const std::size_t src = order[start + r];
        std::copy_n(x_train.begin() + static_cast<std::ptrdiff_t>(src * f_sz), f_sz,
                    batch_x.begin() + static_cast<std::ptrdiff_t>(r * f_sz));
        batch_y[r] = y_train[src];
      }
      const double batch_loss =
          mlp_detail::loss_and_grads(model.layers, batch_x, batch_y, grads);
      if (!std::isfinite(batch_loss))
        throw TrainingDiverged("mlp training diverged: non-finite loss at epoch " +
                               std::to_string(epoch));
      adam.step(model.layers, grads, cfg);
      loss_sum += batch_loss * static_cast<double>(b);
    }
    model.train_loss.push_back(loss_sum / static_cast<double>(n));

    const auto val_stats = mlp_detail::evaluate_batch(model.layers, x_val, y_val);
    model.val_accuracy.push_back(val_stats.accuracy);

    const double metric = cfg.stop_on_loss ? val_stats.loss : val_stats.accuracy;
    const bool improved =
        cfg.stop_on_loss ? metric < best_metric : metric > best_metric;
    if (improved) {
      best_metric = metric;
      best_layers = model.layers;
      model.best_epoch = epoch;
      since_improved = 0;
    } else {
      ++since_improved;
      if (since_improved >= cfg.patience) break;
    }
  }

  model.layers = std::move(best_layers);
  model.validate();
  return model;
}

/// Standardize, forward, softmax. Ties go to the lowest class code.
inline Prediction predict_mlp(const MlpModel& model, const std::vector<double>& features) {
  for (double v : features)
    if (!std::isfinite(v)) throw DataError("mlp input contains non-finite values");
  std::vector<double> x = model.standardizer.transformed(features);
  std::vector<std::vector<double>> acts;
  mlp_detail::forward_batch(model.layers, x, 1, acts);
  const auto n_classes = static_cast<std::size_t>(model.layers.back().out);
  std::vector<double> p(n_classes);
  mlp_detail::softmax_row(acts.back().data(), n_classes, p.data());
  Prediction out;
  for (std::size_t j = 0; j < n_classes && j < static_cast<std::size_t>(kStateCount); ++j)
    out.probabilities[j] = p[j];
  out.state = argmax_state(out.probabilities);
  return out;
}

/// Compares analytic gradients with central finite differences on a seeded
/// subset of parameters. Returns the maximum relative error observed.
inline double gradient_check(const std::vector<MlpLayer>& layers,
                             const std::vector<double>& input,
                             const std::vector<int>& labels, RngSeed seed,
                             int samples_per_layer = 12) {
  std::vector<MlpLayer> work = layers;
  std::vector<MlpLayer> grads;
  mlp_detail::loss_and_grads(work, input, labels, grads);

  Rng rng(seed);
  const double h = 1e-5;
  double worst = 0.0;
  auto probe = [&](std::vector<double>& params, const std::vector<double>& analytic) {
    const int budget = static_cast<int>(
        std::min(params.size(), static_cast<std::size_t>(samples_per_layer)));
    for (int s = 0; s < budget; ++s) {
      const auto i = static_cast<std::size_t>(rng.below(params.size()));
      const double saved = params[i];
      params[i] = saved + h;
      double up;
      {
        std::vector<MlpLayer> g;
        up = mlp_detail::loss_and_grads(work, input, labels, g);
      }
      params[i] = saved - h;
      double down;
      {
        std::vector<MlpLayer> g;
        down = mlp_detail::loss_and_grads(work, input, labels, g);
      }
      params[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max(std::abs(analytic[i]) + std::abs(numeric), 1e-3);
      worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
  };
  for (std::size_t k = 0; k < work.size(); ++k) {
    probe(work[k].w, grads[k].w);
    probe(work[k].b, grads[k].b);
  }
  return worst;
}

inline Json mlp_to_json(const MlpModel& model) {
  model.validate();
  Json layers = Json::array();
  for (const auto& layer : model.layers) {
    Json l;
    l["in"] = layer.in;
    l["out"] = layer.out;
    l["w"] = layer.w;
    l["b"] = layer.b;
    layers.push_back(std::move(l));
  }
  Json j;
  j["format"] = "pickstate-mlp";
  j["version"] = 1;
  j["seed"] = model.seed.value;
  j["layers"] = std::move(layers);
  j["standardizer"] = Json{{"mean", model.standardizer.mean},
                           {"std", model.standardizer.std_dev}};
  j["history"] = Json{{"train_loss", model.train_loss},
                      {"val_accuracy", model.val_accuracy}};
  j["best_epoch"] = model.best_epoch;
  return j;
}

inline MlpModel mlp_from_json(const Json& j) {
  if (j.value("format", "") != "pickstate-mlp" || j.value("version", 0) != 1)
    throw DataError("not a version-1 mlp model file");
  MlpModel model;
  model.seed.value = j.at("seed").get<std::uint64_t>();
  for (const auto& l : j.at("layers")) {
    MlpLayer layer;
    layer.in = l.at("in").get<int>();
    layer.out = l.at("out").get<int>();
    layer.w = l.at("w").get<std::vector<double>>();
    layer.b = l.at("b").get<std::vector<double>>();
    model.layers.push_back(std::move(layer));
  }
  model.standardizer.mean = j.at("standardizer").at("mean").get<std::vector<double>>();
  model.standardizer.std_dev = j.at("standardizer").at("std").get<std::vector<double>>();
  model.train_loss = j.at("history").at("train_loss").get<std::vector<double>>();
  model.val_accuracy = j.at("history").at("val_accuracy").get<std::vector<double>>();
  model.best_epoch = j.at("best_epoch").get<int>();
  model.validate();
  return model;
}

inline void save_mlp(const std::string& path, const MlpModel& model) {
  write_text_file(path, mlp_to_json(model).dump(1) + "\n");
}

inline MlpModel load_mlp(const std::string& path) {
  return mlp_from_json(Json::parse(read_text_file(path)));
}

}  // namespace pickstate
