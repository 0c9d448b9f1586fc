#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <thread>
#include <vector>

#include "pickstate/core.hpp"
#include "pickstate/io.hpp"

namespace pickstate {

// ---------------------------------------------------------------------------
// Random Forest: bagged CART trees, Gini-impurity splits over a per-node
// random feature subset. Every node keeps its class counts so impurity
// importance is recomputable from a deserialized model.
// ---------------------------------------------------------------------------

struct ForestConfig {
  int n_trees = 100;
  /// Empty means unlimited depth.
  std::optional<int> max_depth;
  int min_samples_split = 2;
  /// 0 resolves to floor(sqrt(feature_count)) at training time.
  int features_per_split = 0;
  bool bootstrap = true;

  void validate() const {
    if (n_trees < 1) throw ConfigError("n_trees must be >= 1");
    if (max_depth && *max_depth < 0) throw ConfigError("max_depth must be >= 0");
    if (min_samples_split < 2) throw ConfigError("min_samples_split must be >= 2");
    if (features_per_split < 0) throw ConfigError("features_per_split must be >= 0");
  }

  int resolved_features_per_split(int feature_count) const {
    int m = features_per_split;
    if (m == 0) m = static_cast<int>(std::sqrt(static_cast<double>(feature_count)));
    return std::clamp(m, 1, feature_count);
  }
};

struct TreeNode {
  /// -1 marks a leaf.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::array<std::int64_t, kStateCount> counts{};
};

struct ForestModel {
  std::vector<std::vector<TreeNode>> trees;
  int feature_count = 0;
  RngSeed seed{};

  void validate() const {
    if (feature_count < 1) throw DataError("forest model has no features");
    if (trees.empty()) throw DataError("forest model has no trees");
    for (const auto& tree : trees) {
      if (tree.empty()) throw DataError("forest model contains an empty tree");
      for (const auto& node : tree) {
        std::int64_t total = 0;
        for (auto c : node.counts) total += c;
        if (total < 1) throw DataError("forest node with empty class counts");
        if (node.feature < 0) {
          if (node.left != -1 || node.right != -1)
            throw DataError("forest leaf with children");
        } else {
          if (node.feature >= feature_count)
            throw DataError("forest split on out-of-range feature");
          if (node.left < 0 || node.right < 0 ||
              node.left >= static_cast<int>(tree.size()) ||
              node.right >= static_cast<int>(tree.size()))
            throw DataError("forest node with out-of-range children");
        }
      }
    }
  }
};

namespace forest_detail {

inline double gini(const std::array<std::int64_t, kStateCount>& counts,
                   std::int64_t total) {
  if (total <= 0) return 0.0;
  double ssq = 0.0;
  for (auto c : counts) ssq += static_cast<double>(c) * static_cast<double>(c);
  const double t = static_cast<double>(total);
  return 1.0 - ssq / (t * t);
}

struct SplitChoice {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

struct TreeBuilder {
  const std::vector<double>& x;  // n_total rows, feature_count columns
  const std::vector<int>& y;
  int feature_count;
  const ForestConfig& cfg;
  int subset_size;
  Rng& rng;
  std::vector<TreeNode>& nodes;
  std::vector<int>& idx;  // bootstrap sample indices, partitioned in place
  std::vector<std::pair<double, int>> scratch;

  // Best threshold over the given features; midpoints of adjacent distinct
  // sorted values. Strict > under ascending feature and threshold order
  // breaks gain ties toward the lowest feature index, then lowest threshold.
  void search(const std::vector<int>& features, int lo, int hi, double parent_gini,
              SplitChoice& best) {
    const auto n = static_cast<std::int64_t>(hi - lo);
    for (int f : features) {
      scratch.clear();
      for (int k = lo; k < hi; ++k)
        scratch.emplace_back(x[static_cast<std::size_t>(idx[k]) * feature_count + f],
                             y[idx[k]]);
      std::sort(scratch.begin(), scratch.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      std::array<std::int64_t, kStateCount> left{};
      std::array<std::int64_t, kStateCount> right{};
      for (const auto& [v, label] : scratch) ++right[label];
      for (std::int64_t k = 0; k + 1 < n; ++k) {
        const int label = scratch[static_cast<std::size_t>(k)].second;
        ++left[label];
        --right[label];
        const double v0 = scratch[static_cast<std::size_t>(k)].first;
        const double v1 = scratch[static_cast<std::size_t>(k) + 1].first;
        if (v0 == v1) continue;
        const std::int64_t nl = k + 1;
        const std::int64_t nr = n - nl;
        const double child =
            (static_cast<double>(nl) * gini(left, nl) +
             static_cast<double>(nr) * gini(right, nr)) /
            static_cast<double>(n);
        const double gain = parent_gini - child;
        if (gain > best.gain) {
          const double mid = v0 + 0.5 * (v1 - v0);
          if (mid > v0) best = SplitChoice{gain, f, mid};  // rounding guard
        }
      }
    }
  }

  int build(int lo, int hi, int depth) {
    const int node_id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    std::array<std::int64_t, kStateCount> counts{};
    for (int k = lo; k < hi; ++k) ++counts[y[idx[k]]];
    nodes[node_id].counts = counts;

    const std::int64_t n = hi - lo;
    const double parent_gini = gini(counts, n);
    const bool depth_ok = !cfg.max_depth || depth < *cfg.max_depth;
    if (n < cfg.min_samples_split || parent_gini <= 0.0 || !depth_ok)
      return node_id;

    std::vector<int> candidates;
    candidates.reserve(static_cast<std::size_t>(subset_size));
    {
      auto perm = rng.permutation(static_cast<std::size_t>(feature_count));
      for (int k = 0; k < subset_size; ++k)
        candidates.push_back(static_cast<int>(perm[static_cast<std::size_t>(k)]));
      std::sort(candidates.begin(), candidates.end());
    }

    SplitChoice best;
    search(candidates, lo, hi, parent_gini, best);
    if (best.feature < 0 && subset_size < feature_count) {
      // The sampled features were locally constant; widen to the full set so
      // a mixed node terminates only when genuinely unsplittable.
      std::vector<int> all(static_cast<std::size_t>(feature_count));
      for (int f = 0; f < feature_count; ++f) all[static_cast<std::size_t>(f)] = f;
      search(all, lo, hi, parent_gini, best);
    }
    if (best.feature < 0) return node_id;

    const int f = best.feature;
    const double thr = best.threshold;
    auto* base = idx.data();
    int* mid = std::partition(base + lo, base + hi, [&](int sample) {
      return x[static_cast<std::size_t>(sample) * feature_count + f] < thr;
    });
    const int split_at = static_cast<int>(mid - base);
    if (split_at == lo || split_at == hi) return node_id;  // numeric safety net

    nodes[node_id].feature = f;
    nodes[node_id].threshold = thr;
    nodes[node_id].left = build(lo, split_at, depth + 1);
    nodes[node_id].right = build(split_at, hi, depth + 1);
    return node_id;
  }
};

inline std::vector<TreeNode> build_tree(const std::vector<double>& x,
                                        const std::vector<int>& y, int n_samples,
                                        int feature_count, const ForestConfig& cfg,
                                        RngSeed tree_seed) {
  Rng rng(tree_seed);
  std::vector<int> idx(static_cast<std::size_t>(n_samples));
  if (cfg.bootstrap) {
    for (auto& v : idx)
      v = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_samples)));
  } else {
    for (int i = 0; i < n_samples; ++i) idx[static_cast<std::size_t>(i)] = i;
  }
  std::vector<TreeNode> nodes;
  nodes.reserve(static_cast<std::size_t>(2 * n_samples));
  TreeBuilder builder{x,   y,     feature_count,
                      cfg, cfg.resolved_features_per_split(feature_count),
                      rng, nodes, idx,
                      {}};
  builder.build(0, n_samples, 0);
  return nodes;
}

}  // namespace forest_detail

/// Trains cfg.n_trees bagged trees. Tree i draws everything from
/// derive_seed(seed, "tree", i), so the result does not depend on n_threads.
inline ForestModel train_forest(const std::vector<WindowSample>& windows,
                                const ForestConfig& cfg, RngSeed seed,
                                int n_threads = 1) {
  cfg.validate();
  if (windows.empty()) throw DataError("cannot train a forest on an empty window set");
  if (n_threads < 1) throw ConfigError("n_threads must be >= 1");
  const int n = static_cast<int>(windows.size());
  const int feature_count = static_cast<int>(windows.front().features.size());
  if (feature_count < 1) throw DataError("windows carry no features");

  std::vector<double> x(static_cast<std::size_t>(n) * feature_count);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& w = windows[static_cast<std::size_t>(i)];
    if (static_cast<int>(w.features.size()) != feature_count)
      throw DataError("inconsistent feature lengths across windows");
    std::copy(w.features.begin(), w.features.end(),
              x.begin() + static_cast<std::size_t>(i) * feature_count);
    y[static_cast<std::size_t>(i)] = static_cast<int>(w.label);
  }

  ForestModel model;
  model.feature_count = feature_count;
  model.seed = seed;
  model.trees.resize(static_cast<std::size_t>(cfg.n_trees));

  auto train_range = [&](int first, int step) {
    for (int i = first; i < cfg.n_trees; i += step) {
      model.trees[static_cast<std::size_t>(i)] = forest_detail::build_tree(
          x, y, n, feature_count, cfg,
          derive_seed(seed, "tree", static_cast<std::uint64_t>(i)));
    }
  };

  if (n_threads == 1) {
    train_range(0, 1);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(train_range, t, n_threads);
    for (auto& th : pool) th.join();
  }

  model.validate();
  return model;
}

/// Mean of per-tree leaf class frequencies; argmax with low-code tie-break.
inline Prediction predict_forest(const ForestModel& model,
                                 const std::vector<double>& features) {
  if (static_cast<int>(features.size()) != model.feature_count)
    throw DataError("feature length does not match the trained forest");
  Prediction out;
  for (const auto& tree : model.trees) {
    int at = 0;
    while (tree[static_cast<std::size_t>(at)].feature >= 0) {
      const auto& node = tree[static_cast<std::size_t>(at)];
      at = features[static_cast<std::size_t>(node.feature)] < node.threshold
               ? node.left
               : node.right;
    }
    const auto& counts = tree[static_cast<std::size_t>(at)].counts;
    std::int64_t total = 0;
    for (auto c : counts) total += c;
    for (int s = 0; s < kStateCount; ++s)
      out.probabilities[static_cast<std::size_t>(s)] +=
          static_cast<double>(counts[static_cast<std::size_t>(s)]) /
          static_cast<double>(total);
  }
  for (auto& p : out.probabilities) p /= static_cast<double>(model.trees.size());
  out.state = argmax_state(out.probabilities);
  return out;
}

/// Per-feature mean over trees of the Gini decrease at each split, weighted
/// by the node's sample share; normalized to sum to 1 when any split exists.
inline std::vector<double> impurity_importance(const ForestModel& model) {
  model.validate();
  std::vector<double> acc(static_cast<std::size_t>(model.feature_count), 0.0);
  for (const auto& tree : model.trees) {
    std::int64_t root_total = 0;
    for (auto c : tree.front().counts) root_total += c;
    for (const auto& node : tree) {
      if (node.feature < 0) continue;
      auto total_of = [](const TreeNode& nd) {
        std::int64_t t = 0;
        for (auto c : nd.counts) t += c;
        return t;
      };
      const std::int64_t n = total_of(node);
      const auto& lchild = tree[static_cast<std::size_t>(node.left)];
      const auto& rchild = tree[static_cast<std::size_t>(node.right)];
      const std::int64_t nl = total_of(lchild);
      const std::int64_t nr = total_of(rchild);
      const double decrease =
          forest_detail::gini(node.counts, n) -
          (static_cast<double>(nl) * forest_detail::gini(lchild.counts, nl) +
           static_cast<double>(nr) * forest_detail::gini(rchild.counts, nr)) /
              static_cast<double>(n);
      acc[static_cast<std::size_t>(node.feature)] +=
          static_cast<double>(n) / static_cast<double>(root_total) * decrease;
    }
  }
  double sum = 0.0;
  for (auto& v : acc) {
    v /= static_cast<double>(model.trees.size());
    sum += v;
  }
  if (sum > 0.0)
    for (auto& v : acc) v /= sum;
  return acc;
}

/// Sums a time-major per-feature vector into one value per sensor group.
inline std::array<double, kGroupCount> sensor_group_importance(
    const std::vector<double>& per_feature) {
  if (per_feature.empty() || per_feature.size() % kChannelCount != 0)
    throw DataError("per-feature vector length must be a multiple of the channel count");
  std::array<double, kGroupCount> out{};
  for (std::size_t f = 0; f < per_feature.size(); ++f) {
    const int channel = static_cast<int>(f % kChannelCount);
    out[static_cast<std::size_t>(static_cast<int>(group_of_channel(channel)))] +=
        per_feature[f];
  }
  return out;
}

inline Json forest_to_json(const ForestModel& model) {
  model.validate();
  Json trees = Json::array();
  for (const auto& tree : model.trees) {
    Json t;
    auto& feature = t["feature"] = Json::array();
    auto& threshold = t["threshold"] = Json::array();
    auto& left = t["left"] = Json::array();
    auto& right = t["right"] = Json::array();
    auto& counts = t["counts"] = Json::array();
    for (const auto& node : tree) {
      feature.push_back(node.feature);
      threshold.push_back(node.threshold);
      left.push_back(node.left);
      right.push_back(node.right);
      counts.push_back(node.counts);
    }
    trees.push_back(std::move(t));
  }
  Json j;
  j["format"] = "pickstate-forest";
  j["version"] = 1;
  j["feature_count"] = model.feature_count;
  j["seed"] = model.seed.value;
  Json states = Json::array();
  for (auto name : kStateNames) states.push_back(std::string(name));
  j["states"] = std::move(states);
  j["trees"] = std::move(trees);
  return j;
}

inline ForestModel forest_from_json(const Json& j) {
  if (j.value("format", "") != "pickstate-forest" || j.value("version", 0) != 1)
    throw DataError("not a version-1 forest model file");
  ForestModel model;
  model.feature_count = j.at("feature_count").get<int>();
  model.seed.value = j.at("seed").get<std::uint64_t>();
  for (const auto& t : j.at("trees")) {
    const auto& feature = t.at("feature");
    const auto& threshold = t.at("threshold");
    const auto& left = t.at("left");
    const auto& right = t.at("right");
    const auto& counts = t.at("counts");
    const std::size_t n = feature.size();
    if (threshold.size() != n || left.size() != n || right.size() != n ||
        counts.size() != n)
      throw DataError("forest model tree arrays disagree in length");
    std::vector<TreeNode> tree(n);
    for (std::size_t i = 0; i < n; ++i) {
      tree[i].feature = feature[i].get<int>();
      tree[i].threshold = threshold[i].get<double>();
      tree[i].left = left[i].get<int>();
      tree[i].right = right[i].get<int>();
      tree[i].counts = counts[i].get<std::array<std::int64_t, kStateCount>>();
    }
    model.trees.push_back(std::move(tree));
  }
  model.validate();
  return model;
}

inline void save_forest(const std::string& path, const ForestModel& model) {
  write_text_file(path, forest_to_json(model).dump(1) + "\n");
}

inline ForestModel load_forest(const std::string& path) {
  return forest_from_json(Json::parse(read_text_file(path)));
}

}  // namespace pickstate
