#pragma once

// Bagged CART decision forest: Gini splits on axis-aligned thresholds,
// per-split feature subsampling, leaves holding class histograms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace consensus {

/// Dense row-major feature table.
struct FeatureTable {
  std::size_t n_features = 0;
  std::vector<double> values;

  FeatureTable() = default;
  explicit FeatureTable(std::size_t features) : n_features(features) {}

  std::size_t rows() const { return n_features == 0 ? 0 : values.size() / n_features; }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * n_features, n_features}; }
  double at(std::size_t i, std::size_t f) const { return values[i * n_features + f]; }

  void add_row(std::span<const double> row) {
    require(row.size() == n_features, ErrorKind::shape, "feature row has the wrong width");
    values.insert(values.end(), row.begin(), row.end());
  }
};

struct ForestParams {
  int n_trees = 100;
  int max_depth = 12;
  int min_leaf = 2;
  int features_per_split = 0;  // 0 means ceil(sqrt(n_features))
  std::size_t jobs = 1;        // training threads; does not affect the model

  bool operator==(const ForestParams& o) const {
    return n_trees == o.n_trees && max_depth == o.max_depth && min_leaf == o.min_leaf &&
           features_per_split == o.features_per_split;
  }
};

struct DecisionTree {
  // Node arrays; feature < 0 marks a leaf. Rows go left when x <= threshold.
  std::vector<int> feature;
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  std::vector<std::vector<std::uint32_t>> histogram;  // per node, empty for inner nodes

  std::size_t leaf_for(std::span<const double> x) const {
    std::size_t node = 0;
    while (feature[node] >= 0) {
      node = static_cast<std::size_t>(x[static_cast<std::size_t>(feature[node])] <= threshold[node] ? left[node]
                                                                                                  : right[node]);
    }
    return node;
  }

  bool operator==(const DecisionTree&) const = default;
};

class DecisionForest {
 public:
  DecisionForest() = default;

  static DecisionForest train(const FeatureTable& features, std::span<const int> labels, const ForestParams& params,
                              std::uint64_t seed);

  std::size_t n_features() const { return n_features_; }
  int n_classes() const { return n_classes_; }
  const ForestParams& params() const { return params_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }

  /// Mean of per-tree normalised leaf histograms.
  std::vector<double> predict_proba(std::span<const double> x) const {
    require(x.size() == n_features_, ErrorKind::shape, "predict: feature width mismatch");
    std::vector<double> p(static_cast<std::size_t>(n_classes_), 0.0);
    for (const auto& tree : trees_) {
      const auto& h = tree.histogram[tree.leaf_for(x)];
      const double total = std::accumulate(h.begin(), h.end(), 0.0);
      for (std::size_t c = 0; c < h.size(); ++c) p[c] += static_cast<double>(h[c]) / total;
    }
    for (auto& v : p) v /= static_cast<double>(trees_.size());
    return p;
  }

  /// Most probable class; ties go to the lower class index.
  int predict(std::span<const double> x) const {
    const auto p = predict_proba(x);
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
  }

  nlohmann::ordered_json to_json() const;
  static DecisionForest from_json(const nlohmann::json& j);
  std::string serialize() const { return to_json().dump(); }

  bool operator==(const DecisionForest& o) const {
    return n_features_ == o.n_features_ && n_classes_ == o.n_classes_ && params_ == o.params_ &&
           seed_ == o.seed_ && trees_ == o.trees_;
  }

 private:
  std::size_t n_features_ = 0;
  int n_classes_ = 0;
  ForestParams params_;
  std::uint64_t seed_ = 0;
  std::vector<DecisionTree> trees_;
};

namespace detail {

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;  // sum over children of n * gini
};

class TreeBuilder {
 public:
  TreeBuilder(const FeatureTable& x, std::span<const int> y, int n_classes, const ForestParams& params,
              std::size_t features_per_split, Rng& rng)
      : x_(x), y_(y), n_classes_(n_classes), params_(params), features_per_split_(features_per_split), rng_(rng) {}

  DecisionTree build(std::vector<std::size_t> rows) {
    rows_ = std::move(rows);
    grow(0, rows_.size(), 0);
    return std::move(tree_);
  }

 private:
  std::vector<std::uint32_t> counts(std::size_t begin, std::size_t end) const {
    std::vector<std::uint32_t> h(static_cast<std::size_t>(n_classes_), 0);
    for (std::size_t i = begin; i < end; ++i) ++h[static_cast<std::size_t>(y_[rows_[i]])];
    return h;
  }

  static double weighted_gini(const std::vector<double>& h, double n) {
    if (n <= 0.0) return 0.0;
    double sq = 0.0;
    for (double c : h) sq += c * c;
    return n - sq / n;
  }

  int add_node() {
    tree_.feature.push_back(-1);
    tree_.threshold.push_back(0.0);
    tree_.left.push_back(-1);
    tree_.right.push_back(-1);
    tree_.histogram.emplace_back();
    return static_cast<int>(tree_.feature.size() - 1);
  }

  bool best_split_on(std::size_t f, std::size_t begin, std::size_t end, const std::vector<double>& total,
                     SplitCandidate& best) {
    const std::size_t m = end - begin;
    scratch_.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t r = rows_[begin + i];
      scratch_[i] = {x_.at(r, f), y_[r]};
    }
    std::sort(scratch_.begin(), scratch_.end());
    if (scratch_.front().first == scratch_.back().first) return false;
    std::vector<double> left(total.size(), 0.0), right = total;
    const auto min_leaf = static_cast<std::size_t>(std::max(1, params_.min_leaf));
    bool found = false;
    for (std::size_t i = 1; i < m; ++i) {
      const auto c = static_cast<std::size_t>(scratch_[i - 1].second);
      left[c] += 1.0;
      right[c] -= 1.0;
      if (scratch_[i - 1].first == scratch_[i].first) continue;
      if (i < min_leaf || m - i < min_leaf) continue;
      const double impurity =
          weighted_gini(left, static_cast<double>(i)) + weighted_gini(right, static_cast<double>(m - i));
      if (best.feature < 0 || impurity < best.impurity) {
        double t = scratch_[i - 1].first + (scratch_[i].first - scratch_[i - 1].first) / 2.0;
        if (!(t < scratch_[i].first)) t = scratch_[i - 1].first;
        best = {static_cast<int>(f), t, impurity};
        found = true;
      }
    }
    return found;
  }

  int grow(std::size_t begin, std::size_t end, int depth) {
    const int node = add_node();
    const auto h = counts(begin, end);
    const std::size_t m = end - begin;
    const bool pure = std::count_if(h.begin(), h.end(), [](std::uint32_t c) { return c > 0; }) <= 1;
    const auto min_leaf = static_cast<std::size_t>(std::max(1, params_.min_leaf));
    if (pure || depth >= params_.max_depth || m < 2 * min_leaf) {
      tree_.histogram[static_cast<std::size_t>(node)] = h;
      return node;
    }
    std::vector<double> total(h.begin(), h.end());
    const double parent = weighted_gini(total, static_cast<double>(m));

    std::vector<std::size_t> order(x_.n_features);
    std::iota(order.begin(), order.end(), 0);
    order = rng_.choose(std::move(order), x_.n_features);  // random permutation
    SplitCandidate best;
    std::size_t tried = 0;
    for (std::size_t f : order) {
      // Draw past the subset size only while no usable split has turned up.
      if (tried >= features_per_split_ && best.feature >= 0) break;
      best_split_on(f, begin, end, total, best);
      ++tried;
    }
    if (best.feature < 0 || !(best.impurity < parent - 1e-12)) {
      tree_.histogram[static_cast<std::size_t>(node)] = h;
      return node;
    }
    const auto f = static_cast<std::size_t>(best.feature);
    const auto mid_it = std::partition(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                                       rows_.begin() + static_cast<std::ptrdiff_t>(end),
                                       [&](std::size_t r) { return x_.at(r, f) <= best.threshold; });
    const auto mid = static_cast<std::size_t>(mid_it - rows_.begin());
    tree_.feature[static_cast<std::size_t>(node)] = best.feature;
    tree_.threshold[static_cast<std::size_t>(node)] = best.threshold;
    const int l = grow(begin, mid, depth + 1);
    tree_.left[static_cast<std::size_t>(node)] = l;
    const int r = grow(mid, end, depth + 1);
    tree_.right[static_cast<std::size_t>(node)] = r;
    return node;
  }

  const FeatureTable& x_;
  std::span<const int> y_;
  int n_classes_;
  const ForestParams& params_;
  std::size_t features_per_split_;
  Rng& rng_;
  std::vector<std::size_t> rows_;
  std::vector<std::pair<double, int>> scratch_;
  DecisionTree tree_;
};

}  // namespace detail

inline DecisionForest DecisionForest::train(const FeatureTable& features, std::span<const int> labels,
                                            const ForestParams& params, std::uint64_t seed) {
  const std::size_t n = features.rows();
  require(features.n_features >= 1, ErrorKind::shape, "train_forest: no features");
  require(labels.size() == n, ErrorKind::argument, "train_forest: label count does not match rows");
  require(n >= 2, ErrorKind::degenerate_model, "train_forest: need at least two samples");
  require(params.n_trees >= 1 && params.max_depth >= 1 && params.min_leaf >= 1, ErrorKind::argument,
          "train_forest: invalid hyperparameters");
  int max_label = 0;
  for (int l : labels) {
    require(l >= 0, ErrorKind::argument, "train_forest: negative label");
    max_label = std::max(max_label, l);
  }
  std::vector<bool> seen(static_cast<std::size_t>(max_label) + 1, false);
  for (int l : labels) seen[static_cast<std::size_t>(l)] = true;
  if (std::count(seen.begin(), seen.end(), true) < 2) {
    fail(ErrorKind::degenerate_model, "train_forest: all samples have the same class");
  }

  DecisionForest forest;
  forest.n_features_ = features.n_features;
  forest.n_classes_ = max_label + 1;
  forest.params_ = params;
  forest.seed_ = seed;
  const std::size_t per_split =
      params.features_per_split > 0
          ? std::min<std::size_t>(static_cast<std::size_t>(params.features_per_split), features.n_features)
          : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(features.n_features))));
  forest.trees_.resize(static_cast<std::size_t>(params.n_trees));
  parallel_for(forest.trees_.size(), params.jobs, [&](std::size_t t) {
    Rng rng(derive_seed(seed, t));
    std::vector<std::size_t> rows(n);
    for (auto& r : rows) r = rng.below(n);
    detail::TreeBuilder builder(features, labels, forest.n_classes_, params, per_split, rng);
    forest.trees_[t] = builder.build(std::move(rows));
  });
  return forest;
}

inline nlohmann::ordered_json DecisionForest::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "consensus-labeler-forest";
  j["version"] = 1;
  j["params"] = {{"n_trees", params_.n_trees},
                 {"max_depth", params_.max_depth},
                 {"min_leaf", params_.min_leaf},
                 {"features_per_split", params_.features_per_split}};
  j["seed"] = seed_;
  j["n_features"] = n_features_;
  j["n_classes"] = n_classes_;
  auto trees = nlohmann::ordered_json::array();
  for (const auto& t : trees_) {
    trees.push_back({{"feature", t.feature},
                     {"threshold", t.threshold},
                     {"left", t.left},
                     {"right", t.right},
                     {"histogram", t.histogram}});
  }
  j["trees"] = std::move(trees);
  return j;
}

inline DecisionForest DecisionForest::from_json(const nlohmann::json& j) {
  try {
    require(j.at("format").get<std::string>() == "consensus-labeler-forest", ErrorKind::format, "not a forest model");
    require(j.at("version").get<int>() == 1, ErrorKind::format, "unsupported forest model version");
    DecisionForest f;
    const auto& p = j.at("params");
    f.params_.n_trees = p.at("n_trees").get<int>();
    f.params_.max_depth = p.at("max_depth").get<int>();
    f.params_.min_leaf = p.at("min_leaf").get<int>();
    f.params_.features_per_split = p.at("features_per_split").get<int>();
    f.seed_ = j.at("seed").get<std::uint64_t>();
    f.n_features_ = j.at("n_features").get<std::size_t>();
    f.n_classes_ = j.at("n_classes").get<int>();
    for (const auto& t : j.at("trees")) {
      DecisionTree tree;
      tree.feature = t.at("feature").get<std::vector<int>>();
      tree.threshold = t.at("threshold").get<std::vector<double>>();
      tree.left = t.at("left").get<std::vector<int>>();
      tree.right = t.at("right").get<std::vector<int>>();
      tree.histogram = t.at("histogram").get<std::vector<std::vector<std::uint32_t>>>();
      const std::size_t nodes = tree.feature.size();
      require(nodes >= 1 && tree.threshold.size() == nodes && tree.left.size() == nodes &&
                  tree.right.size() == nodes && tree.histogram.size() == nodes,
              ErrorKind::format, "forest model: inconsistent node arrays");
      for (std::size_t k = 0; k < nodes; ++k) {
        if (tree.feature[k] < 0) {
          require(tree.histogram[k].size() == static_cast<std::size_t>(f.n_classes_), ErrorKind::format,
                  "forest model: bad leaf histogram");
        } else {
          require(static_cast<std::size_t>(tree.feature[k]) < f.n_features_ && tree.left[k] > 0 &&
                      tree.right[k] > 0 && static_cast<std::size_t>(tree.left[k]) < nodes &&
                      static_cast<std::size_t>(tree.right[k]) < nodes,
                  ErrorKind::format, "forest model: bad node link");
        }
      }
      f.trees_.push_back(std::move(tree));
    }
    require(f.trees_.size() == static_cast<std::size_t>(f.params_.n_trees), ErrorKind::format,
            "forest model: tree count mismatch");
    return f;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, std::string("bad forest model: ") + e.what());
  }
}

}  // namespace consensus
