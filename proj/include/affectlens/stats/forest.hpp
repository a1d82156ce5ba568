#pragma once

// Bagged CART classification trees with Gini-impurity splits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "affectlens/error.hpp"
#include "affectlens/parallel.hpp"
#include "affectlens/rng.hpp"
#include "affectlens/stats/matrix.hpp"

namespace affectlens::stats {

struct ForestConfig {
  std::size_t num_trees = 200;
  std::size_t max_depth = 0;  // 0 = unlimited
  std::size_t min_samples_leaf = 1;
  std::size_t max_features = 0;  // 0 = floor(sqrt(F))
  std::uint64_t seed = 42;
  std::size_t threads = 1;
};

class DecisionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    int label = 0;
  };

  int predict(std::span<const double> x) const {
    std::uint32_t n = 0;
    while (nodes_[n].feature >= 0) {
      const auto& node = nodes_[n];
      n = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    }
    return nodes_[n].label;
  }

  std::size_t size() const noexcept { return nodes_.size(); }

  static DecisionTree fit(const Matrix& X, std::span<const int> y, std::size_t num_classes,
                          std::vector<std::size_t> samples, const ForestConfig& cfg, Rng& rng) {
    DecisionTree tree;
    Builder b{X, y, num_classes, cfg, rng, tree.nodes_};
    tree.nodes_.push_back({});
    struct Pending {
      std::uint32_t node;
      std::vector<std::size_t> idx;
      std::size_t depth;
    };
    std::vector<Pending> stack;
    stack.push_back({0, std::move(samples), 0});
    while (!stack.empty()) {
      Pending p = std::move(stack.back());
      stack.pop_back();
      auto split = b.split_node(p.idx, p.depth);
      tree.nodes_[p.node].label = split.majority;
      if (split.feature < 0) continue;
      std::vector<std::size_t> left, right;
      for (std::size_t i : p.idx) {
        (X(i, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(i);
      }
      const auto l = static_cast<std::uint32_t>(tree.nodes_.size());
      tree.nodes_.push_back({});
      tree.nodes_.push_back({});
      auto& node = tree.nodes_[p.node];
      node.feature = split.feature;
      node.threshold = split.threshold;
      node.left = l;
      node.right = l + 1;
      stack.push_back({l + 1, std::move(right), p.depth + 1});
      stack.push_back({l, std::move(left), p.depth + 1});
    }
    return tree;
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    int majority = 0;
  };

  struct Builder {
    const Matrix& X;
    std::span<const int> y;
    std::size_t num_classes;
    const ForestConfig& cfg;
    Rng& rng;
    std::vector<Node>& nodes;

    static double gini_sum(std::span<const std::size_t> counts, std::size_t n) {
      // n * impurity, so child terms add without reweighting
      if (n == 0) return 0.0;
      double sq = 0.0;
      for (std::size_t c : counts) sq += static_cast<double>(c) * static_cast<double>(c);
      return static_cast<double>(n) - sq / static_cast<double>(n);
    }

    Split split_node(const std::vector<std::size_t>& idx, std::size_t depth) {
      std::vector<std::size_t> counts(num_classes, 0);
      for (std::size_t i : idx) ++counts[static_cast<std::size_t>(y[i])];
      Split best;
      best.majority = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      const bool pure = counts[static_cast<std::size_t>(best.majority)] == idx.size();
      if (pure || idx.size() < 2 * cfg.min_samples_leaf ||
          (cfg.max_depth > 0 && depth >= cfg.max_depth)) {
        return best;
      }

      const std::size_t F = X.cols;
      const std::size_t mtry =
          cfg.max_features > 0
              ? std::min(cfg.max_features, F)
              : std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(F))));
      std::vector<std::size_t> features(F);
      std::iota(features.begin(), features.end(), 0);

      double best_score = INFINITY;
      std::vector<std::pair<double, int>> column(idx.size());
      std::vector<std::size_t> left(num_classes);
      // Features are drawn without replacement; past mtry the search continues
      // only while no valid split has been found.
      for (std::size_t drawn = 0; drawn < F; ++drawn) {
        if (drawn >= mtry && best.feature >= 0) break;
        const auto pick = drawn + static_cast<std::size_t>(rng.below(F - drawn));
        std::swap(features[drawn], features[pick]);
        const std::size_t f = features[drawn];

        for (std::size_t n = 0; n < idx.size(); ++n) column[n] = {X(idx[n], f), y[idx[n]]};
        std::sort(column.begin(), column.end());
        if (column.front().first == column.back().first) continue;

        std::fill(left.begin(), left.end(), 0);
        std::vector<std::size_t> right = counts;
        const std::size_t n_total = column.size();
        for (std::size_t n = 0; n + 1 < n_total; ++n) {
          const auto c = static_cast<std::size_t>(column[n].second);
          ++left[c];
          --right[c];
          if (column[n].first == column[n + 1].first) continue;
          const std::size_t nl = n + 1, nr = n_total - nl;
          if (nl < cfg.min_samples_leaf || nr < cfg.min_samples_leaf) continue;
          const double score = gini_sum(left, nl) + gini_sum(right, nr);
          if (score < best_score) {
            best_score = score;
            best.feature = static_cast<int>(f);
            double mid = 0.5 * (column[n].first + column[n + 1].first);
            if (!(mid < column[n + 1].first)) mid = column[n].first;
            best.threshold = mid;
          }
        }
      }
      return best;
    }
  };

  std::vector<Node> nodes_;
};

class RandomForest {
 public:
  static RandomForest fit(const Matrix& X, std::span<const int> y, const ForestConfig& cfg = {}) {
    if (X.rows != y.size()) throw Error(ErrorKind::LengthMismatch, "X rows != label count");
    if (X.rows == 0) throw Error(ErrorKind::EmptyInput, "no training rows");
    if (cfg.num_trees == 0) throw Error(ErrorKind::ConfigError, "forest needs >= 1 tree");
    int max_label = 0;
    for (int v : y) {
      if (v < 0) throw Error(ErrorKind::InvalidLabels, "class labels must be >= 0");
      max_label = std::max(max_label, v);
    }
    if (std::all_of(y.begin(), y.end(), [&](int v) { return v == y[0]; })) {
      throw Error(ErrorKind::SingleClassInput, "random forest needs >= 2 classes");
    }
    RandomForest forest;
    forest.num_classes_ = static_cast<std::size_t>(max_label) + 1;
    forest.trees_.resize(cfg.num_trees);
    parallel_for(cfg.num_trees, cfg.threads, [&](std::size_t t) {
      Rng rng(cfg.seed, t);
      std::vector<std::size_t> bootstrap(X.rows);
      for (auto& s : bootstrap) s = static_cast<std::size_t>(rng.below(X.rows));
      forest.trees_[t] = DecisionTree::fit(X, y, forest.num_classes_, std::move(bootstrap), cfg, rng);
    });
    return forest;
  }

  /// Majority vote across trees; ties go to the lowest class index.
  int predict(std::span<const double> x) const {
    std::vector<std::size_t> votes(num_classes_, 0);
    for (const auto& t : trees_) ++votes[static_cast<std::size_t>(t.predict(x))];
    return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  }

  std::vector<int> predict(const Matrix& X) const {
    std::vector<int> out(X.rows);
    for (std::size_t r = 0; r < X.rows; ++r) out[r] = predict(X.row(r));
    return out;
  }

  std::size_t num_trees() const noexcept { return trees_.size(); }
  std::size_t num_classes() const noexcept { return num_classes_; }

 private:
  std::vector<DecisionTree> trees_;
  std::size_t num_classes_ = 0;
};

}  // namespace affectlens::stats
