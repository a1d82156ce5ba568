#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "affectlens/emotion.hpp"
#include "affectlens/error.hpp"
#include "affectlens/stats/matrix.hpp"

namespace affectlens::stats {

/// Cohen's d with the pooled sample-variance denominator; NaN when the pooled
/// variance is zero.
inline double cohens_d(std::span<const double> group, std::span<const double> rest) {
  const double n1 = static_cast<double>(group.size()), n2 = static_cast<double>(rest.size());
  const double pooled =
      ((n1 - 1.0) * sample_variance(group) + (n2 - 1.0) * sample_variance(rest)) / (n1 + n2 - 2.0);
  if (!(pooled > 0.0)) return NAN;
  return (mean(group) - mean(rest)) / std::sqrt(pooled);
}

struct EffectSizeMatrix {
  std::vector<Emotion> emotions;       // rows, canonical order
  std::vector<std::string> features;   // columns, by descending across-emotion variance
  Matrix d;                            // emotions x features
  std::vector<double> column_variance; // population variance of each column of d
  struct Flag {
    Emotion emotion;
    std::string feature;
  };
  std::vector<Flag> zero_pooled_variance;

  double at(Emotion e, const std::string& feature) const {
    const auto r = std::find(emotions.begin(), emotions.end(), e);
    const auto c = std::find(features.begin(), features.end(), feature);
    if (r == emotions.end() || c == features.end()) {
      throw Error(ErrorKind::ConfigError, "no effect size for " + std::string(to_string(e)) + "/" +
                                              feature);
    }
    return d(static_cast<std::size_t>(r - emotions.begin()),
             static_cast<std::size_t>(c - features.begin()));
  }
};

// One row per emotion present in `emotions` (minus `exclude`). Excluded
// emotions lose their row only; their samples stay in every "rest" group.
inline EffectSizeMatrix cohens_d_one_vs_rest(const Matrix& X, std::span<const Emotion> emotions,
                                             std::span<const std::string> feature_names,
                                             std::span<const Emotion> exclude = {}) {
  if (X.rows != emotions.size()) throw Error(ErrorKind::LengthMismatch, "X rows != label count");
  if (X.cols != feature_names.size()) {
    throw Error(ErrorKind::LengthMismatch, "X columns != feature name count");
  }
  std::set<Emotion> present(emotions.begin(), emotions.end());
  for (Emotion e : exclude) present.erase(e);

  EffectSizeMatrix out;
  out.emotions.assign(present.begin(), present.end());
  Matrix d(out.emotions.size(), X.cols);
  for (std::size_t r = 0; r < out.emotions.size(); ++r) {
    const Emotion e = out.emotions[r];
    std::vector<std::size_t> in, rest;
    for (std::size_t i = 0; i < emotions.size(); ++i) (emotions[i] == e ? in : rest).push_back(i);
    if (in.size() < 2 || rest.size() < 2) {
      throw Error(ErrorKind::GroupTooSmall, std::string(to_string(e)) + ": " +
                                                std::to_string(in.size()) + " vs " +
                                                std::to_string(rest.size()) + " samples");
    }
    for (std::size_t c = 0; c < X.cols; ++c) {
      const auto col = X.column(c);
      const auto a = select<double>(col, in), b = select<double>(col, rest);
      const double v = cohens_d(a, b);
      if (std::isnan(v)) {
        d(r, c) = 0.0;
        out.zero_pooled_variance.push_back({e, feature_names[c]});
      } else {
        d(r, c) = v;
      }
    }
  }

  std::vector<double> var(X.cols);
  for (std::size_t c = 0; c < X.cols; ++c) {
    const auto col = d.column(c);
    const double m = mean(col);
    double ss = 0.0;
    for (double v : col) ss += (v - m) * (v - m);
    var[c] = col.empty() ? 0.0 : ss / static_cast<double>(col.size());
  }
  std::vector<std::size_t> order(X.cols);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return var[a] > var[b]; });

  out.d = d.select_columns(order);
  for (std::size_t c : order) {
    out.features.push_back(feature_names[c]);
    out.column_variance.push_back(var[c]);
  }
  return out;
}

}  // namespace affectlens::stats
