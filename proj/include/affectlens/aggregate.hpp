#pragma once

// Collapses per-layer, per-head attention features into one row per example:
// per-head features are summarized across heads (mean, std, q25, q75) within
// each layer, scalar features are taken as is, and both are then averaged
// uniformly over layers. Persistence and curvature are computed once from the
// sequence of layer summary vectors.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "affectlens/attn_features.hpp"
#include "affectlens/emotion.hpp"
#include "affectlens/error.hpp"
#include "affectlens/parallel.hpp"
#include "affectlens/stats/matrix.hpp"
#include "affectlens/stats/standardize.hpp"
#include "affectlens/tensor_store.hpp"

namespace affectlens {

struct FeatureConfig {
  double d0 = 16.0;
  std::size_t top_k = 5;
  bool raw_tailmass = false;
};

struct HeadSummary {
  double mean = 0.0;
  double std = 0.0;  // population
  double q25 = 0.0;
  double q75 = 0.0;
};

/// Quantile of sorted values with linear interpolation between order statistics.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline HeadSummary summarize_heads(std::span<const double> per_head) {
  if (per_head.empty()) throw Error(ErrorKind::EmptyInput, "no per-head values to summarize");
  std::vector<double> sorted(per_head.begin(), per_head.end());
  std::sort(sorted.begin(), sorted.end());
  return {stats::mean(per_head), stats::population_std(per_head), quantile_sorted(sorted, 0.25),
          quantile_sorted(sorted, 0.75)};
}

/// Column contract for feature CSVs, in emission order.
inline const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    auto per_head = [&](std::string_view base) {
      for (const char* s : {"_mean", "_std", "_q25", "_q75"}) n.push_back(std::string(base) + s);
    };
    n.push_back("cmd");
    n.push_back("tail_mass");
    per_head("locality");
    n.push_back("key_entropy");
    n.push_back("row_entropy");
    n.push_back("top1_margin");
    n.push_back("gini");
    n.push_back("persistence");
    n.push_back("curvature");
    n.push_back("topk_overlap");
    n.push_back("head_similarity");
    per_head("focus_to");
    per_head("focus_from_entropy");
    per_head("focus_from_topk_mass");
    return n;
  }();
  return names;
}

struct LayerFeatures {
  double cmd = 0.0;
  double tail_mass = 0.0;
  HeadSummary locality;
  double key_entropy = 0.0;
  double row_entropy = 0.0;
  double top1_margin = 0.0;
  double gini = 0.0;
  double topk_overlap = 0.0;
  double head_similarity = 0.0;
  HeadSummary focus_to;
  HeadSummary focus_from_entropy;
  HeadSummary focus_from_topk_mass;
};

// Single-head layers have no head pairs; both diversity features are then 1
// (a lone head is fully redundant with itself). Top-k overlap clamps k to the
// number of unmasked keys so short sequences stay well-defined.
inline LayerFeatures compute_layer_features(const LayerAttention& layer, const FeatureConfig& cfg) {
  LayerFeatures f;
  f.cmd = center_of_mass_distance(layer);
  f.tail_mass = tail_mass(layer, cfg.d0,
                          cfg.raw_tailmass ? TailMassNorm::Literal : TailMassNorm::PerHead);
  f.locality = summarize_heads(locality(layer));
  f.key_entropy = key_entropy(layer);
  f.row_entropy = row_entropy(layer);
  f.top1_margin = top1_margin(layer);
  f.gini = gini(layer);
  if (layer.heads >= 2) {
    const auto keys = valid_positions(layer).keys.size();
    f.topk_overlap = topk_overlap(layer, std::min(cfg.top_k, keys));
    f.head_similarity = head_similarity(layer);
  } else {
    f.topk_overlap = 1.0;
    f.head_similarity = 1.0;
  }
  f.focus_to = summarize_heads(focus_to(layer));
  const auto ff = focus_from(layer, cfg.top_k);
  std::vector<double> ent, mass;
  for (const auto& p : ff) {
    ent.push_back(p.entropy);
    mass.push_back(p.topk_mass);
  }
  f.focus_from_entropy = summarize_heads(ent);
  f.focus_from_topk_mass = summarize_heads(mass);
  return f;
}

struct FeatureVector {
  std::string example_id;
  Emotion emotion = Emotion::Neutral;
  std::optional<bool> correct;
  std::vector<double> values;  // aligned with feature_names()

  double get(std::string_view name) const {
    const auto& names = feature_names();
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw Error(ErrorKind::ConfigError, "unknown feature " + std::string(name));
    return values.at(static_cast<std::size_t>(it - names.begin()));
  }
};

namespace detail {

inline void append_summary(std::vector<double>& out, const HeadSummary& s) {
  out.insert(out.end(), {s.mean, s.std, s.q25, s.q75});
}

inline std::vector<double> layer_row(const LayerFeatures& f) {
  // persistence/curvature slots are filled by the caller
  std::vector<double> r;
  r.reserve(feature_names().size());
  r.push_back(f.cmd);
  r.push_back(f.tail_mass);
  append_summary(r, f.locality);
  r.push_back(f.key_entropy);
  r.push_back(f.row_entropy);
  r.push_back(f.top1_margin);
  r.push_back(f.gini);
  r.push_back(0.0);
  r.push_back(0.0);
  r.push_back(f.topk_overlap);
  r.push_back(f.head_similarity);
  append_summary(r, f.focus_to);
  append_summary(r, f.focus_from_entropy);
  append_summary(r, f.focus_from_topk_mass);
  return r;
}

inline constexpr std::size_t kPersistenceColumn = 10;
inline constexpr std::size_t kCurvatureColumn = 11;

}  // namespace detail

// With fewer layers than the depth-wise features need, persistence is 1 and
// curvature 0: the values of a constant layer sequence.
inline FeatureVector aggregate_example(const AttentionBundle& bundle, const FeatureConfig& cfg = {}) {
  const std::size_t L = bundle.manifest.num_layers;
  if (L == 0 || bundle.attention.size() != L) {
    throw Error(ErrorKind::InvalidBundle, bundle.manifest.example_id + ": no layers");
  }
  FeatureVector fv{bundle.manifest.example_id, bundle.manifest.emotion, bundle.manifest.correct,
                   std::vector<double>(feature_names().size(), 0.0)};
  std::vector<LayerSummaryVector> summaries;
  summaries.reserve(L);
  for (std::size_t l = 0; l < L; ++l) {
    const auto view = layer_view(bundle, l);
    const auto row = detail::layer_row(compute_layer_features(view, cfg));
    for (std::size_t c = 0; c < row.size(); ++c) fv.values[c] += row[c];
    summaries.push_back(layer_summary_vector(view));
  }
  for (double& v : fv.values) v /= static_cast<double>(L);
  fv.values[detail::kPersistenceColumn] = L >= 2 ? persistence(summaries) : 1.0;
  fv.values[detail::kCurvatureColumn] = L >= 3 ? curvature(summaries) : 0.0;
  for (std::size_t c = 0; c < fv.values.size(); ++c) {
    if (!std::isfinite(fv.values[c])) {
      throw Error(ErrorKind::InvalidBundle, fv.example_id + ": feature " + feature_names()[c] +
                                                " is not finite");
    }
  }
  return fv;
}

inline std::vector<FeatureVector> aggregate_corpus(const std::vector<AttentionBundle>& bundles,
                                                   const FeatureConfig& cfg, std::size_t threads) {
  std::vector<FeatureVector> rows(bundles.size());
  parallel_for(bundles.size(), threads,
               [&](std::size_t i) { rows[i] = aggregate_example(bundles[i], cfg); });
  return rows;
}

inline stats::Matrix feature_matrix(const std::vector<FeatureVector>& rows) {
  const std::size_t F = rows.empty() ? 0 : rows.front().values.size();
  stats::Matrix X(rows.size(), F);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].values.size() != F) {
      throw Error(ErrorKind::ShapeMismatch, rows[r].example_id + ": feature count differs");
    }
    std::copy(rows[r].values.begin(), rows[r].values.end(), X.row(r).begin());
  }
  return X;
}

/// Standardizes every feature column across the corpus (population std).
inline std::pair<std::vector<FeatureVector>, stats::StandardizationParams> zscore(
    const std::vector<FeatureVector>& rows) {
  stats::StandardizationParams params;
  const auto Z = stats::zscore_columns(feature_matrix(rows), &params);
  std::vector<FeatureVector> out = rows;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = Z.row(r);
    out[r].values.assign(src.begin(), src.end());
  }
  return {std::move(out), std::move(params)};
}

}  // namespace affectlens
