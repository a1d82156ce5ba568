#pragma once

// Attention-geometry features of a single layer, plus depth-wise features over
// the sequence of per-layer summary vectors.
//
// Conventions shared by every function here:
//  - distances are in token positions, entropies in nats;
//  - the query mask doubles as the key mask: masked keys are never read;
//  - the valid query set Q holds unmasked positions whose row carries positive
//    mass over unmasked keys in every head (degenerate rows are dropped and
//    counted, never propagated as NaN).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "affectlens/error.hpp"
#include "affectlens/tensor_store.hpp"

namespace affectlens {

/// Non-owning view of one layer: attention [H, T, T] plus masks [T].
struct LayerAttention {
  std::span<const float> attn;
  std::size_t heads = 0;
  std::size_t seq_len = 0;
  std::span<const std::uint8_t> query_mask;
  std::span<const std::uint8_t> task_mask;

  double at(std::size_t h, std::size_t i, std::size_t j) const noexcept {
    return attn[(h * seq_len + i) * seq_len + j];
  }
  bool valid_key(std::size_t j) const noexcept { return query_mask[j] != 0; }
  bool task(std::size_t i) const noexcept { return task_mask[i] != 0; }
};

inline LayerAttention layer_view(const AttentionBundle& b, std::size_t layer) {
  const auto& A = b.attention.at(layer);
  return LayerAttention{A.values(), b.manifest.num_heads, b.manifest.seq_len, b.query_mask,
                        b.task_mask};
}

struct Positions {
  std::vector<std::size_t> queries;  // Q
  std::vector<std::size_t> keys;     // unmasked keys
  std::size_t degenerate_rows = 0;   // unmasked rows excluded for zero mass
};

inline Positions valid_positions(const LayerAttention& layer) {
  if (layer.attn.size() != layer.heads * layer.seq_len * layer.seq_len ||
      layer.query_mask.size() != layer.seq_len || layer.task_mask.size() != layer.seq_len) {
    throw Error(ErrorKind::ShapeMismatch, "layer view does not match [H, T, T] / [T]");
  }
  Positions p;
  for (std::size_t j = 0; j < layer.seq_len; ++j) {
    if (layer.valid_key(j)) p.keys.push_back(j);
  }
  for (std::size_t i = 0; i < layer.seq_len; ++i) {
    if (!layer.valid_key(i)) continue;
    bool live = true;
    for (std::size_t h = 0; h < layer.heads && live; ++h) {
      double mass = 0.0;
      for (std::size_t j : p.keys) mass += layer.at(h, i, j);
      live = mass > 0.0;
    }
    if (live) {
      p.queries.push_back(i);
    } else {
      ++p.degenerate_rows;
    }
  }
  return p;
}

namespace detail {

inline Positions require_queries(const LayerAttention& layer) {
  auto p = valid_positions(layer);
  if (p.queries.empty()) {
    throw Error(ErrorKind::NoValidQueries, "layer has no valid query rows");
  }
  return p;
}

inline double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = dot(a, a), nb = dot(b, b);
  if (na <= 0.0 || nb <= 0.0) throw Error(ErrorKind::ZeroVector, "cosine of a zero vector");
  return std::clamp(dot(a, b) / std::sqrt(na * nb), -1.0, 1.0);
}

// Indices of the k largest entries among `candidates`; ties go to the lower index.
inline std::vector<std::size_t> top_k(std::span<const double> values,
                                      std::vector<std::size_t> candidates, std::size_t k) {
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  candidates.resize(std::min(k, candidates.size()));
  std::sort(candidates.begin(), candidates.end());
  return candidates;
}

// Per-head key-mass profile: mean over valid queries, zero on masked keys.
inline std::vector<std::vector<double>> head_profiles(const LayerAttention& layer,
                                                      const Positions& pos) {
  std::vector<std::vector<double>> prof(layer.heads, std::vector<double>(layer.seq_len, 0.0));
  const double inv_q = 1.0 / static_cast<double>(pos.queries.size());
  for (std::size_t h = 0; h < layer.heads; ++h) {
    for (std::size_t i : pos.queries) {
      for (std::size_t j : pos.keys) prof[h][j] += layer.at(h, i, j);
    }
    for (double& v : prof[h]) v *= inv_q;
  }
  return prof;
}

inline void renormalize(std::span<double> v) {
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  if (s > 0.0) {
    for (double& x : v) x /= s;
  }
}

}  // namespace detail

// ---- spatial structure ------------------------------------------------------

inline double center_of_mass_distance(const LayerAttention& layer) {
  const auto pos = detail::require_queries(layer);
  double total = 0.0;
  for (std::size_t h = 0; h < layer.heads; ++h) {
    for (std::size_t i : pos.queries) {
      double mass = 0.0, moment = 0.0;
      for (std::size_t j : pos.keys) {
        const double a = layer.at(h, i, j);
        mass += a;
        moment += static_cast<double>(j) * a;
      }
      total += std::abs(static_cast<double>(i) - moment / mass);
    }
  }
  return total / static_cast<double>(layer.heads * pos.queries.size());
}

enum class TailMassNorm {
  PerHead,  // averaged over heads, comparable across models
  Literal,  // summed over heads, the unnormalized variant
};

inline double tail_mass(const LayerAttention& layer, double d0,
                        TailMassNorm norm = TailMassNorm::PerHead) {
  if (!(d0 >= 0.0)) throw Error(ErrorKind::ConfigError, "tail-mass distance d0 must be >= 0");
  const auto pos = detail::require_queries(layer);
  double total = 0.0;
  for (std::size_t h = 0; h < layer.heads; ++h) {
    for (std::size_t i : pos.queries) {
      for (std::size_t j : pos.keys) {
        const double dist = std::abs(static_cast<double>(i) - static_cast<double>(j));
        if (dist > d0) total += layer.at(h, i, j);
      }
    }
  }
  double denom = static_cast<double>(pos.queries.size());
  if (norm == TailMassNorm::PerHead) denom *= static_cast<double>(layer.heads);
  return total / denom;
}

/// Per-head expected |i - j| over valid query/key pairs.
inline std::vector<double> locality(const LayerAttention& layer) {
  const auto pos = detail::require_queries(layer);
  std::vector<double> out(layer.heads, 0.0);
  for (std::size_t h = 0; h < layer.heads; ++h) {
    double s = 0.0;
    for (std::size_t i : pos.queries) {
      for (std::size_t j : pos.keys) {
        s += layer.at(h, i, j) * std::abs(static_cast<double>(i) - static_cast<double>(j));
      }
    }
    out[h] = s / static_cast<double>(pos.queries.size());
  }
  return out;
}

// ---- distributional sharpness -----------------------------------------------

inline double key_entropy(const LayerAttention& layer) {
  const auto pos = detail::require_queries(layer);
  auto prof = detail::head_profiles(layer, pos);
  double total = 0.0;
  for (auto& p : prof) {
    detail::renormalize(p);
    total += detail::entropy(p);
  }
  return total / static_cast<double>(layer.heads);
}

inline double row_entropy(const LayerAttention& layer) {
  const auto pos = detail::require_queries(layer);
  double total = 0.0;
  for (std::size_t h = 0; h < layer.heads; ++h) {
    for (std::size_t i : pos.queries) {
      for (std::size_t j : pos.keys) {
        const double a = layer.at(h, i, j);
        if (a > 0.0) total -= a * std::log(a);
      }
    }
  }
  return total / static_cast<double>(layer.heads * pos.queries.size());
}

inline double top1_margin(const LayerAttention& layer) {
  if (layer.seq_len < 2) throw Error(ErrorKind::SequenceTooShort, "top-1 margin needs T >= 2");
  const auto pos = detail::require_queries(layer);
  if (pos.keys.size() < 2) {
    throw Error(ErrorKind::SequenceTooShort, "top-1 margin needs >= 2 unmasked keys");
  }
  double total = 0.0;
  for (std::size_t h = 0; h < layer.heads; ++h) {
    for (std::size_t i : pos.queries) {
      double first = -1.0, second = -1.0;
      for (std::size_t j : pos.keys) {
        const double a = layer.at(h, i, j);
        if (a > first) {
          second = first;
          first = a;
        } else if (a > second) {
          second = a;
        }
      }
      total += first - second;
    }
  }
  return total / static_cast<double>(layer.heads * pos.queries.size());
}

inline constexpr double kDistributionTolerance = 1e-6;

/// Gini of a distribution, via the rank formula with descending sort.
inline double gini_coefficient(std::span<const double> p) {
  if (p.empty()) throw Error(ErrorKind::NotADistribution, "empty distribution");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw Error(ErrorKind::NotADistribution, "negative or NaN probability");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kDistributionTolerance) {
    throw Error(ErrorKind::NotADistribution, "probabilities sum to " + std::to_string(sum));
  }
  std::vector<double> sorted(p.begin(), p.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const double n = static_cast<double>(sorted.size());
  double ranked = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    ranked += static_cast<double>(j + 1) * sorted[j];
  }
  return (n + 1.0 - 2.0 * ranked) / n;
}

/// Layer-level Gini: mean over (head, valid row) of each row renormalized over unmasked keys.
inline double gini(const LayerAttention& layer) {
  const auto pos = detail::require_queries(layer);
  std::vector<double> row(pos.keys.size());
  double total = 0.0;
  for (std::size_t h = 0; h < layer.heads; ++h) {
    for (std::size_t i : pos.queries) {
      for (std::size_t n = 0; n < pos.keys.size(); ++n) row[n] = layer.at(h, i, pos.keys[n]);
      detail::renormalize(row);
      total += gini_coefficient(row);
    }
  }
  return total / static_cast<double>(layer.heads * pos.queries.size());
}

// ---- depth-wise dynamics ----------------------------------------------------

/// Head- and query-averaged key-mass profile over [T], renormalized over unmasked keys.
struct LayerSummaryVector {
  std::vector<double> v;
};

inline LayerSummaryVector layer_summary_vector(const LayerAttention& layer) {
  const auto pos = detail::require_queries(layer);
  const auto prof = detail::head_profiles(layer, pos);
  LayerSummaryVector out{std::vector<double>(layer.seq_len, 0.0)};
  for (const auto& p : prof) {
    for (std::size_t j = 0; j < p.size(); ++j) out.v[j] += p[j];
  }
  detail::renormalize(out.v);
  return out;
}

inline double persistence(std::span<const LayerSummaryVector> vs) {
  if (vs.size() < 2) throw Error(ErrorKind::TooFewLayers, "persistence needs L >= 2");
  double total = 0.0;
  for (std::size_t l = 0; l + 1 < vs.size(); ++l) {
    if (vs[l].v.size() != vs[l + 1].v.size()) {
      throw Error(ErrorKind::DimensionMismatch, "summary vectors differ in length");
    }
    total += detail::cosine(vs[l].v, vs[l + 1].v);
  }
  return total / static_cast<double>(vs.size() - 1);
}

inline double curvature(std::span<const LayerSummaryVector> vs) {
  if (vs.size() < 3) throw Error(ErrorKind::TooFewLayers, "curvature needs L >= 3");
  double total = 0.0;
  for (std::size_t l = 1; l + 1 < vs.size(); ++l) {
    const auto &prev = vs[l - 1].v, &cur = vs[l].v, &next = vs[l + 1].v;
    if (prev.size() != cur.size() || next.size() != cur.size()) {
      throw Error(ErrorKind::DimensionMismatch, "summary vectors differ in length");
    }
    double sq = 0.0;
    for (std::size_t j = 0; j < cur.size(); ++j) {
      const double d = next[j] - 2.0 * cur[j] + prev[j];
      sq += d * d;
    }
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(vs.size() - 2);
}

// ---- cross-head diversity ---------------------------------------------------

inline double topk_overlap(const LayerAttention& layer, std::size_t k) {
  if (layer.heads < 2) throw Error(ErrorKind::TooFewHeads, "top-k overlap needs H >= 2");
  const auto pos = detail::require_queries(layer);
  if (k < 1 || k > pos.keys.size()) {
    throw Error(ErrorKind::KTooLarge, "k = " + std::to_string(k) + " with " +
                                          std::to_string(pos.keys.size()) + " unmasked keys");
  }
  const auto prof = detail::head_profiles(layer, pos);
  std::vector<std::vector<std::size_t>> sets;
  sets.reserve(layer.heads);
  for (const auto& p : prof) sets.push_back(detail::top_k(p, pos.keys, k));
  double shared = 0.0;
  std::vector<std::size_t> common;
  for (std::size_t a = 0; a < layer.heads; ++a) {
    for (std::size_t b = a + 1; b < layer.heads; ++b) {
      common.clear();
      std::set_intersection(sets[a].begin(), sets[a].end(), sets[b].begin(), sets[b].end(),
                            std::back_inserter(common));
      shared += static_cast<double>(common.size());
    }
  }
  const double pairs = static_cast<double>(layer.heads * (layer.heads - 1) / 2);
  return shared / (pairs * static_cast<double>(k));
}

inline double head_similarity(const LayerAttention& layer) {
  if (layer.heads < 2) throw Error(ErrorKind::TooFewHeads, "head similarity needs H >= 2");
  const auto pos = detail::require_queries(layer);
  const auto prof = detail::head_profiles(layer, pos);
  double total = 0.0;
  for (std::size_t a = 0; a < layer.heads; ++a) {
    for (std::size_t b = a + 1; b < layer.heads; ++b) total += detail::cosine(prof[a], prof[b]);
  }
  return total / static_cast<double>(layer.heads * (layer.heads - 1) / 2);
}

// ---- task-specific focus ----------------------------------------------------

/// Per-head mass that valid queries send into the task region.
inline std::vector<double> focus_to(const LayerAttention& layer) {
  const auto pos = detail::require_queries(layer);
  std::vector<double> out(layer.heads, 0.0);
  for (std::size_t h = 0; h < layer.heads; ++h) {
    double s = 0.0;
    for (std::size_t i : pos.queries) {
      for (std::size_t j : pos.keys) {
        if (layer.task(j)) s += layer.at(h, i, j);
      }
    }
    out[h] = s / static_cast<double>(pos.queries.size());
  }
  return out;
}

struct FocusFromProfile {
  std::vector<double> q;  // outgoing distribution over keys [T]
  double entropy = 0.0;
  double topk_mass = 0.0;
};

/// Per-head distribution of attention emitted by task-region queries.
inline std::vector<FocusFromProfile> focus_from(const LayerAttention& layer, std::size_t k) {
  const auto pos = valid_positions(layer);
  std::vector<std::size_t> sources;
  for (std::size_t i : pos.queries) {
    if (layer.task(i)) sources.push_back(i);
  }
  if (sources.empty()) {
    throw Error(ErrorKind::EmptyTaskRegion, "no valid query lies in the task region");
  }
  if (k < 1) throw Error(ErrorKind::KTooLarge, "focus-from top-k needs k >= 1");
  std::vector<FocusFromProfile> out(layer.heads);
  const double inv = 1.0 / static_cast<double>(sources.size());
  for (std::size_t h = 0; h < layer.heads; ++h) {
    auto& prof = out[h];
    prof.q.assign(layer.seq_len, 0.0);
    for (std::size_t i : sources) {
      for (std::size_t j : pos.keys) prof.q[j] += layer.at(h, i, j);
    }
    for (double& v : prof.q) v *= inv;
    prof.entropy = detail::entropy(prof.q);
    for (std::size_t j : detail::top_k(prof.q, pos.keys, k)) prof.topk_mass += prof.q[j];
  }
  return out;
}

}  // namespace affectlens
