#pragma once

// Mean attention pattern per emotion over the last layers, and row-standardized
// pairwise differences between those patterns.

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "affectlens/emotion.hpp"
#include "affectlens/error.hpp"
#include "affectlens/stats/matrix.hpp"
#include "affectlens/stats/standardize.hpp"
#include "affectlens/tensor_store.hpp"

namespace affectlens {

struct EmotionPatterns {
  std::size_t seq_len = 0;     // common (truncated) T
  std::size_t last_n = 0;
  std::size_t truncated = 0;   // bundles longer than seq_len
  std::map<Emotion, stats::Matrix> mean;  // T x T, averaged over heads, layers, examples
  std::map<Emotion, std::size_t> examples;
};

// Every bundle contributes the top-left T_min x T_min block of its last
// `last_n` layers (all layers when last_n is 0 or exceeds L).
inline EmotionPatterns mean_attention_patterns(std::span<const AttentionBundle> corpus, std::size_t last_n) {
  if (corpus.empty()) throw Error(ErrorKind::EmptyInput, "no bundles");
  EmotionPatterns p;
  p.last_n = last_n;
  p.seq_len = corpus.front().manifest.seq_len;
  for (const auto& b : corpus) p.seq_len = std::min(p.seq_len, b.manifest.seq_len);
  const std::size_t T = p.seq_len;

  for (const auto& b : corpus) {
    const std::size_t L = b.attention.size(), H = b.manifest.num_heads, Tb = b.manifest.seq_len;
    const std::size_t n = (last_n == 0 || last_n > L) ? L : last_n;
    p.truncated += Tb > T;
    auto [it, fresh] = p.mean.try_emplace(b.manifest.emotion, T, T);
    stats::Matrix& acc = it->second;
    stats::Matrix one(T, T);
    for (std::size_t l = L - n; l < L; ++l) {
      const auto& a = b.attention[l].data;
      for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t i = 0; i < T; ++i) {
          for (std::size_t j = 0; j < T; ++j) one(i, j) += a[(h * Tb + i) * Tb + j];
        }
      }
    }
    const double w = 1.0 / static_cast<double>(n * H);
    for (std::size_t k = 0; k < acc.data.size(); ++k) acc.data[k] += one.data[k] * w;
    ++p.examples[b.manifest.emotion];
  }
  for (auto& [e, m] : p.mean) {
    const double w = 1.0 / static_cast<double>(p.examples[e]);
    for (double& v : m.data) v *= w;
  }
  return p;
}

struct PairDifference {
  Emotion a = Emotion::Neutral;
  Emotion b = Emotion::Neutral;
  stats::Matrix standardized;              // row-standardized mean_a - mean_b
  std::vector<std::size_t> constant_rows;  // rows left at 0
  double frobenius = 0.0;                  // of the raw difference
};

/// One entry per unordered emotion pair present, in canonical label order.
inline std::vector<PairDifference> pairwise_differences(const EmotionPatterns& p) {
  std::vector<PairDifference> out;
  for (auto ia = p.mean.begin(); ia != p.mean.end(); ++ia) {
    for (auto ib = std::next(ia); ib != p.mean.end(); ++ib) {
      stats::Matrix diff(p.seq_len, p.seq_len);
      double ss = 0.0;
      for (std::size_t k = 0; k < diff.data.size(); ++k) {
        diff.data[k] = ia->second.data[k] - ib->second.data[k];
        ss += diff.data[k] * diff.data[k];
      }
      auto rs = stats::row_standardize(diff);
      out.push_back({ia->first, ib->first, std::move(rs.values), std::move(rs.constant_rows), std::sqrt(ss)});
    }
  }
  return out;
}

}  // namespace affectlens
