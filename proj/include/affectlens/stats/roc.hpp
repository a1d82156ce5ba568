#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "affectlens/error.hpp"

namespace affectlens::stats {

/// Mann-Whitney ROC-AUC: P(score+ > score-) + P(tie) / 2.
///
/// Pair counts are accumulated as integers (twice the tie-aware concordance)
/// and the smaller of auc / 1 - auc is divided out, so that
/// roc_auc(s, y) + roc_auc(-s, y) == 1 holds exactly in floating point.
inline double roc_auc(std::span<const double> scores, std::span<const int> y) {
  if (scores.size() != y.size()) {
    throw Error(ErrorKind::LengthMismatch, "scores and labels differ in length");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  std::uint64_t pos = 0, neg = 0;
  for (int v : y) (v != 0 ? pos : neg) += 1;
  if (pos == 0 || neg == 0) {
    throw Error(ErrorKind::SingleClassInput, "ROC-AUC needs both classes present");
  }

  std::uint64_t twice_concordant = 0;
  std::uint64_t neg_below = 0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start;
    std::uint64_t p = 0, n = 0;
    while (end < order.size() && scores[order[end]] == scores[order[start]]) {
      (y[order[end]] != 0 ? p : n) += 1;
      ++end;
    }
    twice_concordant += 2 * p * neg_below + p * n;
    neg_below += n;
    start = end;
  }
  const std::uint64_t twice_pairs = 2 * pos * neg;
  const double denom = static_cast<double>(twice_pairs);
  if (twice_concordant <= twice_pairs - twice_concordant) {
    return static_cast<double>(twice_concordant) / denom;
  }
  return 1.0 - static_cast<double>(twice_pairs - twice_concordant) / denom;
}

}  // namespace affectlens::stats
