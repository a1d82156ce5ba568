#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "affectlens/error.hpp"
#include "affectlens/rng.hpp"

namespace affectlens::stats {

struct FoldAssignment {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> fold_of;  // per sample

  std::vector<std::size_t> members(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
      if (fold_of[i] == fold) out.push_back(i);
    }
    return out;
  }

  std::vector<std::size_t> complement(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
      if (fold_of[i] != fold) out.push_back(i);
    }
    return out;
  }
};

// Each class is shuffled independently and dealt round-robin; the starting fold
// carries over between classes so total fold sizes also stay within one.
inline FoldAssignment stratified_kfold(std::span<const int> y, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorKind::ConfigError, "need at least 2 folds");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < y.size(); ++i) by_class[y[i]].push_back(i);
  for (const auto& [label, idx] : by_class) {
    if (idx.size() < k) {
      throw Error(ErrorKind::ClassTooSmall, "class " + std::to_string(label) + " has " +
                                                std::to_string(idx.size()) + " members for " +
                                                std::to_string(k) + " folds");
    }
  }
  FoldAssignment out{k, seed, std::vector<std::size_t>(y.size(), 0)};
  std::size_t next = 0;
  for (auto& [label, idx] : by_class) {
    Rng rng(seed, static_cast<std::uint64_t>(static_cast<std::uint32_t>(label)));
    rng.shuffle(std::span<std::size_t>(idx));
    for (std::size_t i : idx) {
      out.fold_of[i] = next;
      next = (next + 1) % k;
    }
  }
  return out;
}

}  // namespace affectlens::stats
