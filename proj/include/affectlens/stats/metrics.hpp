#pragma once

#include <algorithm>
#include <set>
#include <span>
#include <vector>

#include "affectlens/error.hpp"

namespace affectlens::stats {

struct ClassMetrics {
  int label = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // occurrences in y
};

struct ClassificationReport {
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  std::vector<ClassMetrics> per_class;  // ascending label
};

// Classes are the union of labels seen in pred and y. Undefined precision or
// recall (no predictions / no support) counts as 0.
inline ClassificationReport classification_report(std::span<const int> pred, std::span<const int> y) {
  if (pred.size() != y.size()) {
    throw Error(ErrorKind::LengthMismatch, "predictions and labels differ in length");
  }
  if (y.empty()) throw Error(ErrorKind::EmptyInput, "no labels");
  const std::set<int> in_pred(pred.begin(), pred.end());
  const std::set<int> in_true(y.begin(), y.end());
  if (std::none_of(in_pred.begin(), in_pred.end(), [&](int c) { return in_true.count(c) > 0; })) {
    throw Error(ErrorKind::InvalidLabels, "predicted and true label sets do not intersect");
  }
  std::set<int> classes = in_pred;
  classes.insert(in_true.begin(), in_true.end());

  ClassificationReport r;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hits += pred[i] == y[i];
  r.accuracy = static_cast<double>(hits) / static_cast<double>(y.size());

  double f1_sum = 0.0;
  for (int c : classes) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const bool p = pred[i] == c, t = y[i] == c;
      tp += p && t;
      fp += p && !t;
      fn += !p && t;
    }
    ClassMetrics m{c, 0.0, 0.0, 0.0, tp + fn};
    if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (tp > 0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    f1_sum += m.f1;
    r.per_class.push_back(m);
  }
  r.macro_f1 = f1_sum / static_cast<double>(classes.size());
  return r;
}

}  // namespace affectlens::stats
