#pragma once

// Stratified k-fold evaluation. Standardization is fitted on each training
// split and applied to its held-out split unless global z-scoring is requested.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "affectlens/error.hpp"
#include "affectlens/parallel.hpp"
#include "affectlens/stats/forest.hpp"
#include "affectlens/stats/kfold.hpp"
#include "affectlens/stats/logistic.hpp"
#include "affectlens/stats/matrix.hpp"
#include "affectlens/stats/metrics.hpp"
#include "affectlens/stats/roc.hpp"
#include "affectlens/stats/standardize.hpp"

namespace affectlens::stats {

struct CVReport {
  std::string metric;
  std::vector<double> fold_values;
  double mean = 0.0;
  double std = 0.0;  // population std over folds
  FoldAssignment folds;
};

struct CVOptions {
  std::size_t folds = 5;
  std::uint64_t seed = 42;
  bool global_zscore = false;
  std::size_t threads = 1;
};

namespace detail {

inline void finish(CVReport& r) {
  r.mean = stats::mean(r.fold_values);
  r.std = population_std(r.fold_values);
}

inline void check_matrix(const Matrix& X, std::size_t labels) {
  if (X.rows != labels) throw Error(ErrorKind::LengthMismatch, "X rows != label count");
  if (X.rows < 2) throw Error(ErrorKind::TooFewRows, "need >= 2 rows");
  if (!X.all_finite()) throw Error(ErrorKind::NonFiniteInput, "design matrix has NaN/Inf");
}

// Standardized (train, test) pair for one fold.
inline std::pair<Matrix, Matrix> fold_split(const Matrix& X, const std::vector<std::size_t>& train,
                                            const std::vector<std::size_t>& test, bool prestandardized) {
  Matrix tr = X.select_rows(train), te = X.select_rows(test);
  if (prestandardized) return {std::move(tr), std::move(te)};
  const auto p = fit_standardization(tr);
  return {apply_standardization(tr, p), apply_standardization(te, p)};
}

}  // namespace detail

/// Held-out ROC-AUC of L2 logistic regression.
inline CVReport cv_logistic_auc(const Matrix& X, std::span<const int> y, const LogisticOptions& model,
                                const CVOptions& opt = {}) {
  detail::check_matrix(X, y.size());
  CVReport r{"roc_auc", std::vector<double>(opt.folds), 0.0, 0.0,
             stratified_kfold(y, opt.folds, opt.seed)};
  const Matrix source = opt.global_zscore ? zscore_columns(X) : X;
  parallel_for(opt.folds, opt.threads, [&](std::size_t f) {
    const auto test = r.folds.members(f), train = r.folds.complement(f);
    auto [tr, te] = detail::fold_split(source, train, test, opt.global_zscore);
    const auto y_tr = select<int>(y, train), y_te = select<int>(y, test);
    const auto fit = fit_logistic(tr, y_tr, model);
    r.fold_values[f] = roc_auc(fit.decision(te), y_te);
  });
  detail::finish(r);
  return r;
}

struct FeatureScreen {
  std::size_t column = 0;
  std::string feature;
  CVReport report;
};

/// One single-feature model per column under the same protocol; sorted by
/// descending mean AUC, ties by column order.
inline std::vector<FeatureScreen> univariate_screen(const Matrix& X, std::span<const int> y,
                                                    std::span<const std::string> names,
                                                    const LogisticOptions& model,
                                                    const CVOptions& opt = {}) {
  if (names.size() != X.cols) throw Error(ErrorKind::LengthMismatch, "one name per column required");
  std::vector<FeatureScreen> out(X.cols);
  CVOptions inner = opt;
  inner.threads = 1;
  parallel_for(X.cols, opt.threads, [&](std::size_t c) {
    const std::size_t col[] = {c};
    out[c] = {c, names[c], cv_logistic_auc(X.select_columns(col), y, model, inner)};
  });
  std::stable_sort(out.begin(), out.end(), [](const FeatureScreen& a, const FeatureScreen& b) {
    return a.report.mean > b.report.mean;
  });
  return out;
}

struct ForestCVReport {
  CVReport accuracy;
  CVReport macro_f1;
  std::vector<int> out_of_fold;      // held-out prediction per sample
  ClassificationReport pooled;       // metrics of out_of_fold against y
};

inline ForestCVReport cv_forest(const Matrix& X, std::span<const int> y, const ForestConfig& forest,
                                const CVOptions& opt = {}) {
  detail::check_matrix(X, y.size());
  const auto folds = stratified_kfold(y, opt.folds, opt.seed);
  ForestCVReport r{{"accuracy", std::vector<double>(opt.folds), 0.0, 0.0, folds},
                   {"macro_f1", std::vector<double>(opt.folds), 0.0, 0.0, folds},
                   std::vector<int>(y.size(), -1),
                   {}};
  const Matrix source = opt.global_zscore ? zscore_columns(X) : X;
  // Trees parallelize inside each fold; the fold loop stays serial so the
  // worker count is bounded by opt.threads.
  for (std::size_t f = 0; f < opt.folds; ++f) {
    const auto test = folds.members(f), train = folds.complement(f);
    auto [tr, te] = detail::fold_split(source, train, test, opt.global_zscore);
    const auto y_tr = select<int>(y, train), y_te = select<int>(y, test);
    ForestConfig cfg = forest;
    cfg.threads = opt.threads;
    cfg.seed = forest.seed + 0x9e3779b97f4a7c15ULL * (f + 1);
    const auto model = RandomForest::fit(tr, y_tr, cfg);
    const auto pred = model.predict(te);
    for (std::size_t n = 0; n < test.size(); ++n) r.out_of_fold[test[n]] = pred[n];
    const auto rep = classification_report(pred, y_te);
    r.accuracy.fold_values[f] = rep.accuracy;
    r.macro_f1.fold_values[f] = rep.macro_f1;
  }
  detail::finish(r.accuracy);
  detail::finish(r.macro_f1);
  r.pooled = classification_report(r.out_of_fold, y);
  return r;
}

}  // namespace affectlens::stats
