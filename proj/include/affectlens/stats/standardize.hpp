#pragma once

#include <cmath>
#include <vector>

#include "affectlens/error.hpp"
#include "affectlens/stats/matrix.hpp"

namespace affectlens::stats {

inline constexpr double kConstantStd = 1e-12;

struct StandardizationParams {
  std::vector<double> mean;
  std::vector<double> std;  // population std
  std::vector<bool> constant;
};

inline StandardizationParams fit_standardization(const Matrix& X) {
  if (X.rows < 2) {
    throw Error(ErrorKind::TooFewRows, "standardization needs >= 2 rows, got " +
                                           std::to_string(X.rows));
  }
  StandardizationParams p;
  p.mean.resize(X.cols);
  p.std.resize(X.cols);
  p.constant.resize(X.cols);
  for (std::size_t c = 0; c < X.cols; ++c) {
    const auto col = X.column(c);
    p.mean[c] = mean(col);
    p.std[c] = population_std(col);
    p.constant[c] = p.std[c] < kConstantStd;
  }
  return p;
}

/// Constant columns map to 0.
inline Matrix apply_standardization(const Matrix& X, const StandardizationParams& p) {
  if (X.cols != p.mean.size()) {
    throw Error(ErrorKind::DimensionMismatch, "standardization fitted on a different column count");
  }
  Matrix out(X.rows, X.cols);
  for (std::size_t r = 0; r < X.rows; ++r) {
    for (std::size_t c = 0; c < X.cols; ++c) {
      out(r, c) = p.constant[c] ? 0.0 : (X(r, c) - p.mean[c]) / p.std[c];
    }
  }
  return out;
}

inline Matrix zscore_columns(const Matrix& X, StandardizationParams* params = nullptr) {
  auto p = fit_standardization(X);
  auto out = apply_standardization(X, p);
  if (params) *params = std::move(p);
  return out;
}

struct RowStandardized {
  Matrix values;
  std::vector<std::size_t> constant_rows;
};

/// Each row minus its mean, divided by its population std; constant rows become 0.
inline RowStandardized row_standardize(const Matrix& M) {
  RowStandardized out{Matrix(M.rows, M.cols), {}};
  for (std::size_t r = 0; r < M.rows; ++r) {
    const auto row = M.row(r);
    const double m = mean(row);
    const double s = population_std(row);
    if (s < kConstantStd) {
      out.constant_rows.push_back(r);
      continue;
    }
    for (std::size_t c = 0; c < M.cols; ++c) out.values(r, c) = (row[c] - m) / s;
  }
  return out;
}

}  // namespace affectlens::stats
