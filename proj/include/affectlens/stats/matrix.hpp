#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "affectlens/error.hpp"

namespace affectlens::stats {

/// Row-major dense matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) noexcept { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data.data() + r * cols, cols}; }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) out[r] = (*this)(r, c);
    return out;
  }

  Matrix select_rows(std::span<const std::size_t> idx) const {
    Matrix out(idx.size(), cols);
    for (std::size_t n = 0; n < idx.size(); ++n) {
      const auto src = row(idx[n]);
      std::copy(src.begin(), src.end(), out.row(n).begin());
    }
    return out;
  }

  Matrix select_columns(std::span<const std::size_t> idx) const {
    Matrix out(rows, idx.size());
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t n = 0; n < idx.size(); ++n) out(r, n) = (*this)(r, idx[n]);
    }
    return out;
  }

  bool all_finite() const noexcept {
    for (double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool operator==(const Matrix&) const = default;
};

template <typename T>
std::vector<T> select(std::span<const T> values, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(values[i]);
  return out;
}

inline double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// Population standard deviation (divides by n).
inline double population_std(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

/// Sample variance (divides by n - 1).
inline double sample_variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

}  // namespace affectlens::stats
