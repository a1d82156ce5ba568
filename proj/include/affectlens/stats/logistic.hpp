#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "affectlens/error.hpp"
#include "affectlens/stats/matrix.hpp"

namespace affectlens::stats {

struct LogisticOptions {
  double l2 = 1.0;
  std::size_t max_iterations = 1000;
  double gradient_tolerance = 1e-6;  // on the infinity norm
};

struct LogisticModel {
  std::vector<double> weights;
  double intercept = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;

  double decision(std::span<const double> x) const {
    double z = intercept;
    for (std::size_t c = 0; c < weights.size(); ++c) z += weights[c] * x[c];
    return z;
  }

  std::vector<double> decision(const Matrix& X) const {
    std::vector<double> out(X.rows);
    for (std::size_t r = 0; r < X.rows; ++r) out[r] = decision(X.row(r));
    return out;
  }
};

namespace detail {

// log(1 + exp(z)) without overflow
inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct LogisticObjective {
  const Matrix& X;
  std::span<const int> y;
  double l2;

  // parameters: [w_0 .. w_{F-1}, b]; the intercept is not penalized
  double value(std::span<const double> theta) const {
    const std::size_t F = X.cols;
    double loss = 0.0;
    for (std::size_t r = 0; r < X.rows; ++r) {
      double z = theta[F];
      const auto x = X.row(r);
      for (std::size_t c = 0; c < F; ++c) z += theta[c] * x[c];
      loss += softplus(z) - (y[r] != 0 ? z : 0.0);
    }
    double reg = 0.0;
    for (std::size_t c = 0; c < F; ++c) reg += theta[c] * theta[c];
    return loss / static_cast<double>(X.rows) + 0.5 * l2 * reg;
  }

  void gradient(std::span<const double> theta, std::span<double> g) const {
    const std::size_t F = X.cols;
    std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t r = 0; r < X.rows; ++r) {
      double z = theta[F];
      const auto x = X.row(r);
      for (std::size_t c = 0; c < F; ++c) z += theta[c] * x[c];
      const double resid = sigmoid(z) - (y[r] != 0 ? 1.0 : 0.0);
      for (std::size_t c = 0; c < F; ++c) g[c] += resid * x[c];
      g[F] += resid;
    }
    const double inv_n = 1.0 / static_cast<double>(X.rows);
    for (std::size_t c = 0; c < F; ++c) g[c] = g[c] * inv_n + l2 * theta[c];
    g[F] *= inv_n;
  }
};

inline double dot_self(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

inline double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace detail

/// Gradient of the penalized mean logistic loss; index F is the intercept.
inline std::vector<double> logistic_gradient(const Matrix& X, std::span<const int> y, double l2,
                                             const LogisticModel& model) {
  std::vector<double> theta(model.weights);
  theta.push_back(model.intercept);
  std::vector<double> g(theta.size());
  detail::LogisticObjective{X, y, l2}.gradient(theta, g);
  return g;
}

/// Minimizes mean logistic loss + (l2/2)|w|^2 by full-batch gradient descent
/// with Barzilai-Borwein step proposals and Armijo backtracking.
inline LogisticModel fit_logistic(const Matrix& X, std::span<const int> y,
                                  const LogisticOptions& opt = {}) {
  if (X.rows != y.size()) throw Error(ErrorKind::LengthMismatch, "X rows != label count");
  if (opt.l2 < 0.0) throw Error(ErrorKind::ConfigError, "l2 penalty must be >= 0");
  std::size_t positives = 0;
  for (int v : y) positives += v != 0;
  if (positives == 0 || positives == y.size()) {
    throw Error(ErrorKind::SingleClassInput, "logistic regression needs both classes");
  }

  const std::size_t F = X.cols;
  const detail::LogisticObjective obj{X, y, opt.l2};
  std::vector<double> theta(F + 1, 0.0);
  const double base = static_cast<double>(positives) / static_cast<double>(y.size());
  theta[F] = std::log(base / (1.0 - base));

  std::vector<double> g(F + 1), g_new(F + 1), trial(F + 1);
  obj.gradient(theta, g);
  double f = obj.value(theta);
  double step = 1.0;

  LogisticModel model;
  std::size_t it = 0;
  for (; it < opt.max_iterations && detail::inf_norm(g) > opt.gradient_tolerance; ++it) {
    const double gg = detail::dot_self(g);
    double alpha = step;
    double f_trial = 0.0;
    for (int backtrack = 0; backtrack < 60; ++backtrack) {
      for (std::size_t c = 0; c <= F; ++c) trial[c] = theta[c] - alpha * g[c];
      f_trial = obj.value(trial);
      if (f_trial <= f - 1e-4 * alpha * gg) break;
      alpha *= 0.5;
    }
    obj.gradient(trial, g_new);
    // Barzilai-Borwein proposal for the next step: s.s / s.(delta g)
    double ss = 0.0, sy = 0.0;
    for (std::size_t c = 0; c <= F; ++c) {
      const double s = trial[c] - theta[c];
      ss += s * s;
      sy += s * (g_new[c] - g[c]);
    }
    step = (sy > 0.0) ? std::clamp(ss / sy, 1e-10, 1e10) : alpha * 2.0;
    theta.swap(trial);
    g.swap(g_new);
    f = f_trial;
  }

  model.weights.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(F));
  model.intercept = theta[F];
  model.iterations = it;
  model.gradient_norm = detail::inf_norm(g);
  model.converged = model.gradient_norm <= opt.gradient_tolerance;
  return model;
}

}  // namespace affectlens::stats
