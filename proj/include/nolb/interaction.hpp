#pragma once

#include "nolb/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace nolb {

/// Piecewise-constant interaction function supported on [0, 1].
///
/// With breakpoints b_0 < ... < b_{k-1} = 1 and values v_0..v_{k-1},
/// phi(r) = v_i for the first i with r <= b_i, and phi(r) = 0 for r > 1.
class InteractionFunction {
 public:
  InteractionFunction() : InteractionFunction({1.0}, {1.0}) {}

  InteractionFunction(std::vector<double> breakpoints, std::vector<double> values)
      : breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
    if (breakpoints_.empty() || breakpoints_.size() != values_.size()) {
      throw std::invalid_argument(
          "interaction function needs as many values as breakpoints");
    }
    for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
      if (!(breakpoints_[i] > (i == 0 ? 0.0 : breakpoints_[i - 1]))) {
        throw std::invalid_argument("interaction breakpoints must increase from 0");
      }
      if (!(values_[i] > 0.0) || !std::isfinite(values_[i])) {
        throw std::invalid_argument("interaction values must be finite and positive");
      }
    }
    if (breakpoints_.back() != 1.0) {
      throw std::invalid_argument("last interaction breakpoint must be 1");
    }
    min_ = *std::min_element(values_.begin(), values_.end());
    max_ = *std::max_element(values_.begin(), values_.end());
  }

  /// The indicator of [0, 1].
  static InteractionFunction indicator() { return {}; }

  double operator()(double r) const noexcept {
    if (r > 1.0) return 0.0;
    for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
      if (r <= breakpoints_[i]) return values_[i];
    }
    return values_.back();
  }

  /// Weight from a squared distance. The support is exact (r <= 1): padding
  /// it would let agents a hair beyond distance 1 attract each other, which
  /// the graph predicates below may allow but the dynamics must not.
  double weight_sq(double r2) const noexcept {
    return r2 <= 1.0 ? (*this)(std::sqrt(r2)) : 0.0;
  }

  /// Edge predicate for graphs and guards, padded by eps.
  static bool in_support(double r2, double eps) noexcept {
    return r2 <= (1.0 + eps) * (1.0 + eps);
  }

  double m() const noexcept { return min_; }
  double M() const noexcept { return max_; }
  bool is_constant() const noexcept { return min_ == max_; }

  const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
  const std::vector<double>& values() const noexcept { return values_; }

  friend bool operator==(const InteractionFunction& a, const InteractionFunction& b) {
    return a.breakpoints_ == b.breakpoints_ && a.values_ == b.values_;
  }

 private:
  std::vector<double> breakpoints_;
  std::vector<double> values_;
  double min_ = 1.0;
  double max_ = 1.0;
};

/// Row-stochastic influence matrix a_ij.
class WeightMatrix {
 public:
  explicit WeightMatrix(Positions a) : a_(std::move(a)) {}

  std::size_t size() const noexcept { return static_cast<std::size_t>(a_.rows()); }
  double operator()(std::size_t i, std::size_t j) const {
    return a_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  const Positions& matrix() const noexcept { return a_; }

 private:
  Positions a_;
};

/// a_ij = phi(|x_j - x_i|) / sum_k phi(|x_k - x_i|).
inline WeightMatrix interaction_weights(const AgentConfiguration& config,
                                        const InteractionFunction& phi) {
  const std::size_t n = config.n_agents();
  Positions a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double w = phi.weight_sq(config.squared_distance(i, j));
      a(i, j) = w;
      total += w;
    }
    a.row(i) /= total;  // total >= phi(0) >= m > 0
  }
  return WeightMatrix(std::move(a));
}

/// xbar_i = sum_j a_ij x_j.
inline Positions local_average(const AgentConfiguration& config, const WeightMatrix& w) {
  if (w.size() != config.n_agents()) {
    throw std::invalid_argument("weight matrix does not match configuration");
  }
  return w.matrix() * config.positions();
}

/// Same quantity as local_average(config, interaction_weights(config, phi)),
/// computed without materializing the N x N matrix.
inline Positions local_averages(const AgentConfiguration& config,
                                const InteractionFunction& phi) {
  const std::size_t n = config.n_agents();
  const std::size_t d = config.dim();
  const double* x = config.positions().data();
  Positions avg = Positions::Zero(n, d);
  double* out = avg.data();
  const bool indicator = phi.is_constant();
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    double* oi = out + i * d;
    for (std::size_t j = 0; j < n; ++j) {
      const double r2 = config.squared_distance(i, j);
      if (r2 > 1.0) continue;
      const double w = indicator ? 1.0 : phi.weight_sq(r2);
      total += w;
      const double* xj = x + j * d;
      for (std::size_t k = 0; k < d; ++k) oi[k] += w * xj[k];
    }
    for (std::size_t k = 0; k < d; ++k) oi[k] /= total;
  }
  return avg;
}

/// Agents j != i with 1 - r* <= |x_j - x_i| <= 1 (eps slack on both sides)
/// and <xbar_i - x_i, x_j - x_i> <= 0. When xbar_i == x_i the inner-product
/// condition holds for every agent in the annulus.
inline std::vector<std::size_t> critical_region_members(
    std::size_t i, const AgentConfiguration& config, const Positions& averages,
    double r_star, double eps = kDefaultGeometryEps) {
  const std::size_t n = config.n_agents();
  const std::size_t d = config.dim();
  const double* x = config.positions().data();
  const double* xi = x + i * d;
  const double* ai = averages.data() + i * d;
  const double lo = std::max(0.0, 1.0 - r_star - eps);
  const double hi = 1.0 + eps;
  std::vector<std::size_t> members;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) continue;
    const double r2 = config.squared_distance(i, j);
    if (r2 > hi * hi || r2 < lo * lo) continue;
    const double* xj = x + j * d;
    double dot = 0.0;
    for (std::size_t k = 0; k < d; ++k) dot += (ai[k] - xi[k]) * (xj[k] - xi[k]);
    if (dot <= 0.0) members.push_back(j);
  }
  return members;
}

}  // namespace nolb
