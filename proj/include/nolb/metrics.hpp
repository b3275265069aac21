#pragma once

#include "nolb/graphs.hpp"
#include "nolb/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

namespace nolb {

struct MetricsSeries {
  std::vector<double> times;
  std::vector<double> diameter;
  std::vector<double> variance;
  std::vector<double> clustering_number;                 // self excluded
  std::vector<double> clustering_number_self_inclusive;  // = above + 1
  std::vector<bool> connected;

  std::size_t size() const noexcept { return times.size(); }
};

/// Largest pairwise distance; 0 for a single agent.
inline double diameter(const AgentConfiguration& config) {
  double best = 0.0;
  const std::size_t n = config.n_agents();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      best = std::max(best, config.squared_distance(i, j));
  return std::sqrt(best);
}

/// Mean squared distance to the centroid.
inline double variance(const AgentConfiguration& config) {
  const Positions& x = config.positions();
  const Eigen::RowVectorXd centroid = x.colwise().mean();
  return (x.rowwise() - centroid).rowwise().squaredNorm().mean();
}

/// Mean, over agents, of the number of *other* agents within R = L / N
/// (eps slack). Ranges over [0, N - 1]; add 1 for the self-inclusive count.
inline double clustering_number(const AgentConfiguration& config, double domain_length,
                                double eps = kDefaultGeometryEps) {
  if (!(domain_length > 0.0)) throw std::invalid_argument("domain length must be > 0");
  const std::size_t n = config.n_agents();
  const double radius = domain_length / static_cast<double>(n) + eps;
  const double r2 = radius * radius;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (config.squared_distance(i, j) <= r2) ++pairs;
  return 2.0 * static_cast<double>(pairs) / static_cast<double>(n);
}

inline bool consensus_reached(const AgentConfiguration& config, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("consensus tolerance must be > 0");
  return diameter(config) <= tol;
}

/// First recorded time with diameter <= 1.
inline std::optional<double> stopping_time(const MetricsSeries& series) {
  for (std::size_t k = 0; k < series.size(); ++k)
    if (series.diameter[k] <= 1.0) return series.times[k];
  return std::nullopt;
}

inline void append_metrics(MetricsSeries& series, double t, const AgentConfiguration& config,
                           double domain_length, double eps = kDefaultGeometryEps) {
  if (!series.times.empty() && !(t > series.times.back())) {
    throw std::invalid_argument("metric times must be strictly increasing");
  }
  const double c = clustering_number(config, domain_length, eps);
  series.times.push_back(t);
  series.diameter.push_back(diameter(config));
  series.variance.push_back(variance(config));
  series.clustering_number.push_back(c);
  series.clustering_number_self_inclusive.push_back(c + 1.0);
  series.connected.push_back(is_connected(interaction_graph(config, eps)));
}

/// Time-average of a recorded quantity over [t0, t1] (trapezoid rule on the
/// recorded grid).
inline double time_average(const std::vector<double>& times, const std::vector<double>& values,
                           double t0, double t1) {
  double area = 0.0;
  double span = 0.0;
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double a = std::max(times[k - 1], t0);
    const double b = std::min(times[k], t1);
    if (b <= a) continue;
    const double h = times[k] - times[k - 1];
    const double va = values[k - 1] + (values[k] - values[k - 1]) * (a - times[k - 1]) / h;
    const double vb = values[k - 1] + (values[k] - values[k - 1]) * (b - times[k - 1]) / h;
    area += 0.5 * (va + vb) * (b - a);
    span += b - a;
  }
  if (span == 0.0) throw std::invalid_argument("empty averaging window");
  return area / span;
}

}  // namespace nolb
