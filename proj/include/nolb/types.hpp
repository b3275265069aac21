#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace nolb {

using Vector = Eigen::VectorXd;
using Positions =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kDefaultGeometryEps = 1e-9;
inline constexpr double kDefaultProjectionTol = 1e-10;

/// Raised when an iterative kernel misses its tolerance or a state turns
/// non-finite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ProjectionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// N opinion vectors in R^d, one per row.
class AgentConfiguration {
 public:
  AgentConfiguration() = default;

  explicit AgentConfiguration(Positions positions) : x_(std::move(positions)) {
    if (x_.rows() < 1 || x_.cols() < 1) {
      throw std::invalid_argument("configuration needs N >= 1 and d >= 1");
    }
    if (!all_finite()) {
      throw std::invalid_argument("configuration has non-finite coordinates");
    }
  }

  /// Rows of `coords` are agents; all rows must share one length.
  static AgentConfiguration from_rows(
      const std::vector<std::vector<double>>& coords) {
    if (coords.empty() || coords.front().empty()) {
      throw std::invalid_argument("configuration needs N >= 1 and d >= 1");
    }
    Positions p(coords.size(), coords.front().size());
    for (std::size_t i = 0; i < coords.size(); ++i) {
      if (coords[i].size() != coords.front().size()) {
        throw std::invalid_argument("ragged configuration rows");
      }
      for (std::size_t k = 0; k < coords[i].size(); ++k) p(i, k) = coords[i][k];
    }
    return AgentConfiguration(std::move(p));
  }

  static AgentConfiguration line(const std::vector<double>& xs) {
    Positions p(xs.size(), 1);
    for (std::size_t i = 0; i < xs.size(); ++i) p(i, 0) = xs[i];
    return AgentConfiguration(std::move(p));
  }

  std::size_t n_agents() const noexcept { return static_cast<std::size_t>(x_.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(x_.cols()); }

  const Positions& positions() const noexcept { return x_; }
  Positions& positions() noexcept { return x_; }

  auto row(std::size_t i) const { return x_.row(static_cast<Eigen::Index>(i)); }
  double operator()(std::size_t i, std::size_t k) const {
    return x_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
  }

  double distance(std::size_t i, std::size_t j) const {
    return std::sqrt(squared_distance(i, j));
  }

  double squared_distance(std::size_t i, std::size_t j) const {
    const double* a = x_.data() + i * dim();
    const double* b = x_.data() + j * dim();
    double s = 0.0;
    for (std::size_t k = 0; k < dim(); ++k) {
      const double t = a[k] - b[k];
      s += t * t;
    }
    return s;
  }

  bool all_finite() const { return x_.allFinite(); }

  friend bool operator==(const AgentConfiguration& a,
                         const AgentConfiguration& b) {
    return a.x_.rows() == b.x_.rows() && a.x_.cols() == b.x_.cols() &&
           a.x_ == b.x_;
  }

 private:
  Positions x_;
};

}  // namespace nolb
