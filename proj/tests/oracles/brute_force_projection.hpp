#pragma once

// Exhaustive active-set oracle for cone projection. Test-only; shares no code
// with nolb/geometry.hpp beyond the Eigen types.

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

namespace nolb::oracle {

struct BruteForceResult {
  Eigen::VectorXd projected;
  std::vector<double> multipliers;
};

/// For every subset S of the constraints solve
///   min |y - v|^2  s.t. <y, u_i> = 0 for i in S
/// through the Gram system G lam = -U_S^T v, y = v + U_S lam; keep candidates
/// with lam >= -tol and <y, u_j> >= -tol for all j; return the closest one.
inline std::optional<BruteForceResult> project_brute_force(
    const Eigen::VectorXd& v, const std::vector<Eigen::VectorXd>& constraints,
    double tol = 1e-11) {
  const std::size_t k = constraints.size();
  std::optional<BruteForceResult> best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t mask = 0; mask < (std::size_t{1} << k); ++mask) {
    std::vector<std::size_t> s;
    for (std::size_t i = 0; i < k; ++i)
      if (mask & (std::size_t{1} << i)) s.push_back(i);
    Eigen::MatrixXd us(v.size(), static_cast<Eigen::Index>(s.size()));
    for (std::size_t c = 0; c < s.size(); ++c) us.col(static_cast<Eigen::Index>(c)) = constraints[s[c]];
    Eigen::VectorXd lam = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.size()));
    if (!s.empty()) {
      const Eigen::MatrixXd gram = us.transpose() * us;
      Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
      lu.setThreshold(1e-12);
      if (!lu.isInvertible()) continue;
      lam = lu.solve(-(us.transpose() * v));
    }
    if (s.size() > 0 && lam.minCoeff() < -tol) continue;
    const Eigen::VectorXd y = v + us * lam;
    bool feasible = true;
    for (const auto& u : constraints)
      if (y.dot(u) < -tol * (1.0 + u.norm())) feasible = false;
    if (!feasible) continue;
    const double dist = (y - v).norm();
    if (dist < best_dist) {
      best_dist = dist;
      BruteForceResult r{y, std::vector<double>(k, 0.0)};
      for (std::size_t c = 0; c < s.size(); ++c) r.multipliers[s[c]] = lam(static_cast<Eigen::Index>(c));
      best = std::move(r);
    }
  }
  return best;
}

}  // namespace nolb::oracle
