#pragma once

#include "nolb/types.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

namespace nolb {

/// Polyhedral cone {v : <v, u> >= 0 for every constraint u}. An empty
/// constraint list is the whole space.
class VelocityCone {
 public:
  explicit VelocityCone(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw std::invalid_argument("cone dimension must be positive");
  }

  VelocityCone(std::size_t dim, std::vector<Vector> constraints)
      : VelocityCone(dim) {
    for (auto& u : constraints) add(std::move(u));
  }

  void add(Vector u) {
    if (static_cast<std::size_t>(u.size()) != dim_) {
      throw std::invalid_argument("constraint dimension mismatch");
    }
    if (!(u.norm() > 0.0) || !u.allFinite()) {
      throw std::invalid_argument("cone constraints must be finite and non-zero");
    }
    constraints_.push_back(std::move(u));
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return constraints_.size(); }
  bool empty() const noexcept { return constraints_.empty(); }
  const std::vector<Vector>& constraints() const noexcept { return constraints_; }
  const Vector& operator[](std::size_t i) const { return constraints_[i]; }

 private:
  std::size_t dim_;
  std::vector<Vector> constraints_;
};

/// Projection result together with its KKT witness: projected = input +
/// sum_i multipliers[i] * constraint_i.
struct ProjectionCertificate {
  Vector projected;
  std::vector<double> multipliers;
  double feasibility_residual = 0.0;
  double complementarity_residual = 0.0;
};

enum class FallbackSolver { nnls, dykstra };

struct ProjectionOptions {
  double tol = kDefaultProjectionTol;
  /// Constraints whose unit directions differ by less than this (radians)
  /// are merged.
  double dedup_angle = 1e-9;
  /// Distinct directions up to which active sets are enumerated.
  std::size_t max_enumeration = 12;
  FallbackSolver fallback = FallbackSolver::nnls;
  std::size_t max_iterations = 10000;
};

struct KktReport {
  bool pass = false;
  double stationarity = 0.0;
  double feasibility = 0.0;
  double complementarity = 0.0;
  double dual = 0.0;  // max(0, -min multiplier)
};

/// Residuals of a candidate (projected, multipliers) pair against every
/// constraint of `cone`; pass iff all are <= tol.
inline KktReport verify_kkt(const Vector& v, const VelocityCone& cone,
                            const ProjectionCertificate& cert, double tol) {
  KktReport r;
  if (cert.multipliers.size() != cone.size() ||
      cert.projected.size() != v.size()) {
    r.stationarity = std::numeric_limits<double>::infinity();
    return r;
  }
  Vector recon = v;
  for (std::size_t i = 0; i < cone.size(); ++i) {
    recon += cert.multipliers[i] * cone[i];
    const double lam = cert.multipliers[i];
    const double slack = cert.projected.dot(cone[i]);
    r.feasibility = std::max(r.feasibility, -slack);
    r.complementarity = std::max(r.complementarity, std::abs(lam * slack));
    r.dual = std::max(r.dual, -lam);
  }
  r.stationarity = v.size() == 0 ? 0.0 : (cert.projected - recon).lpNorm<Eigen::Infinity>();
  r.pass = r.stationarity <= tol && r.feasibility <= tol &&
           r.complementarity <= tol && r.dual <= tol;
  return r;
}

namespace detail {

// Unit representatives of the cone's directions after merging near-parallel
// constraints. group[i] is the representative index of constraint i.
struct ReducedCone {
  std::vector<Vector> dirs;
  std::vector<std::size_t> group;
  std::vector<double> norms;
};

inline ReducedCone reduce_cone(const VelocityCone& cone, double dedup_angle) {
  ReducedCone rc;
  rc.group.resize(cone.size());
  rc.norms.resize(cone.size());
  for (std::size_t i = 0; i < cone.size(); ++i) {
    rc.norms[i] = cone[i].norm();
    Vector unit = cone[i] / rc.norms[i];
    std::size_t g = rc.dirs.size();
    for (std::size_t r = 0; r < rc.dirs.size(); ++r) {
      if ((rc.dirs[r] - unit).norm() < dedup_angle) {
        g = r;
        break;
      }
    }
    if (g == rc.dirs.size()) rc.dirs.push_back(std::move(unit));
    rc.group[i] = g;
  }
  return rc;
}

struct ReducedSolution {
  Vector y;
  std::vector<double> lambda;  // one per reduced direction
};

inline bool kkt_ok(const ReducedCone& rc, const ReducedSolution& s, double tol) {
  for (std::size_t r = 0; r < rc.dirs.size(); ++r) {
    const double slack = s.y.dot(rc.dirs[r]);
    if (slack < -tol) return false;
    if (s.lambda[r] < -tol) return false;
    if (std::abs(s.lambda[r] * slack) > tol) return false;
  }
  return true;
}

// Advances `idx` to the next k-combination of {0..n-1} in lexicographic
// order. Returns false after the last one.
inline bool next_combination(std::vector<std::size_t>& idx, std::size_t n) {
  const std::size_t k = idx.size();
  std::size_t i = k;
  while (i > 0) {
    --i;
    if (idx[i] < n - k + i) {
      ++idx[i];
      for (std::size_t j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
      return true;
    }
  }
  return false;
}

// The projection is the unique KKT point, and by conic Caratheodory some KKT
// multiplier vector is supported on linearly independent directions, so only
// subsets of size <= d need to be tried. Subsets are visited by increasing
// size and the first KKT-consistent candidate is returned.
inline bool enumerate_active_sets(const Vector& v, const ReducedCone& rc,
                                  double tol, ReducedSolution& out) {
  const std::size_t m = rc.dirs.size();
  const std::size_t d = static_cast<std::size_t>(v.size());
  ReducedSolution cand{v, std::vector<double>(m, 0.0)};
  if (kkt_ok(rc, cand, tol)) {
    out = std::move(cand);
    return true;
  }
  // Single active constraint: closed form.
  for (std::size_t r = 0; r < m; ++r) {
    const double a = v.dot(rc.dirs[r]);
    if (a > 0.0) continue;
    std::fill(cand.lambda.begin(), cand.lambda.end(), 0.0);
    cand.lambda[r] = -a;
    cand.y = v - a * rc.dirs[r];
    if (kkt_ok(rc, cand, tol)) {
      out = std::move(cand);
      return true;
    }
  }
  for (std::size_t s = 2; s <= std::min(m, d); ++s) {
    std::vector<std::size_t> idx(s);
    for (std::size_t j = 0; j < s; ++j) idx[j] = j;
    Eigen::MatrixXd basis(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(s));
    do {
      for (std::size_t j = 0; j < s; ++j) basis.col(static_cast<Eigen::Index>(j)) = rc.dirs[idx[j]];
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis);
      qr.setThreshold(1e-10);
      if (static_cast<std::size_t>(qr.rank()) < s) continue;
      // y = v + basis * lam with basis^T y = 0, i.e. lam = -argmin |v + basis lam|.
      const Vector lam = qr.solve(-v);
      std::fill(cand.lambda.begin(), cand.lambda.end(), 0.0);
      bool nonneg = true;
      for (std::size_t j = 0; j < s; ++j) {
        cand.lambda[idx[j]] = lam(static_cast<Eigen::Index>(j));
        if (lam(static_cast<Eigen::Index>(j)) < -tol) nonneg = false;
      }
      if (!nonneg) continue;
      cand.y = v + basis * lam;
      if (kkt_ok(rc, cand, tol)) {
        out = std::move(cand);
        return true;
      }
    } while (next_combination(idx, m));
  }
  return false;
}

// Lawson-Hanson NNLS on min |v + U lam|, lam >= 0 (U = unit directions as
// columns). Its optimality conditions are exactly the projection's KKT system.
inline bool nnls_projection(const Vector& v, const ReducedCone& rc, double tol,
                            std::size_t max_iterations, ReducedSolution& out) {
  const auto m = static_cast<Eigen::Index>(rc.dirs.size());
  const auto d = v.size();
  Eigen::MatrixXd u(d, m);
  for (Eigen::Index r = 0; r < m; ++r) u.col(r) = rc.dirs[static_cast<std::size_t>(r)];

  Vector lam = Vector::Zero(m);
  std::vector<bool> passive(static_cast<std::size_t>(m), false);
  auto solve_passive = [&](Vector& z) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index r = 0; r < m; ++r)
      if (passive[static_cast<std::size_t>(r)]) cols.push_back(r);
    z = Vector::Zero(m);
    if (cols.empty()) return;
    Eigen::MatrixXd sub(d, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = u.col(cols[j]);
    const Vector zs = sub.colPivHouseholderQr().solve(-v);
    for (std::size_t j = 0; j < cols.size(); ++j) z(cols[j]) = zs(static_cast<Eigen::Index>(j));
  };

  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    const Vector y = v + u * lam;
    const Vector w = -(u.transpose() * y);  // gradient of -1/2|y|^2 in lam
    Eigen::Index best = -1;
    double best_w = tol;
    for (Eigen::Index r = 0; r < m; ++r) {
      if (!passive[static_cast<std::size_t>(r)] && w(r) > best_w) {
        best_w = w(r);
        best = r;
      }
    }
    if (best < 0) {
      out.y = y;
      out.lambda.assign(lam.data(), lam.data() + m);
      return true;
    }
    passive[static_cast<std::size_t>(best)] = true;
    Vector z;
    for (std::size_t inner = 0; inner <= static_cast<std::size_t>(m); ++inner) {
      solve_passive(z);
      bool all_pos = true;
      for (Eigen::Index r = 0; r < m; ++r)
        if (passive[static_cast<std::size_t>(r)] && z(r) <= 0.0) all_pos = false;
      if (all_pos) break;
      double alpha = 1.0;
      for (Eigen::Index r = 0; r < m; ++r) {
        if (passive[static_cast<std::size_t>(r)] && z(r) <= 0.0) {
          alpha = std::min(alpha, lam(r) / (lam(r) - z(r)));
        }
      }
      lam += alpha * (z - lam);
      for (Eigen::Index r = 0; r < m; ++r) {
        if (passive[static_cast<std::size_t>(r)] && lam(r) <= 1e-15) {
          passive[static_cast<std::size_t>(r)] = false;
          lam(r) = 0.0;
        }
      }
    }
    lam = z;
  }
  return false;
}

// Dykstra's alternating projections onto the half-spaces <y, u_r> >= 0.
// The correction attached to half-space r stays a non-positive multiple of
// u_r, which yields the multipliers directly.
inline bool dykstra_projection(const Vector& v, const ReducedCone& rc,
                               double tol, std::size_t max_iterations,
                               ReducedSolution& out) {
  const std::size_t m = rc.dirs.size();
  Vector x = v;
  std::vector<double> lam(m, 0.0);  // correction p_r = -lam[r] * u_r
  for (std::size_t sweep = 0; sweep < max_iterations; ++sweep) {
    for (std::size_t r = 0; r < m; ++r) {
      // z = x + p_r
      const double zdot = x.dot(rc.dirs[r]) - lam[r];
      const double new_lam = std::max(0.0, -zdot);
      x += (new_lam - lam[r]) * rc.dirs[r];
      lam[r] = new_lam;
    }
    ReducedSolution s{x, lam};
    if (kkt_ok(rc, s, tol)) {
      out = std::move(s);
      return true;
    }
  }
  return false;
}

}  // namespace detail

/// Euclidean projection of `v` onto `cone` with its KKT certificate.
///
/// Directions closer than `dedup_angle` are merged first; merged duplicates
/// carry zero multipliers. Up to `max_enumeration` distinct directions the
/// active set is found by enumeration; beyond that (or if enumeration finds
/// nothing within tolerance) the configured fallback solver runs.
/// Throws ProjectionError if the fallback misses `tol`.
inline ProjectionCertificate project_onto_cone(const Vector& v,
                                               const VelocityCone& cone,
                                               const ProjectionOptions& opts) {
  if (!(opts.tol > 0.0)) throw std::invalid_argument("projection tol must be > 0");
  if (static_cast<std::size_t>(v.size()) != cone.dim()) {
    throw std::invalid_argument("projection input dimension mismatch");
  }
  ProjectionCertificate cert;
  cert.multipliers.assign(cone.size(), 0.0);
  if (cone.empty()) {
    cert.projected = v;
    return cert;
  }
  const detail::ReducedCone rc = detail::reduce_cone(cone, opts.dedup_angle);
  detail::ReducedSolution sol;
  bool ok = false;
  if (rc.dirs.size() <= opts.max_enumeration) {
    ok = detail::enumerate_active_sets(v, rc, opts.tol, sol);
  }
  if (!ok) {
    ok = opts.fallback == FallbackSolver::nnls
             ? detail::nnls_projection(v, rc, opts.tol, opts.max_iterations, sol)
             : detail::dykstra_projection(v, rc, opts.tol, opts.max_iterations, sol);
  }
  if (!ok) {
    std::ostringstream msg;
    msg << "cone projection did not reach tol " << opts.tol << " with "
        << rc.dirs.size() << " distinct constraints in dimension " << cone.dim()
        << " after " << opts.max_iterations << " iterations";
    throw ProjectionError(msg.str());
  }
  cert.projected = std::move(sol.y);
  std::vector<bool> assigned(rc.dirs.size(), false);
  for (std::size_t i = 0; i < cone.size(); ++i) {
    const std::size_t g = rc.group[i];
    if (assigned[g]) continue;
    assigned[g] = true;
    cert.multipliers[i] = sol.lambda[g] / rc.norms[i];
  }
  for (std::size_t i = 0; i < cone.size(); ++i) {
    const double slack = cert.projected.dot(cone[i]);
    cert.feasibility_residual = std::max(cert.feasibility_residual, -slack);
    cert.complementarity_residual =
        std::max(cert.complementarity_residual, std::abs(cert.multipliers[i] * slack));
  }
  return cert;
}

inline ProjectionCertificate project_onto_cone(const Vector& v,
                                               const VelocityCone& cone,
                                               double tol = kDefaultProjectionTol) {
  ProjectionOptions opts;
  opts.tol = tol;
  return project_onto_cone(v, cone, opts);
}

using Point2 = std::array<double, 2>;

namespace detail {

inline double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

inline double dist(const Point2& a, const Point2& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

inline double segment_distance(const Point2& a, const Point2& b, const Point2& q) {
  const double dx = b[0] - a[0];
  const double dy = b[1] - a[1];
  const double len2 = dx * dx + dy * dy;
  if (len2 == 0.0) return dist(a, q);
  const double t = std::clamp(((q[0] - a[0]) * dx + (q[1] - a[1]) * dy) / len2, 0.0, 1.0);
  return dist({a[0] + t * dx, a[1] + t * dy}, q);
}

// Andrew's monotone chain; counter-clockwise, collinear points dropped.
inline std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

}  // namespace detail

/// True iff `query` lies in the convex hull of `points` grown by `eps`.
inline bool hull_contains_2d(std::span<const Point2> points, const Point2& query,
                             double eps = kDefaultGeometryEps) {
  if (points.empty()) throw std::invalid_argument("hull of an empty point set");
  const auto hull = detail::convex_hull({points.begin(), points.end()});
  if (hull.size() == 1) return detail::dist(hull[0], query) <= eps;
  if (hull.size() == 2) return detail::segment_distance(hull[0], hull[1], query) <= eps;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Point2& a = hull[i];
    const Point2& b = hull[(i + 1) % hull.size()];
    // Signed distance of the query to the left of edge a->b.
    if (detail::cross(a, b, query) / detail::dist(a, b) < -eps) return false;
  }
  return true;
}

struct BoundingBox {
  Vector lo;
  Vector hi;

  bool contains(const BoundingBox& inner, double eps = 0.0) const {
    return ((inner.lo.array() - lo.array()) >= -eps).all() &&
           ((hi.array() - inner.hi.array()) >= -eps).all();
  }
};

inline BoundingBox bounding_box(const Positions& points) {
  if (points.rows() == 0) throw std::invalid_argument("bounding box of an empty point set");
  return {points.colwise().minCoeff().transpose(), points.colwise().maxCoeff().transpose()};
}

}  // namespace nolb
