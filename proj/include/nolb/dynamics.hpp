#pragma once

#include "nolb/geometry.hpp"
#include "nolb/graphs.hpp"
#include "nolb/interaction.hpp"
#include "nolb/metrics.hpp"
#include "nolb/rng.hpp"
#include "nolb/types.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nolb {

enum class Model { bounded_confidence, nolb_freeze, nolb, rnolb };

/// ssprk2 is Heun's method written as the average of the start state and two
/// chained forward-Euler steps, so every property a single Euler step keeps
/// under convex combination (hull containment, diameter decay) carries over.
enum class Integrator { euler, ssprk2 };

inline std::string_view to_string(Model m) {
  switch (m) {
    case Model::bounded_confidence: return "bc";
    case Model::nolb_freeze: return "nolb-freeze";
    case Model::nolb: return "nolb";
    case Model::rnolb: return "rnolb";
  }
  return "?";
}

inline std::optional<Model> parse_model(std::string_view s) {
  if (s == "bc") return Model::bounded_confidence;
  if (s == "nolb-freeze") return Model::nolb_freeze;
  if (s == "nolb") return Model::nolb;
  if (s == "rnolb") return Model::rnolb;
  return std::nullopt;
}

inline std::string_view to_string(Integrator i) {
  return i == Integrator::euler ? "euler" : "ssprk2";
}

inline std::optional<Integrator> parse_integrator(std::string_view s) {
  if (s == "euler") return Integrator::euler;
  if (s == "ssprk2") return Integrator::ssprk2;
  return std::nullopt;
}

struct ModelParams {
  Model model = Model::nolb;
  double r_star = 0.5;
  double dt = 0.01;
  double t_end = 10.0;
  std::uint64_t seed = 0;
  double projection_tol = kDefaultProjectionTol;
  double geometry_eps = kDefaultGeometryEps;
  Integrator integrator = Integrator::ssprk2;
  InteractionFunction phi;
  /// Stop at the first recorded time with diameter <= this (0 disables).
  double stop_diameter = 0.0;

  void validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
    if (!(r_star >= 0.0 && r_star <= 1.0)) fail("rstar must lie in [0, 1]");
    if (!(dt > 0.0 && dt <= 0.1)) fail("dt must lie in (0, 0.1]");
    if (!(t_end >= 0.0) || !std::isfinite(t_end)) fail("t_end must be finite and >= 0");
    if (!(projection_tol > 0.0)) fail("projection_tol must be > 0");
    if (!(geometry_eps >= 0.0) || geometry_eps > 1e-3) fail("geometry_eps must lie in [0, 1e-3]");
    if (!(stop_diameter >= 0.0)) fail("stop_diameter must be >= 0");
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

namespace detail {

// Exact projection onto the 1-D cone {v : v * u >= 0 for all u}.
inline double project_1d(double v, bool has_positive, bool has_negative) {
  if (has_positive && has_negative) return 0.0;
  if (has_positive) return std::max(v, 0.0);
  if (has_negative) return std::min(v, 0.0);
  return v;
}

inline Positions project_rows(const AgentConfiguration& config, const Positions& desired,
                              const DirectedGraph& constraints, double tol,
                              bool closed_form_1d) {
  const std::size_t n = config.n_agents();
  const std::size_t d = config.dim();
  Positions vel = desired;
  ProjectionOptions opts;
  opts.tol = tol;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& behind = constraints.out_neighbors(i);
    if (behind.empty()) continue;
    if (d == 1 && closed_form_1d) {
      bool pos = false;
      bool neg = false;
      for (std::size_t j : behind) {
        const double u = config(j, 0) - config(i, 0);
        pos = pos || u > 0.0;
        neg = neg || u < 0.0;
      }
      vel(i, 0) = project_1d(desired(i, 0), pos, neg);
      continue;
    }
    VelocityCone cone(d);
    for (std::size_t j : behind) {
      Vector u = (config.row(j) - config.row(i)).transpose();
      if (u.squaredNorm() > 0.0) cone.add(std::move(u));  // a zero vector constrains nothing
    }
    const Vector v = desired.row(i).transpose();
    vel.row(i) = project_onto_cone(v, cone, opts).projected.transpose();
  }
  return vel;
}

}  // namespace detail

/// Settings shared by the velocity fields of all four models.
struct FieldSettings {
  InteractionFunction phi;
  double r_star = 0.5;
  double projection_tol = kDefaultProjectionTol;
  double geometry_eps = kDefaultGeometryEps;
  bool closed_form_1d = true;

  static FieldSettings from(const ModelParams& p) {
    return {p.phi, p.r_star, p.projection_tol, p.geometry_eps, true};
  }
};

/// Right-hand side of the selected model. `order` is the owner permutation
/// for the relaxed behind graph and is only read for Model::rnolb.
inline Positions velocity_field(Model model, const AgentConfiguration& config,
                                const FieldSettings& s,
                                std::span<const std::size_t> order = {}) {
  const Positions avg = local_averages(config, s.phi);
  Positions desired = avg - config.positions();
  if (model == Model::bounded_confidence) return desired;

  DirectedGraph behind = behind_graph(config, avg, s.r_star, s.geometry_eps);
  switch (model) {
    case Model::nolb_freeze:
      for (std::size_t i = 0; i < config.n_agents(); ++i)
        if (!behind.out_neighbors(i).empty()) desired.row(static_cast<Eigen::Index>(i)).setZero();
      return desired;
    case Model::nolb:
      return detail::project_rows(config, desired, behind, s.projection_tol, s.closed_form_1d);
    case Model::rnolb: {
      if (order.size() != config.n_agents()) {
        throw std::invalid_argument("rnolb velocity needs an agent permutation");
      }
      const DirectedGraph relaxed =
          relax_behind_graph(interaction_graph(config, s.geometry_eps), behind, order);
      return detail::project_rows(config, desired, relaxed, s.projection_tol, s.closed_form_1d);
    }
    default:
      break;
  }
  return desired;
}

namespace detail {

inline AgentConfiguration euler_step(const AgentConfiguration& config, const Positions& vel,
                                     double dt) {
  return AgentConfiguration(config.positions() + dt * vel);
}

}  // namespace detail

inline AgentConfiguration step_bounded_confidence(const AgentConfiguration& config,
                                                  const InteractionFunction& phi, double dt,
                                                  double eps = kDefaultGeometryEps) {
  FieldSettings s{phi, 0.0, kDefaultProjectionTol, eps, true};
  return detail::euler_step(config, velocity_field(Model::bounded_confidence, config, s), dt);
}

inline AgentConfiguration step_nolb_freeze(const AgentConfiguration& config,
                                           const InteractionFunction& phi, double r_star,
                                           double dt, double eps = kDefaultGeometryEps) {
  FieldSettings s{phi, r_star, kDefaultProjectionTol, eps, true};
  return detail::euler_step(config, velocity_field(Model::nolb_freeze, config, s), dt);
}

inline AgentConfiguration step_nolb(const AgentConfiguration& config,
                                    const InteractionFunction& phi, double r_star, double dt,
                                    double projection_tol = kDefaultProjectionTol,
                                    double eps = kDefaultGeometryEps) {
  FieldSettings s{phi, r_star, projection_tol, eps, true};
  return detail::euler_step(config, velocity_field(Model::nolb, config, s), dt);
}

/// Draws one permutation from `rng` for the relaxed behind graph.
inline AgentConfiguration step_rnolb(const AgentConfiguration& config,
                                     const InteractionFunction& phi, double r_star, double dt,
                                     CounterRng& rng,
                                     double projection_tol = kDefaultProjectionTol,
                                     double eps = kDefaultGeometryEps) {
  FieldSettings s{phi, r_star, projection_tol, eps, true};
  const auto order = rng.permutation(config.n_agents());
  return detail::euler_step(config, velocity_field(Model::rnolb, config, s, order), dt);
}

/// Owner permutation used by RNOLB at step k (k = 1, 2, ...).
inline std::vector<std::size_t> step_permutation(std::uint64_t seed, std::uint64_t step,
                                                 std::size_t n) {
  return CounterRng(seed, "permutation", step).permutation(n);
}

struct RecordOptions {
  std::size_t every = 10;
  bool snapshots = true;
  bool graphs = false;
  /// L in the clustering radius R = L / N.
  double domain_length = 10.0;
};

struct GraphSnapshot {
  double time = 0.0;
  std::vector<Edge> interaction;
  std::vector<Edge> behind;
  std::vector<Edge> relaxed;  // RNOLB only: graph used by the next step
};

struct SimulationStats {
  std::size_t steps = 0;
  std::size_t substeps = 0;
  std::size_t guard_halvings = 0;
  std::size_t guard_failures = 0;
  bool stopped_early = false;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<AgentConfiguration> snapshots;  // empty unless requested
  MetricsSeries metrics;
  std::vector<GraphSnapshot> graphs;
  SimulationStats stats;
  AgentConfiguration final_state;
};

namespace detail {

inline constexpr int kMaxHalvings = 20;
inline constexpr std::size_t kMaxSubsteps = 64;

class ConnectivityGuard {
 public:
  ConnectivityGuard(Model model, double eps) : model_(model), eps_(eps) {}

  bool active() const noexcept { return model_ != Model::bounded_confidence; }

  void arm(const AgentConfiguration& x) {
    pairs_.clear();
    if (model_ == Model::rnolb) {
      components_ = connected_components(interaction_graph(x, eps_));
      return;
    }
    const std::size_t n = x.n_agents();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double r2 = x.squared_distance(i, j);
        if (InteractionFunction::in_support(r2, eps_)) pairs_.push_back({i, j, r2});
      }
  }

  // NOLB-type models keep every interacting pair interacting (or at least not
  // separating further); RNOLB only has to keep the component count.
  bool accepts(const AgentConfiguration& y) const {
    if (model_ == Model::rnolb) {
      return connected_components(interaction_graph(y, eps_)) <= components_;
    }
    for (const auto& p : pairs_) {
      const double r2 = y.squared_distance(p.i, p.j);
      if (!InteractionFunction::in_support(r2, eps_) && r2 > p.r2) return false;
    }
    return true;
  }

 private:
  struct Pair {
    std::size_t i, j;
    double r2;
  };
  Model model_;
  double eps_;
  std::vector<Pair> pairs_;
  std::size_t components_ = 0;
};

inline AgentConfiguration integrate(const AgentConfiguration& x, double h, Model model,
                                    Integrator integrator, const FieldSettings& s,
                                    std::span<const std::size_t> order) {
  AgentConfiguration y = euler_step(x, velocity_field(model, x, s, order), h);
  if (integrator == Integrator::euler) return y;
  const AgentConfiguration z = euler_step(y, velocity_field(model, y, s, order), h);
  return AgentConfiguration(0.5 * (x.positions() + z.positions()));
}

inline void check_finite(const AgentConfiguration& x, double t) {
  if (!x.positions().allFinite()) {
    std::ostringstream msg;
    msg << "non-finite coordinate at t = " << t;
    throw NumericalError(msg.str());
  }
}

}  // namespace detail

/// Integrates `initial` from t = 0 to params.t_end on the grid t_k = k * dt.
///
/// Each step of size dt is split only if the connectivity guard rejects it:
/// the sub-step is halved (up to 20 times) until the guard accepts, then the
/// remainder of the step is attempted again. Records metrics every
/// `rec.every` steps and at the final step.
inline Trajectory simulate(const AgentConfiguration& initial, const ModelParams& params,
                           const RecordOptions& rec = {}) {
  params.validate();
  if (rec.every == 0) throw std::invalid_argument("record_every must be >= 1");
  detail::check_finite(initial, 0.0);

  const FieldSettings settings = FieldSettings::from(params);
  const std::size_t n = initial.n_agents();
  const double dt = params.dt;
  const auto n_steps = static_cast<std::uint64_t>(std::ceil(params.t_end / dt - 1e-9));

  Trajectory traj;
  detail::ConnectivityGuard guard(params.model, params.geometry_eps);
  AgentConfiguration x = initial;

  auto permutation_for = [&](std::uint64_t k) {
    return params.model == Model::rnolb ? step_permutation(params.seed, k, n)
                                        : std::vector<std::size_t>{};
  };

  auto record = [&](std::uint64_t k, const AgentConfiguration& state) {
    const double t = static_cast<double>(k) * dt;
    traj.times.push_back(t);
    if (rec.snapshots) traj.snapshots.push_back(state);
    append_metrics(traj.metrics, t, state, rec.domain_length, params.geometry_eps);
    if (rec.graphs) {
      GraphSnapshot g;
      g.time = t;
      const UndirectedGraph inter = interaction_graph(state, params.geometry_eps);
      const Positions avg = local_averages(state, params.phi);
      const DirectedGraph behind = behind_graph(state, avg, params.r_star, params.geometry_eps);
      g.interaction = inter.edges();
      g.behind = behind.edges();
      if (params.model == Model::rnolb)
        g.relaxed = relax_behind_graph(inter, behind, permutation_for(k + 1)).edges();
      traj.graphs.push_back(std::move(g));
    }
    return params.stop_diameter > 0.0 && traj.metrics.diameter.back() <= params.stop_diameter;
  };

  bool stop = record(0, x);
  for (std::uint64_t k = 1; k <= n_steps && !stop; ++k) {
    const auto order = permutation_for(k);
    double remaining = dt;
    std::size_t substeps = 0;
    while (remaining > 0.0) {
      if (guard.active()) guard.arm(x);
      double h = remaining;
      std::optional<AgentConfiguration> next;
      if (++substeps > detail::kMaxSubsteps) {
        next = detail::integrate(x, h, params.model, params.integrator, settings, order);
        ++traj.stats.guard_failures;
      } else {
        for (int attempt = 0;; ++attempt) {
          AgentConfiguration cand =
              detail::integrate(x, h, params.model, params.integrator, settings, order);
          if (!guard.active() || guard.accepts(cand)) {
            next = std::move(cand);
            break;
          }
          if (attempt == detail::kMaxHalvings) {
            next = std::move(cand);
            ++traj.stats.guard_failures;
            break;
          }
          h *= 0.5;
          ++traj.stats.guard_halvings;
        }
      }
      x = std::move(*next);
      ++traj.stats.substeps;
      remaining = (h == remaining || remaining - h < dt * 1e-12) ? 0.0 : remaining - h;
      detail::check_finite(x, static_cast<double>(k) * dt);
    }
    ++traj.stats.steps;
    if (k % rec.every == 0 || k == n_steps) {
      stop = record(k, x);
      traj.stats.stopped_early = stop && k < n_steps;
    }
  }
  traj.final_state = std::move(x);
  return traj;
}

}  // namespace nolb
