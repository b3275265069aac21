#pragma once

#include "nolb/dynamics.hpp"
#include "nolb/graphs.hpp"
#include "nolb/metrics.hpp"
#include "nolb/rng.hpp"
#include "nolb/types.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace nolb {

enum class InitialKind { explicit_positions, uniform, counterexample_r1, hexagon };

inline std::string_view to_string(InitialKind k) {
  switch (k) {
    case InitialKind::explicit_positions: return "explicit";
    case InitialKind::uniform: return "uniform";
    case InitialKind::counterexample_r1: return "counterexample-r1";
    case InitialKind::hexagon: return "hexagon";
  }
  return "?";
}

inline std::optional<InitialKind> parse_initial_kind(std::string_view s) {
  if (s == "explicit") return InitialKind::explicit_positions;
  if (s == "uniform") return InitialKind::uniform;
  if (s == "counterexample-r1") return InitialKind::counterexample_r1;
  if (s == "hexagon") return InitialKind::hexagon;
  return std::nullopt;
}

/// How the initial configuration is produced. Only the fields relevant to
/// `kind` are read; uniform draws are keyed by the scenario seed.
struct InitialRecipe {
  InitialKind kind = InitialKind::uniform;
  std::optional<AgentConfiguration> positions;  // explicit_positions only
  std::size_t n = 50;
  std::size_t dim = 1;
  double domain_length = 10.0;
  bool require_connected = true;

  friend bool operator==(const InitialRecipe&, const InitialRecipe&) = default;
};

struct ScenarioSpec {
  std::string name = "scenario";
  InitialRecipe initial;
  ModelParams params;
  std::size_t record_every = 10;

  friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

inline constexpr std::size_t kMaxConnectAttempts = 1000;
inline constexpr double kHexagonJitter = 1e-9;
inline constexpr std::array<std::size_t, 6> kHexagonMultiplicities{1, 10, 100, 100, 10, 1};

/// i.i.d. uniform positions on [0, L]^d. Attempt a draws from substream
/// ("initial", a) of `seed`; with require_connected the first connected
/// draw is returned.
inline AgentConfiguration uniform_configuration(std::size_t n, double length, std::size_t dim,
                                                std::uint64_t seed, bool require_connected) {
  if (n < 1 || dim < 1) throw std::invalid_argument("uniform scenario needs n >= 1 and dim >= 1");
  if (!(length > 0.0) || !std::isfinite(length))
    throw std::invalid_argument("domain_length must be > 0");
  for (std::size_t attempt = 0; attempt < kMaxConnectAttempts; ++attempt) {
    CounterRng rng(seed, "initial", attempt);
    Positions p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      for (Eigen::Index k = 0; k < p.cols(); ++k) p(i, k) = length * rng.uniform();
    AgentConfiguration c(std::move(p));
    if (!require_connected || is_connected(interaction_graph(c))) return c;
  }
  std::ostringstream msg;
  msg << "no connected configuration after " << kMaxConnectAttempts << " draws (n = " << n
      << ", L = " << length << ", d = " << dim << ", seed = " << seed
      << "); lower domain_length or raise n";
  throw std::runtime_error(msg.str());
}

/// Six clusters on a regular hexagon of side 1 - r*/2, sizes 1, 10, 100, 100,
/// 10, 1 in vertex order. Clones get a deterministic offset of at most 1e-9.
inline AgentConfiguration hexagon_configuration(double r_star) {
  if (!(r_star > 0.0 && r_star < 1.0)) throw std::invalid_argument("hexagon needs 0 < rstar < 1");
  const double side = 1.0 - r_star / 2.0;
  std::size_t n = 0;
  for (std::size_t m : kHexagonMultiplicities) n += m;
  Positions p(static_cast<Eigen::Index>(n), 2);
  CounterRng jitter(0, "hexagon-jitter");
  Eigen::Index row = 0;
  for (std::size_t v = 0; v < 6; ++v) {
    const double angle = std::numbers::pi / 3.0 * static_cast<double>(v);
    const double cx = side * std::cos(angle);
    const double cy = side * std::sin(angle);
    for (std::size_t c = 0; c < kHexagonMultiplicities[v]; ++c, ++row) {
      if (c == 0) {
        p(row, 0) = cx;
        p(row, 1) = cy;
        continue;
      }
      const double theta = 2.0 * std::numbers::pi * jitter.uniform();
      const double rad = kHexagonJitter * jitter.uniform();
      p(row, 0) = cx + rad * std::cos(theta);
      p(row, 1) = cy + rad * std::sin(theta);
    }
  }
  return AgentConfiguration(std::move(p));
}

inline ScenarioSpec scenario_counterexample_rstar1() {
  ScenarioSpec s;
  s.name = "counterexample-r1";
  s.initial.kind = InitialKind::counterexample_r1;
  s.initial.n = 4;
  s.initial.dim = 1;
  s.params.model = Model::nolb;
  s.params.r_star = 1.0;
  s.params.t_end = 50.0;
  return s;
}

inline ScenarioSpec scenario_hexagon(double r_star = 0.05) {
  ScenarioSpec s;
  s.name = "hexagon";
  s.initial.kind = InitialKind::hexagon;
  s.initial.n = 222;
  s.initial.dim = 2;
  s.params.model = Model::nolb;
  s.params.r_star = r_star;
  s.params.t_end = 500.0;
  return s;
}

inline ScenarioSpec scenario_uniform(std::size_t n, double length, std::size_t dim,
                                     std::uint64_t seed, bool require_connected) {
  ScenarioSpec s;
  s.name = "uniform";
  s.initial.kind = InitialKind::uniform;
  s.initial.n = n;
  s.initial.dim = dim;
  s.initial.domain_length = length;
  s.initial.require_connected = require_connected;
  s.params.seed = seed;
  return s;
}

/// Builds the initial configuration of `spec`.
inline AgentConfiguration materialize(const ScenarioSpec& spec) {
  const InitialRecipe& r = spec.initial;
  switch (r.kind) {
    case InitialKind::explicit_positions:
      if (!r.positions) throw std::invalid_argument("explicit scenario has no positions");
      return *r.positions;
    case InitialKind::uniform:
      return uniform_configuration(r.n, r.domain_length, r.dim, spec.params.seed,
                                   r.require_connected);
    case InitialKind::counterexample_r1:
      return AgentConfiguration::line({1.0, 2.0, 3.0, 4.0});
    case InitialKind::hexagon:
      return hexagon_configuration(spec.params.r_star);
  }
  throw std::invalid_argument("unknown initial recipe");
}

inline RecordOptions record_options(const ScenarioSpec& spec, bool snapshots = true,
                                    bool graphs = false) {
  RecordOptions rec;
  rec.every = spec.record_every;
  rec.snapshots = snapshots;
  rec.graphs = graphs;
  rec.domain_length = spec.initial.domain_length;
  return rec;
}

inline Trajectory run_scenario(const ScenarioSpec& spec, bool snapshots = true,
                               bool graphs = false) {
  return simulate(materialize(spec), spec.params, record_options(spec, snapshots, graphs));
}

// ---------------------------------------------------------------- Monte Carlo

/// Type-7 (linear interpolation) sample quantile of sorted data.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0 || sorted[lo] == sorted[hi]) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, p);
}

/// Median with +inf for runs that never reached the threshold.
inline double median_tau(const std::vector<std::optional<double>>& taus) {
  std::vector<double> v;
  for (const auto& t : taus) v.push_back(t.value_or(std::numeric_limits<double>::infinity()));
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  if (std::isinf(v[v.size() / 2]) || std::isinf(v[(v.size() - 1) / 2]))
    return std::numeric_limits<double>::infinity();
  return quantile_sorted(v, 0.5);
}

struct MonteCarloSpec {
  std::size_t realizations = 100;
  ScenarioSpec scenario = scenario_uniform(50, 10.0, 1, 0, true);
  std::vector<double> quantiles{0.0, 0.05, 0.5, 0.95, 1.0};
  bool require_connected_start = true;
  std::size_t jobs = 1;

  void validate() const {
    if (realizations < 1) throw std::invalid_argument("realizations must be >= 1");
    if (quantiles.empty()) throw std::invalid_argument("quantiles must not be empty");
    for (double q : quantiles)
      if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantiles must lie in [0, 1]");
    if (!std::is_sorted(quantiles.begin(), quantiles.end()))
      throw std::invalid_argument("quantiles must be sorted");
    if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
    if (scenario.initial.kind == InitialKind::explicit_positions && !scenario.initial.positions)
      throw std::invalid_argument("explicit scenario has no positions");
    scenario.params.validate();
  }
};

struct RealizationResult {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::optional<double> tau;
  MetricsSeries metrics;
  SimulationStats stats;
  double final_diameter = 0.0;
};

struct MonteCarloResult {
  std::vector<double> times;
  std::vector<double> quantile_levels;
  /// quantile_values[q][t]: level q of the diameter at times[t].
  std::vector<std::vector<double>> quantile_values;
  std::vector<RealizationResult> runs;

  std::vector<std::optional<double>> taus() const {
    std::vector<std::optional<double>> out;
    for (const auto& r : runs) out.push_back(r.tau);
    return out;
  }
};

/// Seed of realization r under a root seed.
inline std::uint64_t realization_seed(std::uint64_t root, std::size_t r) {
  return rng::derive_seed(root, "realization", r);
}

/// Runs `count` independent tasks on up to `jobs` threads; results are
/// addressed by index so completion order does not matter. The first
/// exception (lowest index) is rethrown after all workers join.
template <class F>
void parallel_for(std::size_t count, std::size_t jobs, F&& task) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  std::vector<std::exception_ptr> errors(count);
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < jobs; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            task(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline RealizationResult run_realization(const MonteCarloSpec& spec, std::size_t r) {
  ScenarioSpec s = spec.scenario;
  s.params.seed = realization_seed(spec.scenario.params.seed, r);
  s.initial.require_connected = spec.require_connected_start;
  RealizationResult out;
  out.index = r;
  out.seed = s.params.seed;
  try {
    Trajectory traj = run_scenario(s, /*snapshots=*/false);
    out.tau = stopping_time(traj.metrics);
    out.final_diameter = traj.metrics.diameter.back();
    out.metrics = std::move(traj.metrics);
    out.stats = traj.stats;
  } catch (const std::exception& e) {
    std::ostringstream msg;
    msg << "realization " << r << " (seed " << out.seed << ") failed: " << e.what();
    throw NumericalError(msg.str());
  }
  return out;
}

/// Quantiles of the diameter across runs on the shared recording grid. Runs
/// that stopped early only contribute up to their last record, so the table
/// is cut at the shortest series.
inline void fill_quantiles(MonteCarloResult& res) {
  std::size_t len = std::numeric_limits<std::size_t>::max();
  for (const auto& r : res.runs) len = std::min(len, r.metrics.size());
  res.times.assign(res.runs.front().metrics.times.begin(),
                   res.runs.front().metrics.times.begin() + static_cast<std::ptrdiff_t>(len));
  res.quantile_values.assign(res.quantile_levels.size(), std::vector<double>(len));
  std::vector<double> column(res.runs.size());
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t r = 0; r < res.runs.size(); ++r) column[r] = res.runs[r].metrics.diameter[t];
    std::sort(column.begin(), column.end());
    for (std::size_t q = 0; q < res.quantile_levels.size(); ++q)
      res.quantile_values[q][t] = quantile_sorted(column, res.quantile_levels[q]);
  }
}

inline MonteCarloResult run_monte_carlo(const MonteCarloSpec& spec) {
  spec.validate();
  MonteCarloResult res;
  res.quantile_levels = spec.quantiles;
  res.runs.resize(spec.realizations);
  parallel_for(spec.realizations, spec.jobs,
               [&](std::size_t r) { res.runs[r] = run_realization(spec, r); });
  fill_quantiles(res);
  return res;
}

struct SweepRow {
  double r_star = 0.0;
  std::size_t realizations = 0;
  std::size_t finite = 0;
  double tau_mean = 0.0;  // +inf if any run never reached diameter 1
  double tau_median = 0.0;
  std::vector<double> tau_quantiles;  // at base.quantiles
  std::vector<std::optional<double>> taus;  // per realization
};

/// One Monte Carlo per r*; realization seeds are shared across r* values.
inline std::vector<SweepRow> sweep_rstar(const MonteCarloSpec& base,
                                         const std::vector<double>& r_values) {
  std::vector<SweepRow> rows;
  for (double r : r_values) {
    if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("sweep rstar values must lie in (0, 1)");
    MonteCarloSpec spec = base;
    spec.scenario.params.r_star = r;
    const MonteCarloResult res = run_monte_carlo(spec);
    SweepRow row;
    row.r_star = r;
    row.realizations = res.runs.size();
    std::vector<double> taus;
    double sum = 0.0;
    for (const auto& run : res.runs) {
      const double t = run.tau.value_or(std::numeric_limits<double>::infinity());
      taus.push_back(t);
      sum += t;
      if (run.tau) ++row.finite;
    }
    row.tau_mean = sum / static_cast<double>(taus.size());
    row.taus = res.taus();
    row.tau_median = median_tau(row.taus);
    std::sort(taus.begin(), taus.end());
    for (double q : base.quantiles) row.tau_quantiles.push_back(quantile_sorted(taus, q));
    rows.push_back(std::move(row));
  }
  return rows;
}

struct InterpolationComparison {
  AgentConfiguration initial;
  Trajectory bounded_confidence;
  Trajectory nolb;
  Trajectory rnolb;
};

/// Feeds one connected uniform start to BC, NOLB and RNOLB.
inline InterpolationComparison run_interpolation_comparison(std::uint64_t seed, std::size_t n,
                                                            double length,
                                                            const ModelParams& base = {},
                                                            std::size_t record_every = 10) {
  ScenarioSpec s = scenario_uniform(n, length, 1, seed, true);
  s.params = base;
  s.params.seed = seed;
  s.record_every = record_every;
  const AgentConfiguration x0 = materialize(s);
  const RecordOptions rec = record_options(s, /*snapshots=*/false);
  auto run = [&](Model m) {
    ModelParams p = s.params;
    p.model = m;
    return simulate(x0, p, rec);
  };
  return {x0, run(Model::bounded_confidence), run(Model::nolb), run(Model::rnolb)};
}

}  // namespace nolb
