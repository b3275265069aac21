// nolb: command-line front end for simulations and Monte Carlo experiments.
//
// Exit codes: 0 success, 1 I/O or other runtime failure, 2 invalid flags or
// scenario file, 3 numerical failure (non-finite state, projection failure).

#include "nolb/harness.hpp"
#include "nolb/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace nolb;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

// An invalid combination that CLI11 validators cannot express.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flags shared by every subcommand that builds a ScenarioSpec. Options left
/// unset keep the value from the preset or scenario file.
struct ScenarioFlags {
  std::optional<std::string> config;
  std::optional<std::string> scenario;
  std::optional<std::string> model;
  std::optional<double> r_star;
  std::optional<double> dt;
  std::optional<double> t_end;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n;
  std::optional<std::size_t> dim;
  std::optional<double> domain_length;
  std::optional<std::size_t> record_every;
  std::optional<std::string> integrator;
  std::optional<double> stop_diameter;
  std::optional<double> projection_tol;
  std::optional<double> geometry_eps;
  std::optional<std::vector<double>> phi_breakpoints;
  std::optional<std::vector<double>> phi_values;
  bool allow_disconnected = false;

  void attach(CLI::App& app) {
    auto* cfg = app.add_option("--config", config, "Scenario file (key = value lines)")
                    ->check(CLI::ExistingFile);
    app.add_option("--scenario", scenario, "Preset initial condition")
        ->check(CLI::IsMember({"uniform", "counterexample-r1", "hexagon"}))
        ->excludes(cfg);
    app.add_option("--model", model, "Dynamics")
        ->check(CLI::IsMember({"bc", "nolb-freeze", "nolb", "rnolb"}));
    app.add_option("--rstar", r_star, "Critical band width r*")->check(CLI::Range(0.0, 1.0));
    app.add_option("--dt", dt, "Time step")
        ->check(CLI::Range(0.0, 0.1) & !CLI::IsMember(std::vector<double>{0.0}));
    app.add_option("--t-end", t_end, "Final time")->check(CLI::NonNegativeNumber);
    app.add_option("--seed", seed, "Root seed");
    app.add_option("--n", n, "Number of agents (uniform scenario)")->check(CLI::PositiveNumber);
    app.add_option("--dim", dim, "Opinion dimension (uniform scenario)")->check(CLI::PositiveNumber);
    app.add_option("--domain-length", domain_length, "Uniform domain [0, L]^d and clustering L")
        ->check(CLI::PositiveNumber);
    app.add_option("--record-every", record_every, "Record metrics every k steps")
        ->check(CLI::PositiveNumber);
    app.add_option("--integrator", integrator, "Time integrator")
        ->check(CLI::IsMember({"ssprk2", "euler"}));
    app.add_option("--stop-diameter", stop_diameter, "Stop once the diameter is at most this")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--projection-tol", projection_tol, "Cone projection KKT tolerance")
        ->check(CLI::PositiveNumber);
    app.add_option("--geometry-eps", geometry_eps, "Slack for distance comparisons")
        ->check(CLI::Range(0.0, 1e-3));
    app.add_option("--phi-breakpoints", phi_breakpoints, "Interaction function breakpoints")
        ->delimiter(',');
    app.add_option("--phi-values", phi_values, "Interaction function values")->delimiter(',');
    app.add_flag("--allow-disconnected", allow_disconnected,
                 "Do not resample disconnected uniform starts");
  }

  ScenarioSpec resolve() const {
    ScenarioSpec s;
    if (config) {
      s = io::parse_scenario_file(*config);
    } else if (scenario == "counterexample-r1") {
      s = scenario_counterexample_rstar1();
    } else if (scenario == "hexagon") {
      s = scenario_hexagon(r_star.value_or(0.05));
    } else {
      s = scenario_uniform(50, 10.0, 1, 0, true);
    }
    if (model) s.params.model = *parse_model(*model);
    if (r_star) s.params.r_star = *r_star;
    if (dt) s.params.dt = *dt;
    if (t_end) s.params.t_end = *t_end;
    if (seed) s.params.seed = *seed;
    if (n) s.initial.n = *n;
    if (dim) s.initial.dim = *dim;
    if (domain_length) s.initial.domain_length = *domain_length;
    if (record_every) s.record_every = *record_every;
    if (integrator) s.params.integrator = *parse_integrator(*integrator);
    if (stop_diameter) s.params.stop_diameter = *stop_diameter;
    if (projection_tol) s.params.projection_tol = *projection_tol;
    if (geometry_eps) s.params.geometry_eps = *geometry_eps;
    if (allow_disconnected) s.initial.require_connected = false;
    if (phi_breakpoints || phi_values) {
      try {
        s.params.phi = InteractionFunction(phi_breakpoints.value_or(s.params.phi.breakpoints()),
                                           phi_values.value_or(s.params.phi.values()));
      } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("--phi-breakpoints/--phi-values: ") + e.what());
      }
    }
    if ((n || dim) && s.initial.kind != InitialKind::uniform)
      throw UsageError("--n/--dim only apply to the uniform scenario");
    if (s.initial.kind == InitialKind::hexagon && !(s.params.r_star > 0 && s.params.r_star < 1))
      throw UsageError("--rstar must lie in (0, 1) for the hexagon scenario");
    try {
      s.params.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return s;
  }
};

std::vector<std::string> substreams_for(const ScenarioSpec& s, bool monte_carlo) {
  std::vector<std::string> out;
  if (monte_carlo) out.emplace_back("realization");
  if (s.initial.kind == InitialKind::uniform) out.emplace_back("initial");
  if (s.initial.kind == InitialKind::hexagon) out.emplace_back("hexagon-jitter");
  if (s.params.model == Model::rnolb) out.emplace_back("permutation");
  return out;
}

fs::path prepare_out_dir(const std::string& dir) {
  const fs::path p(dir);
  fs::create_directories(p);
  return p;
}

std::size_t resolve_jobs(std::size_t jobs) {
  if (jobs > 0) return jobs;
  return std::max(1u, std::thread::hardware_concurrency());
}

void write_scenario_copy(const fs::path& dir, const ScenarioSpec& s) {
  std::ofstream out(dir / "scenario.scn", std::ios::binary);
  out << io::write_scenario(s);
  if (!out) throw std::runtime_error("cannot write scenario.scn");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and experiment harness for bounded-confidence opinion dynamics "
               "with connectivity-preserving controls"};
  app.set_version_flag("--version", std::string(io::kToolVersion));
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  std::string out_dir = "out";

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run one scenario and write trajectory/metrics");
  ScenarioFlags sim_flags;
  sim_flags.attach(*sim);
  bool emit_graphs = false;
  bool no_trajectory = false;
  sim->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();
  sim->add_flag("--emit-graphs", emit_graphs, "Also write graphs.csv (edge lists per record)");
  sim->add_flag("--no-trajectory", no_trajectory, "Skip trajectory.csv (metrics only)");

  // montecarlo
  auto* mc = app.add_subcommand("montecarlo", "Independent realizations with diameter quantiles");
  ScenarioFlags mc_flags;
  mc_flags.attach(*mc);
  std::size_t realizations = 0;
  std::vector<double> quantiles{0.0, 0.05, 0.5, 0.95, 1.0};
  std::size_t jobs = 1;
  mc->add_option("--realizations", realizations, "Number of realizations")
      ->required()
      ->check(CLI::PositiveNumber);
  mc->add_option("--quantiles", quantiles, "Quantile levels in [0, 1], sorted")
      ->delimiter(',')
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  mc->add_option("--jobs", jobs, "Worker threads (0 = all cores)")->capture_default_str();
  mc->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();

  // sweep
  auto* sw = app.add_subcommand("sweep", "Stopping time versus r*");
  ScenarioFlags sw_flags;
  sw_flags.attach(*sw);
  std::size_t sw_realizations = 0;
  std::vector<double> r_values{0.05, 0.1, 0.2, 0.4, 0.5, 0.6, 0.8};
  std::size_t sw_jobs = 1;
  sw->add_option("--realizations", sw_realizations, "Realizations per r*")
      ->required()
      ->check(CLI::PositiveNumber);
  sw->add_option("--rstar-values", r_values, "r* values in (0, 1)")
      ->delimiter(',')
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  sw->add_option("--jobs", sw_jobs, "Worker threads (0 = all cores)")->capture_default_str();
  sw->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();

  // compare
  auto* cmp = app.add_subcommand("compare", "BC, NOLB and RNOLB from one shared start");
  std::uint64_t cmp_seed = 0;
  std::size_t cmp_n = 50;
  double cmp_length = 10.0;
  double cmp_t_end = 500.0;
  double cmp_rstar = 0.5;
  double cmp_dt = 0.01;
  std::size_t cmp_every = 10;
  cmp->add_option("--seed", cmp_seed, "Seed of the shared start and RNOLB permutations");
  cmp->add_option("--n", cmp_n, "Number of agents")->check(CLI::PositiveNumber)->capture_default_str();
  cmp->add_option("--domain-length", cmp_length, "Uniform domain [0, L]")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmp->add_option("--t-end", cmp_t_end, "Final time")->check(CLI::NonNegativeNumber)->capture_default_str();
  cmp->add_option("--rstar", cmp_rstar, "Critical band width r*")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  cmp->add_option("--dt", cmp_dt, "Time step")
      ->check(CLI::Range(0.0, 0.1) & !CLI::IsMember(std::vector<double>{0.0}))
      ->capture_default_str();
  cmp->add_option("--record-every", cmp_every, "Record every k steps")->check(CLI::PositiveNumber);
  cmp->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    io::Manifest manifest;
    if (*sim) {
      const ScenarioSpec spec = sim_flags.resolve();
      const fs::path dir = prepare_out_dir(out_dir);
      const Trajectory traj = run_scenario(spec, !no_trajectory, emit_graphs);
      manifest.command = "simulate";
      if (!no_trajectory) {
        io::write_trajectory_csv(dir / "trajectory.csv", traj);
        manifest.outputs.emplace_back("trajectory.csv");
      }
      io::write_metrics_csv(dir / "metrics.csv", traj.metrics);
      manifest.outputs.emplace_back("metrics.csv");
      if (emit_graphs) {
        io::write_graphs_csv(dir / "graphs.csv", traj.graphs);
        manifest.outputs.emplace_back("graphs.csv");
      }
      write_scenario_copy(dir, spec);
      manifest.outputs.emplace_back("scenario.scn");
      manifest.parameters = io::scenario_json(spec);
      manifest.parameters["guard_halvings"] = traj.stats.guard_halvings;
      manifest.parameters["guard_failures"] = traj.stats.guard_failures;
      manifest.root_seed = spec.params.seed;
      manifest.substreams = substreams_for(spec, false);
      io::write_manifest(dir, manifest);
    } else if (*mc) {
      MonteCarloSpec spec;
      spec.scenario = mc_flags.resolve();
      spec.realizations = realizations;
      spec.quantiles = quantiles;
      spec.require_connected_start = spec.scenario.initial.require_connected;
      spec.jobs = resolve_jobs(jobs);
      try {
        spec.validate();
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      const fs::path dir = prepare_out_dir(out_dir);
      const MonteCarloResult res = run_monte_carlo(spec);
      io::write_quantiles_csv(dir / "quantiles.csv", res);
      io::write_tau_csv(dir / "tau.csv", res);
      write_scenario_copy(dir, spec.scenario);
      manifest.command = "montecarlo";
      manifest.outputs = {"quantiles.csv", "tau.csv", "scenario.scn"};
      manifest.parameters = io::scenario_json(spec.scenario);
      manifest.parameters["realizations"] = realizations;
      manifest.parameters["quantiles"] = quantiles;
      manifest.parameters["jobs"] = spec.jobs;
      manifest.root_seed = spec.scenario.params.seed;
      manifest.substreams = substreams_for(spec.scenario, true);
      io::write_manifest(dir, manifest);
    } else if (*sw) {
      MonteCarloSpec spec;
      spec.scenario = sw_flags.resolve();
      spec.realizations = sw_realizations;
      spec.require_connected_start = spec.scenario.initial.require_connected;
      spec.jobs = resolve_jobs(sw_jobs);
      for (double r : r_values)
        if (!(r > 0.0 && r < 1.0)) throw UsageError("--rstar-values must lie in (0, 1)");
      const fs::path dir = prepare_out_dir(out_dir);
      const auto rows = sweep_rstar(spec, r_values);
      io::write_sweep_csv(dir / "sweep.csv", rows, spec.quantiles);
      {
        io::CsvWriter w(dir / "tau_sweep.csv");
        w.header({"rstar", "realization", "seed", "tau"});
        for (const auto& row : rows)
          for (std::size_t r = 0; r < row.taus.size(); ++r)
            w.num(row.r_star)
                .integer(r)
                .integer(realization_seed(spec.scenario.params.seed, r))
                .num(row.taus[r].value_or(std::numeric_limits<double>::infinity()))
                .row();
        w.close();
      }
      write_scenario_copy(dir, spec.scenario);
      manifest.command = "sweep";
      manifest.outputs = {"sweep.csv", "tau_sweep.csv", "scenario.scn"};
      manifest.parameters = io::scenario_json(spec.scenario);
      manifest.parameters["realizations"] = sw_realizations;
      manifest.parameters["rstar_values"] = r_values;
      manifest.root_seed = spec.scenario.params.seed;
      manifest.substreams = substreams_for(spec.scenario, true);
      io::write_manifest(dir, manifest);
    } else if (*cmp) {
      ModelParams p;
      p.r_star = cmp_rstar;
      p.dt = cmp_dt;
      p.t_end = cmp_t_end;
      const fs::path dir = prepare_out_dir(out_dir);
      const auto res = run_interpolation_comparison(cmp_seed, cmp_n, cmp_length, p, cmp_every);
      io::write_metrics_csv(dir / "metrics_bc.csv", res.bounded_confidence.metrics);
      io::write_metrics_csv(dir / "metrics_nolb.csv", res.nolb.metrics);
      io::write_metrics_csv(dir / "metrics_rnolb.csv", res.rnolb.metrics);
      ScenarioSpec shared = scenario_uniform(cmp_n, cmp_length, 1, cmp_seed, true);
      shared.params = p;
      shared.params.seed = cmp_seed;
      shared.record_every = cmp_every;
      manifest.command = "compare";
      manifest.outputs = {"metrics_bc.csv", "metrics_nolb.csv", "metrics_rnolb.csv"};
      manifest.parameters = io::scenario_json(shared);
      manifest.parameters.erase("model");
      manifest.parameters["models"] = {"bc", "nolb", "rnolb"};
      manifest.root_seed = cmp_seed;
      manifest.substreams = {"initial", "permutation"};
      io::write_manifest(dir, manifest);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const io::ScenarioParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
