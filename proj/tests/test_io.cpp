#include "nolb/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace nolb;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("nolb_test_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void expect_parse_error(const std::string& text, std::size_t line, const std::string& fragment) {
  try {
    io::parse_scenario(text, "f.scn");
    FAIL() << "no error for:\n" << text;
  } catch (const io::ScenarioParseError& e) {
    EXPECT_EQ(e.line(), line) << e.what();
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

}  // namespace

TEST(ScenarioFile, MinimalFileFillsDefaults) {
  const auto s = io::parse_scenario("model = rnolb\nn = 20\nseed = 42\n");
  EXPECT_EQ(s.params.model, Model::rnolb);
  EXPECT_EQ(s.initial.n, 20u);
  EXPECT_EQ(s.params.seed, 42u);
  ScenarioSpec defaults;
  EXPECT_EQ(s.params.r_star, defaults.params.r_star);
  EXPECT_EQ(s.params.dt, defaults.params.dt);
  EXPECT_EQ(s.initial.kind, InitialKind::uniform);
  EXPECT_EQ(s.params.phi, InteractionFunction::indicator());
}

TEST(ScenarioFile, CommentsAndBlankLines) {
  const auto s = io::parse_scenario("# header\n\n  rstar = 0.25   # inline\n\t\ndt=0.005\r\n");
  EXPECT_EQ(s.params.r_star, 0.25);
  EXPECT_EQ(s.params.dt, 0.005);
}

TEST(ScenarioFile, RangeErrorNamesKey) {
  expect_parse_error("model = nolb\nrstar = 1.5\n", 2, "rstar");
  expect_parse_error("dt = 0.5\n", 1, "dt");
  expect_parse_error("geometry_eps = 0.1\n", 1, "geometry_eps");
  expect_parse_error("record_every = 0\n", 1, "record_every");
  expect_parse_error("n = 0\n", 1, "n = 0");
}

TEST(ScenarioFile, DuplicateKeyNamesLine) {
  expect_parse_error("seed = 1\nmodel = bc\nseed = 2\n", 3, "first set on line 1");
}

TEST(ScenarioFile, OtherErrors) {
  expect_parse_error("colour = red\n", 1, "unknown key colour");
  expect_parse_error("rstar 0.5\n", 1, "key = value");
  expect_parse_error("model = hk\n", 1, "model");
  expect_parse_error("rstar = abc\n", 1, "expected a number");
  expect_parse_error("seed = -3\n", 1, "seed");
  expect_parse_error("phi_breakpoints = 0.5, 1\nphi_values = 1\n", 2, "phi");
  expect_parse_error("positions = 0; 1\n", 1, "not explicit");
  expect_parse_error("scenario = explicit\n", 0, "positions");
  expect_parse_error("scenario = explicit\npositions = 0, 1; 2\n", 2, "positions");
  EXPECT_THROW(io::parse_scenario_file("/nonexistent/file.scn"), io::ScenarioParseError);
}

TEST(ScenarioFile, RoundTrip) {
  std::vector<ScenarioSpec> specs{ScenarioSpec{}, scenario_counterexample_rstar1(),
                                  scenario_hexagon(0.1), scenario_uniform(30, 7.5, 2, 99, false)};
  ScenarioSpec custom;
  custom.name = "custom";
  custom.initial.kind = InitialKind::explicit_positions;
  custom.initial.positions = AgentConfiguration::from_rows({{0.1, -2.0 / 3.0}, {1e-17, 5.5}});
  custom.initial.n = 2;
  custom.initial.dim = 2;
  custom.params.phi = InteractionFunction({1.0 / 3.0, 1.0}, {2.5, 0.1});
  custom.params.integrator = Integrator::euler;
  custom.params.seed = 18446744073709551615ULL;
  custom.params.stop_diameter = 1e-3;
  custom.params.dt = 0.003;
  custom.record_every = 7;
  specs.push_back(custom);
  for (const auto& s : specs) {
    const std::string text = io::write_scenario(s);
    EXPECT_EQ(io::parse_scenario(text), s) << text;
  }
}

TEST(ScenarioFile, ParseFromDisk) {
  const auto dir = scratch_dir("parse");
  std::ofstream(dir / "a.scn") << "scenario = counterexample-r1\nrstar = 1\nt_end = 50\n";
  const auto s = io::parse_scenario_file(dir / "a.scn");
  EXPECT_EQ(materialize(s), AgentConfiguration::line({1, 2, 3, 4}));
}

TEST(CsvFormat, SeventeenSignificantDigits) {
  EXPECT_EQ(io::format_csv(0.1), "0.10000000000000001");
  EXPECT_EQ(io::format_csv(0.0), "0");
  EXPECT_EQ(io::format_csv(2.5), "2.5");
  EXPECT_EQ(io::format_csv(1e-20), "9.9999999999999995e-21");
  EXPECT_EQ(io::format_csv(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(std::stod(io::format_csv(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(CsvFormat, QuantileColumns) {
  EXPECT_EQ(io::quantile_column(0.0), "q00");
  EXPECT_EQ(io::quantile_column(0.05), "q05");
  EXPECT_EQ(io::quantile_column(0.5), "q50");
  EXPECT_EQ(io::quantile_column(0.95), "q95");
  EXPECT_EQ(io::quantile_column(1.0), "q100");
  EXPECT_EQ(io::quantile_column(0.975), "q97.5");
}

TEST(CsvOutput, TrajectoryAndMetricsSchemas) {
  const auto dir = scratch_dir("csv");
  ModelParams p;
  p.model = Model::bounded_confidence;
  p.dt = 0.1;
  p.t_end = 0.2;
  RecordOptions rec;
  rec.every = 1;
  rec.graphs = true;
  const auto traj = simulate(AgentConfiguration::from_rows({{0, 0}, {0.5, 0}}), p, rec);
  io::write_trajectory_csv(dir / "trajectory.csv", traj);
  io::write_metrics_csv(dir / "metrics.csv", traj.metrics);
  io::write_graphs_csv(dir / "graphs.csv", traj.graphs);

  const std::string t = slurp(dir / "trajectory.csv");
  EXPECT_EQ(t.substr(0, t.find('\n')), "time,agent,coord_0,coord_1");
  EXPECT_NE(t.find("\n0,1,0.5,0\n"), std::string::npos);
  EXPECT_EQ(std::count(t.begin(), t.end(), '\n'), 1 + 3 * 2);
  EXPECT_EQ(t.find('\r'), std::string::npos);

  const std::string m = slurp(dir / "metrics.csv");
  EXPECT_EQ(m.substr(0, m.find('\n')),
            "time,diameter,variance,clustering_number,clustering_number_self_inclusive,connected");
  EXPECT_NE(m.find("\n0,0.5,0.0625,1,2,1\n"), std::string::npos);

  const std::string g = slurp(dir / "graphs.csv");
  EXPECT_EQ(g.substr(0, g.find('\n')), "time,graph,source,target");
  EXPECT_NE(g.find("0,interaction,0,1"), std::string::npos);
}

TEST(CsvOutput, MonteCarloTables) {
  const auto dir = scratch_dir("mc");
  MonteCarloResult res;
  res.times = {0.0, 0.5};
  res.quantile_levels = {0.0, 0.5, 1.0};
  res.quantile_values = {{3, 2}, {4, 2.5}, {5, 3}};
  RealizationResult a;
  a.index = 0;
  a.seed = 11;
  a.tau = 12.5;
  RealizationResult b;
  b.index = 1;
  b.seed = 12;
  res.runs = {a, b};
  io::write_quantiles_csv(dir / "quantiles.csv", res);
  io::write_tau_csv(dir / "tau.csv", res);
  EXPECT_EQ(slurp(dir / "quantiles.csv"), "time,q00,q50,q100\n0,3,4,5\n0.5,2,2.5,3\n");
  EXPECT_EQ(slurp(dir / "tau.csv"), "realization,seed,tau\n0,11,12.5\n1,12,inf\n");
}

TEST(Manifest, DigestsMatchFiles) {
  const auto dir = scratch_dir("manifest");
  std::ofstream(dir / "abc.txt", std::ios::binary) << "abc";
  EXPECT_EQ(io::sha256_hex(dir / "abc.txt"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  io::Manifest m;
  m.command = "simulate";
  m.parameters = io::scenario_json(ScenarioSpec{});
  m.root_seed = 5;
  m.substreams = {"initial", "permutation"};
  m.outputs = {"abc.txt"};
  io::write_manifest(dir, m);
  const auto j = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(j["tool"], "nolb");
  EXPECT_EQ(j["root_seed"], 5);
  EXPECT_EQ(j["parameters"]["model"], "nolb");
  ASSERT_EQ(j["outputs"].size(), 1u);
  EXPECT_EQ(j["outputs"][0]["path"], "abc.txt");
  EXPECT_EQ(j["outputs"][0]["bytes"], 3);
  EXPECT_EQ(j["outputs"][0]["sha256"], io::sha256_hex(dir / "abc.txt"));
}
