#pragma once

// Scenario files, CSV artifacts and run manifests.
//
// Scenario file grammar (one entry per line):
//
//   file    := { line }
//   line    := [ key ws* "=" ws* value ] [ "#" comment ]
//   list    := number { "," number }
//   rows    := list { ";" list }           (positions only)
//
// Keys and defaults:
//   name             identifier                   "scenario"
//   scenario         explicit | uniform | counterexample-r1 | hexagon   uniform
//   model            bc | nolb-freeze | nolb | rnolb                    nolb
//   integrator       ssprk2 | euler                                     ssprk2
//   rstar            [0, 1]                       0.5
//   dt               (0, 0.1]                     0.01
//   t_end            >= 0                         10
//   seed             unsigned 64-bit              0
//   n                >= 1                         50
//   dim              >= 1                         1
//   domain_length    > 0                          10
//   require_connected  true | false               true
//   record_every     >= 1                         10
//   projection_tol   > 0                          1e-10
//   geometry_eps     [0, 1e-3]                    1e-9
//   stop_diameter    >= 0 (0 = run to t_end)      0
//   phi_breakpoints  increasing list ending at 1  1
//   phi_values       positive list, same length   1
//   positions        rows, explicit scenario only
//
// Unknown keys, duplicates and out-of-range values are errors reported with
// the line number.

#include "nolb/dynamics.hpp"
#include "nolb/harness.hpp"
#include "nolb/types.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace nolb::io {

inline constexpr std::string_view kToolName = "nolb";
inline constexpr std::string_view kToolVersion = "0.1.0";

class ScenarioParseError : public std::runtime_error {
 public:
  ScenarioParseError(const std::string& where, std::size_t line, const std::string& msg)
      : std::runtime_error(format(where, line, msg)), line_(line) {}

  /// 1-based line of the offending entry; 0 for whole-file problems.
  std::size_t line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& where, std::size_t line, const std::string& msg) {
    std::string out = where;
    if (line > 0) out += ":" + std::to_string(line);
    return out + ": " + msg;
  }
  std::size_t line_;
};

// ------------------------------------------------------------------ numbers

/// Shortest representation that parses back to the same double.
inline std::string format_roundtrip(double v) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

/// Fixed 17 significant digits for CSV output; "inf"/"-inf"/"nan" otherwise.
inline std::string format_csv(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
  return std::string(buf.data(), res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size() && std::isfinite(out);
}

inline bool parse_u64(std::string_view s, std::uint64_t& out) {
  s = trim(s);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size() && !s.empty();
}

inline std::string join(const std::vector<double>& v, std::string_view sep = ", ") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += format_roundtrip(v[i]);
  }
  return out;
}

}  // namespace detail

// ------------------------------------------------------------ scenario files

inline ScenarioSpec parse_scenario(std::string_view text, const std::string& where = "<scenario>") {
  ScenarioSpec spec;
  std::map<std::string, std::size_t> seen;
  std::vector<double> breakpoints{1.0};
  std::vector<double> values{1.0};
  std::size_t phi_line = 0;
  std::optional<std::vector<std::vector<double>>> rows;
  std::size_t rows_line = 0;

  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    std::string_view line = text.substr(start, end == std::string_view::npos ? end : end - start);
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;

    auto fail = [&](const std::string& msg) { throw ScenarioParseError(where, line_no, msg); };
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail("expected 'key = value'");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string_view value = detail::trim(line.substr(eq + 1));
    if (key.empty()) fail("missing key before '='");
    if (value.empty()) fail("missing value for " + key);
    if (auto [it, fresh] = seen.emplace(key, line_no); !fresh) {
      fail("duplicate key " + key + " (first set on line " + std::to_string(it->second) + ")");
    }

    auto number = [&](auto check, const char* range) {
      double v = 0.0;
      if (!detail::parse_double(value, v)) fail(key + ": expected a number, got '" + std::string(value) + "'");
      if (!check(v)) fail(key + " = " + std::string(value) + " is out of range (" + range + ")");
      return v;
    };
    auto count = [&](std::uint64_t min) {
      std::uint64_t v = 0;
      if (!detail::parse_u64(value, v)) fail(key + ": expected a non-negative integer, got '" + std::string(value) + "'");
      if (v < min) fail(key + " = " + std::string(value) + " is out of range (>= " + std::to_string(min) + ")");
      return v;
    };
    auto list = [&](std::string_view s) {
      std::vector<double> out;
      for (auto item : detail::split(s, ',')) {
        double v = 0.0;
        if (!detail::parse_double(item, v)) fail(key + ": bad number '" + std::string(item) + "'");
        out.push_back(v);
      }
      return out;
    };

    if (key == "name") {
      spec.name = std::string(value);
    } else if (key == "scenario") {
      auto k = parse_initial_kind(value);
      if (!k) fail("scenario must be one of explicit, uniform, counterexample-r1, hexagon");
      spec.initial.kind = *k;
    } else if (key == "model") {
      auto m = parse_model(value);
      if (!m) fail("model must be one of bc, nolb-freeze, nolb, rnolb");
      spec.params.model = *m;
    } else if (key == "integrator") {
      auto i = parse_integrator(value);
      if (!i) fail("integrator must be ssprk2 or euler");
      spec.params.integrator = *i;
    } else if (key == "rstar") {
      spec.params.r_star = number([](double v) { return v >= 0 && v <= 1; }, "0 <= rstar <= 1");
    } else if (key == "dt") {
      spec.params.dt = number([](double v) { return v > 0 && v <= 0.1; }, "0 < dt <= 0.1");
    } else if (key == "t_end") {
      spec.params.t_end = number([](double v) { return v >= 0; }, "t_end >= 0");
    } else if (key == "seed") {
      std::uint64_t v = 0;
      if (!detail::parse_u64(value, v)) fail("seed: expected an unsigned 64-bit integer");
      spec.params.seed = v;
    } else if (key == "n") {
      spec.initial.n = count(1);
    } else if (key == "dim") {
      spec.initial.dim = count(1);
    } else if (key == "domain_length") {
      spec.initial.domain_length = number([](double v) { return v > 0; }, "domain_length > 0");
    } else if (key == "require_connected") {
      if (value == "true") spec.initial.require_connected = true;
      else if (value == "false") spec.initial.require_connected = false;
      else fail("require_connected must be true or false");
    } else if (key == "record_every") {
      spec.record_every = count(1);
    } else if (key == "projection_tol") {
      spec.params.projection_tol = number([](double v) { return v > 0; }, "projection_tol > 0");
    } else if (key == "geometry_eps") {
      spec.params.geometry_eps = number([](double v) { return v >= 0 && v <= 1e-3; }, "0 <= geometry_eps <= 1e-3");
    } else if (key == "stop_diameter") {
      spec.params.stop_diameter = number([](double v) { return v >= 0; }, "stop_diameter >= 0");
    } else if (key == "phi_breakpoints") {
      breakpoints = list(value);
      phi_line = line_no;
    } else if (key == "phi_values") {
      values = list(value);
      phi_line = std::max(phi_line, line_no);
    } else if (key == "positions") {
      rows.emplace();
      for (auto row : detail::split(value, ';')) {
        if (row.empty()) continue;
        rows->push_back(list(row));
      }
      rows_line = line_no;
    } else {
      fail("unknown key " + key);
    }
  }

  try {
    spec.params.phi = InteractionFunction(breakpoints, values);
  } catch (const std::invalid_argument& e) {
    throw ScenarioParseError(where, phi_line, std::string("phi: ") + e.what());
  }

  const bool is_explicit = spec.initial.kind == InitialKind::explicit_positions;
  if (rows && !is_explicit)
    throw ScenarioParseError(where, rows_line, "positions given but scenario is not explicit");
  if (is_explicit) {
    if (!rows || rows->empty())
      throw ScenarioParseError(where, 0, "explicit scenario needs a positions entry");
    try {
      auto config = AgentConfiguration::from_rows(*rows);
      if (seen.count("n") && spec.initial.n != config.n_agents())
        throw std::invalid_argument("n does not match the number of position rows");
      if (seen.count("dim") && spec.initial.dim != config.dim())
        throw std::invalid_argument("dim does not match the position rows");
      spec.initial.n = config.n_agents();
      spec.initial.dim = config.dim();
      spec.initial.positions = std::move(config);
    } catch (const std::invalid_argument& e) {
      throw ScenarioParseError(where, rows_line, std::string("positions: ") + e.what());
    }
  }
  if (spec.initial.kind == InitialKind::hexagon && !(spec.params.r_star > 0 && spec.params.r_star < 1))
    throw ScenarioParseError(where, seen.count("rstar") ? seen["rstar"] : 0, "rstar must lie in (0, 1) for the hexagon scenario");
  return spec;
}

inline ScenarioSpec parse_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioParseError(path.string(), 0, "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path.string());
}

/// Writes every key, so parse_scenario(write_scenario(s)) == s.
inline std::string write_scenario(const ScenarioSpec& s) {
  std::ostringstream out;
  out << "# nolb scenario\n";
  out << "name = " << s.name << "\n";
  out << "scenario = " << to_string(s.initial.kind) << "\n";
  out << "model = " << to_string(s.params.model) << "\n";
  out << "integrator = " << to_string(s.params.integrator) << "\n";
  out << "rstar = " << format_roundtrip(s.params.r_star) << "\n";
  out << "dt = " << format_roundtrip(s.params.dt) << "\n";
  out << "t_end = " << format_roundtrip(s.params.t_end) << "\n";
  out << "seed = " << s.params.seed << "\n";
  out << "n = " << s.initial.n << "\n";
  out << "dim = " << s.initial.dim << "\n";
  out << "domain_length = " << format_roundtrip(s.initial.domain_length) << "\n";
  out << "require_connected = " << (s.initial.require_connected ? "true" : "false") << "\n";
  out << "record_every = " << s.record_every << "\n";
  out << "projection_tol = " << format_roundtrip(s.params.projection_tol) << "\n";
  out << "geometry_eps = " << format_roundtrip(s.params.geometry_eps) << "\n";
  out << "stop_diameter = " << format_roundtrip(s.params.stop_diameter) << "\n";
  out << "phi_breakpoints = " << detail::join(s.params.phi.breakpoints()) << "\n";
  out << "phi_values = " << detail::join(s.params.phi.values()) << "\n";
  if (s.initial.kind == InitialKind::explicit_positions && s.initial.positions) {
    const auto& c = *s.initial.positions;
    out << "positions = ";
    for (std::size_t i = 0; i < c.n_agents(); ++i) {
      if (i) out << "; ";
      for (std::size_t k = 0; k < c.dim(); ++k) {
        if (k) out << ", ";
        out << format_roundtrip(c(i, k));
      }
    }
    out << "\n";
  }
  return out.str();
}

// --------------------------------------------------------------------- CSV

/// Minimal CSV emitter with fixed number formatting and '\n' line ends.
class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
  }

  CsvWriter& header(std::initializer_list<std::string_view> cols) {
    for (auto c : cols) cell(c);
    return row();
  }
  CsvWriter& header(const std::vector<std::string>& cols) {
    for (const auto& c : cols) cell(c);
    return row();
  }
  CsvWriter& cell(std::string_view s) {
    if (!first_) out_ << ',';
    out_ << s;
    first_ = false;
    return *this;
  }
  CsvWriter& num(double v) { return cell(format_csv(v)); }
  CsvWriter& integer(std::uint64_t v) { return cell(std::to_string(v)); }
  CsvWriter& row() {
    out_ << '\n';
    first_ = true;
    return *this;
  }
  void close() {
    out_.close();
    if (!out_) throw std::runtime_error("failed writing " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  bool first_ = true;
};

inline void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  CsvWriter w(path);
  const std::size_t d = traj.final_state.dim();
  std::vector<std::string> cols{"time", "agent"};
  for (std::size_t k = 0; k < d; ++k) cols.push_back("coord_" + std::to_string(k));
  w.header(cols);
  for (std::size_t s = 0; s < traj.snapshots.size(); ++s) {
    const auto& c = traj.snapshots[s];
    for (std::size_t i = 0; i < c.n_agents(); ++i) {
      w.num(traj.times[s]).integer(i);
      for (std::size_t k = 0; k < d; ++k) w.num(c(i, k));
      w.row();
    }
  }
  w.close();
}

inline void write_metrics_csv(const std::filesystem::path& path, const MetricsSeries& m) {
  CsvWriter w(path);
  w.header({"time", "diameter", "variance", "clustering_number",
            "clustering_number_self_inclusive", "connected"});
  for (std::size_t k = 0; k < m.size(); ++k) {
    w.num(m.times[k]).num(m.diameter[k]).num(m.variance[k]).num(m.clustering_number[k]);
    w.num(m.clustering_number_self_inclusive[k]).integer(m.connected[k] ? 1 : 0).row();
  }
  w.close();
}

/// Edge lists per recorded step; graph is interaction, behind or relaxed.
inline void write_graphs_csv(const std::filesystem::path& path, const std::vector<GraphSnapshot>& g) {
  CsvWriter w(path);
  w.header({"time", "graph", "source", "target"});
  for (const auto& snap : g) {
    auto emit = [&](std::string_view name, const std::vector<Edge>& edges) {
      for (const auto& [i, j] : edges) w.num(snap.time).cell(name).integer(i).integer(j).row();
    };
    emit("interaction", snap.interaction);
    emit("behind", snap.behind);
    emit("relaxed", snap.relaxed);
  }
  w.close();
}

/// "q" followed by the level in percent, at least two digits: q00, q05, q50, q97.5.
inline std::string quantile_column(double level) {
  std::string pct = format_roundtrip(std::round(level * 1e6) / 1e4);
  if (pct.find('.') == std::string::npos && pct.size() < 2) pct = "0" + pct;
  if (pct.size() >= 2 && pct[1] == '.' ) pct = "0" + pct;
  return "q" + pct;
}

inline void write_quantiles_csv(const std::filesystem::path& path, const MonteCarloResult& res) {
  CsvWriter w(path);
  std::vector<std::string> cols{"time"};
  for (double q : res.quantile_levels) cols.push_back(quantile_column(q));
  w.header(cols);
  for (std::size_t t = 0; t < res.times.size(); ++t) {
    w.num(res.times[t]);
    for (const auto& q : res.quantile_values) w.num(q[t]);
    w.row();
  }
  w.close();
}

inline void write_tau_csv(const std::filesystem::path& path, const MonteCarloResult& res) {
  CsvWriter w(path);
  w.header({"realization", "seed", "tau"});
  for (const auto& r : res.runs)
    w.integer(r.index).integer(r.seed).num(r.tau.value_or(std::numeric_limits<double>::infinity())).row();
  w.close();
}

inline void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows,
                            const std::vector<double>& levels) {
  CsvWriter w(path);
  std::vector<std::string> cols{"rstar", "realizations", "finite", "tau_mean", "tau_median"};
  for (double q : levels) cols.push_back("tau_" + quantile_column(q));
  w.header(cols);
  for (const auto& r : rows) {
    w.num(r.r_star).integer(r.realizations).integer(r.finite).num(r.tau_mean).num(r.tau_median);
    for (double v : r.tau_quantiles) w.num(v);
    w.row();
  }
  w.close();
}

// ---------------------------------------------------------------- manifest

inline std::string sha256_hex(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha256 unavailable");
  }
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md.data(), &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i)
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

inline nlohmann::json scenario_json(const ScenarioSpec& s) {
  nlohmann::json j;
  j["name"] = s.name;
  j["scenario"] = to_string(s.initial.kind);
  j["model"] = to_string(s.params.model);
  j["integrator"] = to_string(s.params.integrator);
  j["rstar"] = s.params.r_star;
  j["dt"] = s.params.dt;
  j["t_end"] = s.params.t_end;
  j["seed"] = s.params.seed;
  j["n"] = s.initial.n;
  j["dim"] = s.initial.dim;
  j["domain_length"] = s.initial.domain_length;
  j["require_connected"] = s.initial.require_connected;
  j["record_every"] = s.record_every;
  j["projection_tol"] = s.params.projection_tol;
  j["geometry_eps"] = s.params.geometry_eps;
  j["stop_diameter"] = s.params.stop_diameter;
  j["phi_breakpoints"] = s.params.phi.breakpoints();
  j["phi_values"] = s.params.phi.values();
  return j;
}

struct Manifest {
  std::string command;
  nlohmann::json parameters;
  std::uint64_t root_seed = 0;
  std::vector<std::string> substreams;
  std::chrono::system_clock::time_point started = std::chrono::system_clock::now();
  std::vector<std::filesystem::path> outputs;  // relative to the output directory
};

/// Writes manifest.json into `dir` with a digest of every listed output.
inline void write_manifest(const std::filesystem::path& dir, const Manifest& m) {
  nlohmann::json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["command"] = m.command;
  j["parameters"] = m.parameters;
  j["root_seed"] = m.root_seed;
  j["substreams"] = m.substreams;
  j["rng"] = "splitmix64-counter";
  j["started_at"] = utc_timestamp(m.started);
  j["finished_at"] = utc_timestamp(std::chrono::system_clock::now());
  nlohmann::json files = nlohmann::json::array();
  for (const auto& rel : m.outputs) {
    const auto full = dir / rel;
    files.push_back({{"path", rel.generic_string()},
                     {"bytes", std::filesystem::file_size(full)},
                     {"sha256", sha256_hex(full)}});
  }
  j["outputs"] = files;
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write manifest.json");
}

}  // namespace nolb::io
