#pragma once

// Run configuration: a flat key=value format (dotted keys for grouping,
// '#' comments, blank lines ignored). Rates accept Hz/kHz/MHz suffixes.
// Unknown keys are errors — silent typos in rate names are how wrong physics
// ships.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "chiralrate/errors.hpp"
#include "chiralrate/integrate.hpp"
#include "chiralrate/model.hpp"

namespace chiralrate {

struct RunConfig {
  ModelKind kind = ModelKind::OpenChiral;
  ModelParams params{};
  double t_end = 5e-6;  // [s]
  SampleGrid grid{};
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();  // [s]
  double initial_step = 0;                                    // [s], 0 = auto
  std::size_t n_traj = 1000;
  std::uint64_t seed = 42;
  unsigned threads = 0;  // 0 = hardware concurrency
  std::string output_path;    // empty = stdout
  std::string output_format;  // empty = command default
  bool emit_relative_T = false;
  // optional overrides of the thermal initial state at params.x0
  std::optional<double> init_x_photon, init_x_tls;
  std::optional<double> init_n_A, init_n_B, init_n_1, init_n_2, init_n_C,
      init_m;
  std::string preset_name;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline double parse_number(const std::string& key, const std::string& raw,
                           std::string* suffix_out = nullptr) {
  const std::string v = trim(raw);
  if (v.empty())
    throw domain_error("ConfigParse", "empty value for '" + key + "'");
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str())
    throw domain_error("ConfigParse",
                       "cannot parse number '" + raw + "' for '" + key + "'");
  const std::string rest = trim(std::string(end));
  if (suffix_out) {
    *suffix_out = rest;
  } else if (!rest.empty()) {
    throw domain_error("ConfigParse", "unexpected trailing text '" + rest +
                                          "' in value for '" + key + "'");
  }
  return x;
}

// "10 kHz", "2.5MHz", "300" (plain Hz)
inline double parse_rate(const std::string& key, const std::string& raw) {
  std::string suffix;
  const double x = parse_number(key, raw, &suffix);
  const std::string s = lower(suffix);
  double scale = 1;
  if (s.empty() || s == "hz")
    scale = 1;
  else if (s == "khz")
    scale = 1e3;
  else if (s == "mhz")
    scale = 1e6;
  else if (s == "ghz")
    scale = 1e9;
  else
    throw domain_error("ConfigParse",
                       "unknown rate suffix '" + suffix + "' for '" + key + "'");
  return x * scale;
}

inline long long parse_int(const std::string& key, const std::string& raw) {
  const double x = parse_number(key, raw);
  const long long i = static_cast<long long>(x);
  if (static_cast<double>(i) != x)
    throw domain_error("ConfigParse",
                       "'" + key + "' must be an integer, got '" + raw + "'");
  return i;
}

inline bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string v = lower(trim(raw));
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw domain_error("ConfigParse",
                     "'" + key + "' must be a boolean, got '" + raw + "'");
}

inline std::vector<double> parse_list(const std::string& key,
                                      const std::string& raw) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(raw);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(parse_number(key, item));
  }
  return out;
}

}  // namespace detail

// Applies one key=value setting. Shared by config files and --set flags.
inline void apply_setting(RunConfig& cfg, const std::string& key,
                          const std::string& value) {
  using detail::parse_bool;
  using detail::parse_int;
  using detail::parse_list;
  using detail::parse_number;
  using detail::parse_rate;
  ModelParams& p = cfg.params;

  if (key == "model") {
    cfg.kind = model_kind_from_string(detail::trim(value));
  } else if (key == "gamma_dec") {
    p.gamma_dec = parse_rate(key, value);
  } else if (key == "gamma_dec_prime") {
    p.gamma_dec_prime = parse_rate(key, value);
  } else if (key == "gamma_0") {
    p.gamma_0 = parse_rate(key, value);
  } else if (key == "gamma_3") {
    p.gamma_3 = parse_rate(key, value);
  } else if (key == "gamma_t1") {
    p.gamma_t1 = parse_rate(key, value);
  } else if (key == "gamma_t2") {
    p.gamma_t2 = parse_rate(key, value);
  } else if (key == "gamma_t11") {
    p.gamma_t11 = parse_rate(key, value);
  } else if (key == "gamma_t12") {
    p.gamma_t12 = parse_rate(key, value);
  } else if (key == "gamma_4") {
    p.gamma_4 = parse_rate(key, value);
  } else if (key == "gamma_4_prime") {
    p.gamma_4_prime = parse_rate(key, value);
  } else if (key == "gamma_5") {
    p.gamma_5 = parse_rate(key, value);
  } else if (key == "gamma_6") {
    p.gamma_6 = parse_rate(key, value);
  } else if (key == "M") {
    p.M = static_cast<int>(parse_int(key, value));
  } else if (key == "N_modes") {
    p.N_modes = parse_number(key, value);
  } else if (key == "N_modes_wg") {
    p.N_modes_wg = parse_number(key, value);
  } else if (key == "x0") {
    p.x0 = parse_number(key, value);
  } else if (key == "t_end_s") {
    cfg.t_end = parse_number(key, value);
  } else if (key == "grid.kind") {
    const std::string v = detail::lower(detail::trim(value));
    if (v == "linear")
      cfg.grid.kind = SampleGrid::Kind::Linear;
    else if (v == "log")
      cfg.grid.kind = SampleGrid::Kind::Log;
    else if (v == "explicit")
      cfg.grid.kind = SampleGrid::Kind::Explicit;
    else
      throw domain_error("ConfigParse", "grid.kind must be linear|log|explicit");
  } else if (key == "grid.points") {
    const long long n = parse_int(key, value);
    if (n < 2) throw domain_error("ConfigParse", "grid.points must be >= 2");
    cfg.grid.points = static_cast<std::size_t>(n);
  } else if (key == "grid.t_min_s") {
    cfg.grid.t_min = parse_number(key, value);
  } else if (key == "grid.times_s") {
    cfg.grid.kind = SampleGrid::Kind::Explicit;
    cfg.grid.times = parse_list(key, value);
  } else if (key == "integrator.rel_tol") {
    cfg.rel_tol = parse_number(key, value);
  } else if (key == "integrator.abs_tol") {
    cfg.abs_tol = parse_number(key, value);
  } else if (key == "integrator.max_step_s") {
    cfg.max_step = parse_number(key, value);
  } else if (key == "integrator.initial_step_s") {
    cfg.initial_step = parse_number(key, value);
  } else if (key == "stochastic.n_traj") {
    const long long n = parse_int(key, value);
    if (n < 1) throw domain_error("ConfigParse", "stochastic.n_traj must be >= 1");
    cfg.n_traj = static_cast<std::size_t>(n);
  } else if (key == "stochastic.seed") {
    cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
  } else if (key == "stochastic.threads") {
    const long long n = parse_int(key, value);
    if (n < 0) throw domain_error("ConfigParse", "stochastic.threads must be >= 0");
    cfg.threads = static_cast<unsigned>(n);
  } else if (key == "output.path") {
    cfg.output_path = detail::trim(value);
  } else if (key == "output.format") {
    cfg.output_format = detail::lower(detail::trim(value));
  } else if (key == "emit_relative_T") {
    cfg.emit_relative_T = parse_bool(key, value);
  } else if (key == "init.x_photon") {
    cfg.init_x_photon = parse_number(key, value);
  } else if (key == "init.x_tls") {
    cfg.init_x_tls = parse_number(key, value);
  } else if (key == "init.n_A") {
    cfg.init_n_A = parse_number(key, value);
  } else if (key == "init.n_B") {
    cfg.init_n_B = parse_number(key, value);
  } else if (key == "init.n_1") {
    cfg.init_n_1 = parse_number(key, value);
  } else if (key == "init.n_2") {
    cfg.init_n_2 = parse_number(key, value);
  } else if (key == "init.n_C") {
    cfg.init_n_C = parse_number(key, value);
  } else if (key == "init.m") {
    cfg.init_m = parse_number(key, value);
  } else {
    throw domain_error("UnknownKey", "unknown config key '" + key + "'");
  }
}

// key=value with the value possibly containing '='; '#' starts a comment.
inline void apply_config_text(RunConfig& cfg, const std::string& text,
                              const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw domain_error("ConfigParse", origin + ":" + std::to_string(lineno) +
                                            ": expected key=value, got '" +
                                            line + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty())
      throw domain_error("ConfigParse",
                         origin + ":" + std::to_string(lineno) + ": empty key");
    apply_setting(cfg, key, value);
  }
}

inline void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw error("Io", "cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  apply_config_text(cfg, buf.str(), path);
}

// Builds the initial state: thermal at params.x0, then any init.* overrides.
// Overriding a field the chosen model does not evolve is an error.
[[nodiscard]] inline State initial_state(const RunConfig& cfg) {
  const ModelParams& p = cfg.params;
  validate_or_throw(p, cfg.kind);
  State s = thermal_state(p, cfg.kind, p.x0);
  if (cfg.init_x_photon) {
    const double x = *cfg.init_x_photon;
    if (!(x > 0)) throw domain_error("ConfigParse", "init.x_photon must be > 0");
    const double n = 1.0 / std::expm1(x);
    for (const StateField f : active_fields(cfg.kind))
      if (f != StateField::m) set(s, f, n);
  }
  if (cfg.init_x_tls) {
    const double x = *cfg.init_x_tls;
    s.m = static_cast<double>(p.M) / (std::exp(x) + 1.0);
  }
  auto override_field = [&](StateField f, const std::optional<double>& v,
                            const char* key) {
    if (!v) return;
    if (!field_active(cfg.kind, f))
      throw domain_error("ConfigParse", std::string("'") + key +
                                            "' is not a state variable of model '" +
                                            to_string(cfg.kind) + "'");
    set(s, f, *v);
  };
  override_field(StateField::n_A, cfg.init_n_A, "init.n_A");
  override_field(StateField::n_B, cfg.init_n_B, "init.n_B");
  override_field(StateField::n_1, cfg.init_n_1, "init.n_1");
  override_field(StateField::n_2, cfg.init_n_2, "init.n_2");
  override_field(StateField::n_C, cfg.init_n_C, "init.n_C");
  override_field(StateField::m, cfg.init_m, "init.m");
  require_valid_state(s, p, cfg.kind, "initial_state");
  return s;
}

[[nodiscard]] inline IntegratorConfig integrator_config(const RunConfig& cfg) {
  IntegratorConfig ic;
  ic.t_end = cfg.t_end;
  ic.rel_tol = cfg.rel_tol;
  ic.abs_tol = cfg.abs_tol;
  ic.max_step = cfg.max_step;
  ic.initial_step = cfg.initial_step;
  ic.grid = cfg.grid;
  return ic;
}

}  // namespace chiralrate
