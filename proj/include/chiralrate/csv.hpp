#pragma once

// CSV emission with shortest round-trip float serialization: every cell
// parses back to the exact same double, and re-serializing a parsed file
// reproduces it byte for byte. Fixed column set across models; columns a
// model does not evolve stay empty.

#include <charconv>
#include <cstddef>
#include <istream>
#include <iterator>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "chiralrate/errors.hpp"
#include "chiralrate/integrate.hpp"
#include "chiralrate/model.hpp"
#include "chiralrate/thermo.hpp"

namespace chiralrate {

[[nodiscard]] inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

[[nodiscard]] inline double parse_double(std::string_view s) {
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw domain_error("CsvParse", "cannot parse float '" + std::string(s) + "'");
  return v;
}

inline constexpr const char* kSimulationColumns[] = {
    "t_s",       "n_A",        "n_B",        "n_1",        "n_2",
    "n_C",       "m",          "x_A",        "x_B",        "x_1",
    "x_2",       "x_tls",      "S_total_kB", "sigma_AB",   "sigma_Atls",
    "sigma_Btls", "sigma_total", "Q_ext_total"};

inline constexpr const char* kRelativeTColumns[] = {
    "T_rel_A", "T_rel_B", "T_rel_1", "T_rel_2", "T_rel_tls"};

struct CsvOptions {
  bool relative_T = false;  // append T/T(0) = x0/x columns
};

// One CSV row per trajectory sample; thermodynamic columns recomputed from
// the state. Inactive columns are emitted empty to keep a stable layout.
inline void write_simulation_csv(std::ostream& os, const Trajectory& traj,
                                 CsvOptions opt = {}) {
  const ModelKind k = traj.kind;
  const ModelParams& p = traj.params;
  const bool has_B = field_active(k, StateField::n_B);
  const bool has_1 = field_active(k, StateField::n_1);
  const bool has_2 = field_active(k, StateField::n_2);
  const bool has_C = field_active(k, StateField::n_C);
  const bool has_sigma = (k == ModelKind::OpenChiral);

  std::string line;
  for (std::size_t i = 0; i < std::size(kSimulationColumns); ++i) {
    if (i) line += ',';
    line += kSimulationColumns[i];
  }
  if (opt.relative_T)
    for (const char* c : kRelativeTColumns) {
      line += ',';
      line += c;
    }
  os << line << '\n';

  auto cell = [](std::string& row, bool active, double v) {
    row += ',';
    if (active) row += format_double(v);
  };
  for (const TrajectorySample& smp : traj.samples) {
    const ThermoReport r = thermo_report(smp.state, p, k, smp.t);
    std::string row = format_double(smp.t);
    cell(row, true, smp.state.n_A);
    cell(row, has_B, smp.state.n_B);
    cell(row, has_1, smp.state.n_1);
    cell(row, has_2, smp.state.n_2);
    cell(row, has_C, smp.state.n_C);
    cell(row, true, smp.state.m);
    cell(row, true, r.x_A);
    cell(row, has_B, r.x_B);
    cell(row, has_1, r.x_1);
    cell(row, has_2, r.x_2);
    cell(row, true, r.x_tls);
    cell(row, true, r.S_total);
    cell(row, has_sigma, r.sigma_AB);
    cell(row, has_sigma, r.sigma_Atls);
    cell(row, has_sigma, r.sigma_Btls);
    cell(row, has_sigma, r.sigma_total);
    cell(row, has_sigma, r.Q_ext_total);
    if (opt.relative_T) {
      cell(row, true, p.x0 / r.x_A);
      cell(row, has_B, p.x0 / r.x_B);
      cell(row, has_1, p.x0 / r.x_1);
      cell(row, has_2, p.x0 / r.x_2);
      cell(row, true, p.x0 / r.x_tls);
    }
    os << row << '\n';
  }
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // raw cells, "" = empty

  [[nodiscard]] std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw domain_error("CsvParse", "no column '" + std::string(name) + "'");
  }
};

[[nodiscard]] inline CsvTable parse_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
      if (i == s.size() || s[i] == ',') {
        out.push_back(s.substr(start, i - start));
        start = i + 1;
      }
    }
    return out;
  };
  if (!std::getline(in, line))
    throw domain_error("CsvParse", "empty input: missing header row");
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != t.header.size())
      throw domain_error("CsvParse",
                         "row with " + std::to_string(cells.size()) +
                             " cells, header has " +
                             std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

// Re-serializes a parsed table; used to verify byte-exact round-tripping.
inline void write_csv(std::ostream& os, const CsvTable& t) {
  std::string line;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (i) line += ',';
    line += t.header[i];
  }
  os << line << '\n';
  for (const auto& row : t.rows) {
    line.clear();
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) line += ',';
      if (!row[i].empty()) line += format_double(parse_double(row[i]));
    }
    os << line << '\n';
  }
}

}  // namespace chiralrate
