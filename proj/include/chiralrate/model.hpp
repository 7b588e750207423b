#pragma once

// Shared data model for the golden-rule rate-equation systems: an ensemble of
// M two-level systems (TLS) exchanging photons with mode continua (reservoirs
// A/B, waveguide channels 1/2, or an embedded cavity/waveguide pair).
//
// Unit conventions: time in seconds, rates in Hz, energies in units of the
// transition quantum (hbar*Omega), entropy in units of k_B (k_B == 1).
// Temperatures appear only through the dimensionless x = hbar*Omega/(k_B T).

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "chiralrate/errors.hpp"

namespace chiralrate {

enum class ModelKind {
  BlackBody,       // one reservoir in detailed-balanced exchange with the TLS
  OpenChiral,      // reservoirs A/B, chiral TLS coupling, lossy channels (T=0 bath)
  ClosedChiral,    // reservoirs A/B + channels 1/2, fully excitation-conserving
  EmbeddedCavity,  // cavity modes A embedded in a waveguide continuum C
};

[[nodiscard]] inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::BlackBody: return "blackbody";
    case ModelKind::OpenChiral: return "open-chiral";
    case ModelKind::ClosedChiral: return "closed-chiral";
    case ModelKind::EmbeddedCavity: return "embedded-cavity";
  }
  return "?";
}

[[nodiscard]] inline ModelKind model_kind_from_string(const std::string& name) {
  if (name == "blackbody" || name == "black-body") return ModelKind::BlackBody;
  if (name == "open-chiral" || name == "open") return ModelKind::OpenChiral;
  if (name == "closed-chiral" || name == "closed") return ModelKind::ClosedChiral;
  if (name == "embedded-cavity" || name == "embedded") return ModelKind::EmbeddedCavity;
  throw domain_error("UnknownModel", "unrecognized model name '" + name + "'");
}

// All rate constants an instance might use. Only the subset relevant to a
// ModelKind participates in that model's equations; the rest are ignored.
struct ModelParams {
  // first-order rates [Hz]
  double gamma_dec = 0;        // channel end loss (open) / reservoir<->channel exchange (closed)
  double gamma_dec_prime = 0;  // channel->reservoir exchange (closed)
  double gamma_0 = 0;          // A<->B transfer, per mode
  double gamma_3 = 0;          // channel 1<->2 mixing via a reservoir, per mode (closed)
  // TLS couplings summed over the mode window [Hz]
  double gamma_t1 = 0;   // chiral path: absorb from A / emit toward B
  double gamma_t2 = 0;   // chiral path: absorb from B / emit toward A
  double gamma_t11 = 0;  // TLS <-> channel 1
  double gamma_t12 = 0;  // TLS <-> channel 2
  // embedded-cavity rates [Hz]
  double gamma_4 = 0;        // cavity -> waveguide exchange, per mode
  double gamma_4_prime = 0;  // waveguide -> cavity exchange, per mode
  double gamma_5 = 0;        // TLS <-> waveguide mode, per mode
  double gamma_6 = 0;        // TLS <-> cavity mode (waveguide-enhanced), per mode
  // counts and initial inverse temperature
  double N_modes = 100;     // reservoir / cavity mode count N
  double N_modes_wg = 100;  // waveguide channel mode count N'
  int M = 10;               // number of TLS
  double x0 = 1.0;          // hbar*Omega/(k_B T(0)), dimensionless

  // Per-mode rates derived from the mode-summed couplings. Always computed,
  // never stored, so they can't drift out of sync with the tilde rates.
  [[nodiscard]] double gamma_1() const { return gamma_t1 / N_modes; }
  [[nodiscard]] double gamma_2() const { return gamma_t2 / N_modes; }
  [[nodiscard]] double gamma_11() const { return gamma_t11 / N_modes_wg; }
  [[nodiscard]] double gamma_12() const { return gamma_t12 / N_modes_wg; }
};

// Mean-field macrostate. Photon fields are per-mode occupancies; m is the
// mean number of excited TLS. Only the fields active for a ModelKind are
// meaningful (BlackBody stores its single reservoir occupancy in n_A);
// inactive fields stay at 0.
struct State {
  double n_A = 0;
  double n_B = 0;
  double n_1 = 0;
  double n_2 = 0;
  double n_C = 0;
  double m = 0;
};

enum class StateField : int { n_A = 0, n_B, n_1, n_2, n_C, m };

[[nodiscard]] inline const char* to_string(StateField f) {
  switch (f) {
    case StateField::n_A: return "n_A";
    case StateField::n_B: return "n_B";
    case StateField::n_1: return "n_1";
    case StateField::n_2: return "n_2";
    case StateField::n_C: return "n_C";
    case StateField::m: return "m";
  }
  return "?";
}

[[nodiscard]] inline double get(const State& s, StateField f) {
  switch (f) {
    case StateField::n_A: return s.n_A;
    case StateField::n_B: return s.n_B;
    case StateField::n_1: return s.n_1;
    case StateField::n_2: return s.n_2;
    case StateField::n_C: return s.n_C;
    case StateField::m: return s.m;
  }
  return 0;
}

inline void set(State& s, StateField f, double v) {
  switch (f) {
    case StateField::n_A: s.n_A = v; break;
    case StateField::n_B: s.n_B = v; break;
    case StateField::n_1: s.n_1 = v; break;
    case StateField::n_2: s.n_2 = v; break;
    case StateField::n_C: s.n_C = v; break;
    case StateField::m: s.m = v; break;
  }
}

// Active fields per kind, in canonical packing order (m always last).
[[nodiscard]] inline std::span<const StateField> active_fields(ModelKind k) {
  static constexpr StateField bb[] = {StateField::n_A, StateField::m};
  static constexpr StateField oc[] = {StateField::n_A, StateField::n_B,
                                      StateField::m};
  static constexpr StateField cc[] = {StateField::n_A, StateField::n_B,
                                      StateField::n_1, StateField::n_2,
                                      StateField::m};
  static constexpr StateField ec[] = {StateField::n_A, StateField::n_C,
                                      StateField::m};
  switch (k) {
    case ModelKind::BlackBody: return bb;
    case ModelKind::OpenChiral: return oc;
    case ModelKind::ClosedChiral: return cc;
    case ModelKind::EmbeddedCavity: return ec;
  }
  return {};
}

[[nodiscard]] inline bool field_active(ModelKind k, StateField f) {
  for (StateField g : active_fields(k))
    if (g == f) return true;
  return false;
}

[[nodiscard]] inline std::size_t state_dimension(ModelKind k) {
  return active_fields(k).size();
}

// Fixed-capacity vector holding the packed active components of a State.
struct StateVec {
  std::array<double, 6> v{};
  std::size_t n = 0;

  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }
  [[nodiscard]] std::size_t size() const { return n; }
};

[[nodiscard]] inline StateVec pack(ModelKind k, const State& s) {
  StateVec y;
  for (StateField f : active_fields(k)) y.v[y.n++] = get(s, f);
  return y;
}

[[nodiscard]] inline State unpack(ModelKind k, const StateVec& y) {
  State s;
  std::size_t i = 0;
  for (StateField f : active_fields(k)) set(s, f, y[i++]);
  return s;
}

// Multiplicity of each packed slot: the mode count for photon slots (an
// occupancy n represents N identical modes), 1 for the m slot. The dot
// product of these weights with the packed state is the total excitation.
[[nodiscard]] inline StateVec excitation_weights(ModelKind k, const ModelParams& p) {
  StateVec w;
  for (StateField f : active_fields(k)) {
    double wi = 1.0;
    switch (f) {
      case StateField::n_A:
      case StateField::n_B: wi = p.N_modes; break;
      case StateField::n_1:
      case StateField::n_2:
      case StateField::n_C: wi = p.N_modes_wg; break;
      case StateField::m: wi = 1.0; break;
    }
    w.v[w.n++] = wi;
  }
  return w;
}

// ---------------------------------------------------------------------------
// Parameter validation

struct ValidationReport {
  std::vector<std::string> errors;    // each starts with a stable tag
  std::vector<std::string> warnings;  // advisory only, never rejecting
  [[nodiscard]] bool ok() const { return errors.empty(); }
};

[[nodiscard]] inline ValidationReport validate_params(const ModelParams& p,
                                                      ModelKind k) {
  ValidationReport r;
  const std::pair<const char*, double> rates[] = {
      {"gamma_dec", p.gamma_dec},   {"gamma_dec_prime", p.gamma_dec_prime},
      {"gamma_0", p.gamma_0},       {"gamma_3", p.gamma_3},
      {"gamma_t1", p.gamma_t1},     {"gamma_t2", p.gamma_t2},
      {"gamma_t11", p.gamma_t11},   {"gamma_t12", p.gamma_t12},
      {"gamma_4", p.gamma_4},       {"gamma_4_prime", p.gamma_4_prime},
      {"gamma_5", p.gamma_5},       {"gamma_6", p.gamma_6},
  };
  for (const auto& [name, value] : rates) {
    if (!(value >= 0) || !std::isfinite(value))
      r.errors.push_back(std::string("NegativeRate(") + name + ")");
  }
  if (!(p.N_modes >= 1) || !std::isfinite(p.N_modes))
    r.errors.push_back("NonPositiveModeCount(N_modes)");
  if (!(p.N_modes_wg >= 1) || !std::isfinite(p.N_modes_wg))
    r.errors.push_back("NonPositiveModeCount(N_modes_wg)");
  if (p.M < 1) r.errors.push_back("NonPositiveM");
  if (!(p.x0 > 0) || !std::isfinite(p.x0)) r.errors.push_back("NonPositiveX0");
  if (!r.ok()) return r;

  // Heuristic: the A<->B transfer is a second-order process; a ratio
  // gamma_0/gamma_dec exceeding the mode count is outside the perturbative
  // regime the equations were derived in.
  if (p.gamma_dec > 0 && p.gamma_0 / p.gamma_dec > p.N_modes)
    r.warnings.push_back(
        "PerturbativeRegime: gamma_0/gamma_dec exceeds N_modes; "
        "second-order transfer may not be a small correction");

  // The exchange terms between reservoirs and channels (or cavity and
  // waveguide) only conserve total excitation when the mode-weighted rates
  // match; mismatched values make 'conserved_excitation' drift.
  auto mismatch = [](double a, double b) {
    return std::abs(a - b) > 1e-12 * std::max(std::abs(a), std::abs(b));
  };
  if (k == ModelKind::ClosedChiral &&
      mismatch(p.N_modes * p.gamma_dec, p.N_modes_wg * p.gamma_dec_prime))
    r.warnings.push_back(
        "ExchangeImbalance: N_modes*gamma_dec != N_modes_wg*gamma_dec_prime; "
        "total excitation will not be conserved");
  if (k == ModelKind::EmbeddedCavity &&
      mismatch(p.N_modes * p.gamma_4, p.N_modes_wg * p.gamma_4_prime))
    r.warnings.push_back(
        "ExchangeImbalance: N_modes*gamma_4 != N_modes_wg*gamma_4_prime; "
        "total excitation will not be conserved");
  return r;
}

// Convenience wrapper: returns the params unchanged if valid, else throws a
// domain_error tagged with the first validation failure.
inline ModelParams validate_or_throw(const ModelParams& p, ModelKind k) {
  ValidationReport r = validate_params(p, k);
  if (!r.ok()) throw domain_error("InvalidParams", r.errors.front());
  return p;
}

// ---------------------------------------------------------------------------
// Thermal states

// Bose occupancy 1/(e^x - 1) for every active photon field and the Boltzmann
// TLS population m = M/(e^x + 1), both at the same inverse temperature x.
[[nodiscard]] inline State thermal_state(const ModelParams& p, ModelKind k,
                                         double x) {
  if (!(x > 0) || !std::isfinite(x))
    throw domain_error("NonPositiveX", "thermal_state requires x > 0");
  const double n = 1.0 / std::expm1(x);
  const double m = static_cast<double>(p.M) / (std::exp(x) + 1.0);
  State s;
  for (StateField f : active_fields(k))
    set(s, f, f == StateField::m ? m : n);
  return s;
}

// Checks the State invariants for the active fields of k.
inline void require_valid_state(const State& s, const ModelParams& p,
                                ModelKind k, const char* where) {
  for (StateField f : active_fields(k)) {
    const double v = get(s, f);
    if (!std::isfinite(v) || v < 0)
      throw domain_error("InvalidState", std::string(where) + ": field " +
                                             to_string(f) +
                                             " out of range (" +
                                             std::to_string(v) + ")");
    if (f == StateField::m && v > static_cast<double>(p.M))
      throw domain_error("InvalidState",
                         std::string(where) + ": m exceeds M");
  }
}

}  // namespace chiralrate
