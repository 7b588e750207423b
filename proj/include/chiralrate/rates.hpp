#pragma once

// Right-hand sides of the four rate-equation systems. Each function is a pure
// map State -> dState/dt with no clamping: positivity at the boundary is
// structural (every loss term carries a factor of the decaying quantity), and
// numerical undershoot is the integrator's job.

#include <cmath>

#include "chiralrate/errors.hpp"
#include "chiralrate/model.hpp"

namespace chiralrate {

// Single reservoir of N modes in exchange with the TLS ensemble. gamma_t1 is
// the per-TLS emission rate gamma' summed over the window; the per-mode rate
// is gamma = gamma'/N. The occupancy lives in n_A.
[[nodiscard]] inline State rhs_blackbody(const State& s, const ModelParams& p) {
  const double gp = p.gamma_t1;
  const double g = gp / p.N_modes;
  const double n = s.n_A, m = s.m, M = static_cast<double>(p.M);
  State d;
  d.n_A = g * (m * (n + 1) - (M - m) * n);
  d.m = gp * ((M - m) * n - m * (n + 1));
  return d;
}

// Reservoirs A and B with chiral TLS coupling (absorb from A, emit toward B
// at gamma_t1; the mirrored path at gamma_t2) plus channel losses into a
// T = 0 bath (gamma_dec, gamma_t11, gamma_t12).
[[nodiscard]] inline State rhs_open_chiral(const State& s, const ModelParams& p) {
  const double g1 = p.gamma_1(), g2 = p.gamma_2();
  const double nA = s.n_A, nB = s.n_B, m = s.m, M = static_cast<double>(p.M);
  State d;
  d.n_A = -2 * p.gamma_dec * nA + p.gamma_0 * (nB - nA) - g1 * (M - m) * nA +
          g2 * m * (nA + 1);
  d.n_B = -2 * p.gamma_dec * nB + p.gamma_0 * (nA - nB) - g2 * (M - m) * nB +
          g1 * m * (nB + 1);
  d.m = -(p.gamma_t11 + p.gamma_t12) * m +
        p.gamma_t1 * (nA * (M - m) - (nB + 1) * m) +
        p.gamma_t2 * (nB * (M - m) - (nA + 1) * m);
  return d;
}

// Closed loop: reservoirs A/B exchange photons with waveguide channels 1/2
// (gamma_dec, gamma_dec_prime), the TLS couple chirally to the reservoirs
// through the channels (stimulated (n+1) enhancement on the channel factors),
// and the channels mix through the reservoirs (gamma_3). No external bath.
[[nodiscard]] inline State rhs_closed_chiral(const State& s, const ModelParams& p) {
  const double g1 = p.gamma_1(), g2 = p.gamma_2();
  const double g11 = p.gamma_11(), g12 = p.gamma_12();
  const double nA = s.n_A, nB = s.n_B, n1 = s.n_1, n2 = s.n_2;
  const double m = s.m, M = static_cast<double>(p.M);
  State d;
  d.n_A = p.gamma_dec * (n1 + n2 - 2 * nA) - g1 * (M - m) * nA * (n1 + 1) +
          g2 * m * (nA + 1) * (n2 + 1) +
          p.gamma_0 * ((n2 + 1) * (nA + 1) * nB - (n1 + 1) * (nB + 1) * nA);
  d.n_B = p.gamma_dec * (n1 + n2 - 2 * nB) - g2 * (M - m) * nB * (n2 + 1) +
          g1 * m * (nB + 1) * (n1 + 1) +
          p.gamma_0 * ((n1 + 1) * (nB + 1) * nA - (n2 + 1) * (nA + 1) * nB);
  d.n_1 = p.gamma_dec_prime * (nA + nB - 2 * n1) -
          g11 * ((M - m) * n1 - m * (n1 + 1)) +
          p.gamma_3 * (nA + nB + 2) * (n2 - n1);
  d.n_2 = p.gamma_dec_prime * (nA + nB - 2 * n2) -
          g12 * ((M - m) * n2 - m * (n2 + 1)) +
          p.gamma_3 * (nA + nB + 2) * (n1 - n2);
  d.m = p.gamma_t11 * ((M - m) * n1 - m * (n1 + 1)) +
        p.gamma_t12 * ((M - m) * n2 - m * (n2 + 1)) -
        m * (p.gamma_t1 * (nB + 1) * (n1 + 1) +
             p.gamma_t2 * (nA + 1) * (n2 + 1)) +
        (M - m) * (p.gamma_t1 * nA * (n1 + 1) + p.gamma_t2 * nB * (n2 + 1));
  return d;
}

// Cavity modes A embedded in a waveguide continuum C: direct mode exchange
// (gamma_4, gamma_4_prime), TLS <-> waveguide coupling (gamma_5), and a
// waveguide-enhanced TLS <-> cavity coupling with the (n_C+1)^2 density
// factor (gamma_6). The m equation is the excitation-conserving counterpart
// with weights N_A = N_modes, N_C = N_modes_wg.
[[nodiscard]] inline State rhs_embedded(const State& s, const ModelParams& p) {
  const double nA = s.n_A, nC = s.n_C, m = s.m, M = static_cast<double>(p.M);
  const double enh = (nC + 1) * (nC + 1);
  State d;
  d.n_A = p.gamma_4 * (nC - nA) +
          p.gamma_6 * enh * (-nA * (M - m) + (nA + 1) * m);
  d.n_C = p.gamma_4_prime * (nA - nC) - p.gamma_5 * nC * (M - m) +
          p.gamma_5 * (nC + 1) * m;
  d.m = p.N_modes_wg * p.gamma_5 * (nC * (M - m) - (nC + 1) * m) +
        p.N_modes * p.gamma_6 * enh * (nA * (M - m) - (nA + 1) * m);
  return d;
}

[[nodiscard]] inline State eval_rhs(ModelKind k, const State& s,
                                    const ModelParams& p) {
  switch (k) {
    case ModelKind::BlackBody: return rhs_blackbody(s, p);
    case ModelKind::OpenChiral: return rhs_open_chiral(s, p);
    case ModelKind::ClosedChiral: return rhs_closed_chiral(s, p);
    case ModelKind::EmbeddedCavity: return rhs_embedded(s, p);
  }
  return {};
}

// A model's vector field as a value: (kind, params) plus evaluation. Pure and
// stateless; freely shareable between threads.
struct VectorField {
  ModelKind kind{};
  ModelParams params{};

  [[nodiscard]] State operator()(const State& s) const {
    return eval_rhs(kind, s, params);
  }

  [[nodiscard]] StateVec eval_packed(const StateVec& y) const {
    return pack(kind, eval_rhs(kind, unpack(kind, y), params));
  }
};

// Validates and bundles (kind, params).
[[nodiscard]] inline VectorField make_field(ModelKind k, const ModelParams& p) {
  return VectorField{k, validate_or_throw(p, k)};
}

// Total excitation number m + sum of mode-weighted photon occupancies. The
// open model radiates photons into a bath it does not track, so the quantity
// is undefined there.
[[nodiscard]] inline double conserved_excitation(const State& s,
                                                 const ModelParams& p,
                                                 ModelKind k) {
  if (k == ModelKind::OpenChiral)
    throw domain_error("NotConservative",
                       "the open model loses photons to the bath; no "
                       "conserved excitation exists");
  const StateVec y = pack(k, s);
  const StateVec w = excitation_weights(k, p);
  double e = 0;
  for (std::size_t i = 0; i < y.size(); ++i) e += w[i] * y[i];
  return e;
}

}  // namespace chiralrate
