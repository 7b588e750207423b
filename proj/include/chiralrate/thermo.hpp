#pragma once

// Effective temperatures, subsystem entropies, bath heat flows, and the
// entropy-production decomposition. Everything is reported dimensionless:
// inverse temperatures as x = hbar*Omega/(k_B T), entropies in k_B, heat
// flows in quanta (hbar*Omega) per second.

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "chiralrate/errors.hpp"
#include "chiralrate/integrate.hpp"
#include "chiralrate/model.hpp"
#include "chiralrate/rates.hpp"

namespace chiralrate {

// x = ln((n+1)/n); the exact inverse of the Bose occupancy.
[[nodiscard]] inline double inverse_temperature_photon(double n) {
  if (!(n > 0) || !std::isfinite(n))
    throw domain_error("NonPositiveOccupancy",
                       "photon temperature needs n > 0");
  return std::log1p(1.0 / n);
}

// x = ln((M-m)/m); the exact inverse of the two-level Boltzmann ratio.
// The boundaries are reported as signed infinities (zero temperature at
// m = 0, inverted zero temperature at m = M), not as errors.
[[nodiscard]] inline double inverse_temperature_tls(double m, double M) {
  if (!(m >= 0) || !(m <= M) || !std::isfinite(m))
    throw domain_error("OutOfRangeM", "tls temperature needs 0 <= m <= M");
  if (m == 0) return std::numeric_limits<double>::infinity();
  if (m == M) return -std::numeric_limits<double>::infinity();
  return std::log((M - m) / m);
}

// Gibbs entropy of M independent two-level systems at mean excitation m,
// S = -M [p ln p + (1-p) ln(1-p)], p = m/M, with 0 ln 0 == 0.
[[nodiscard]] inline double entropy_tls(double m, double M) {
  const double p = std::clamp(m / M, 0.0, 1.0);
  const double q = 1.0 - p;
  double s = 0;
  if (p > 0) s -= p * std::log(p);
  if (q > 0) s -= q * std::log(q);
  return M * s;
}

// Entropy of one bosonic mode at occupancy n: (n+1)ln(n+1) - n ln n.
[[nodiscard]] inline double entropy_photon_mode(double n) {
  if (n <= 0) return 0;
  return (n + 1) * std::log1p(n) - n * std::log(n);
}

// Total entropy: TLS term plus mode entropies weighted by the mode counts of
// each active photon subsystem.
[[nodiscard]] inline double entropy_total(const State& s, const ModelParams& p,
                                          ModelKind k) {
  const StateVec y = pack(k, s);
  const StateVec w = excitation_weights(k, p);
  double total = entropy_tls(s.m, static_cast<double>(p.M));
  const auto fields = active_fields(k);
  for (std::size_t i = 0; i < y.size(); ++i)
    if (fields[i] != StateField::m) total += w[i] * entropy_photon_mode(y[i]);
  return total;
}

struct HeatFlows {
  double Q_A = 0, Q_B = 0, Q_tls = 0;  // [hbar*Omega / s], outflow >= 0
};

// Heat leaving the system into the T = 0 bath: the channel-end losses of the
// two reservoirs and the spontaneous TLS emission into the channels. Only the
// open model has a bath.
[[nodiscard]] inline HeatFlows heat_flow_external(const State& s,
                                                  const ModelParams& p,
                                                  ModelKind k) {
  if (k != ModelKind::OpenChiral)
    throw domain_error("NoBath", "only the open model couples to a bath");
  return HeatFlows{2 * p.N_modes * p.gamma_dec * s.n_A,
                   2 * p.N_modes * p.gamma_dec * s.n_B,
                   (p.gamma_t11 + p.gamma_t12) * s.m};
}

struct EntropyProduction {
  double sigma_AB = 0, sigma_Atls = 0, sigma_Btls = 0, total = 0;  // [k_B/s]
};

namespace detail {
// Logarithm with the occupancy floored at 1e-15. The floor enters logs only;
// flux prefactors always use raw values, and a vanishing prefactor zeroes
// its term outright, so the x ln x-type limits at the boundary come out 0.
inline double guarded_log(double v) { return std::log(std::max(v, 1e-15)); }
}  // namespace detail

// Entropy production of the open model, split into the A<->B exchange and
// the two chiral TLS couplings. The mode count N enters as gamma_t1/gamma_1.
[[nodiscard]] inline EntropyProduction entropy_production(const State& s,
                                                          const ModelParams& p) {
  using detail::guarded_log;
  const double nA = s.n_A, nB = s.n_B, m = s.m, M = static_cast<double>(p.M);
  const double xA = guarded_log(nA + 1) - guarded_log(nA);
  const double xB = guarded_log(nB + 1) - guarded_log(nB);
  const double xT = guarded_log(M - m) - guarded_log(m);

  EntropyProduction out;
  const double flux_ab = p.N_modes * p.gamma_0 * (nB - nA);
  out.sigma_AB = flux_ab == 0 ? 0 : flux_ab * (xA - xB);
  const double flux_at = p.gamma_t2 * m * (nA + 1) - p.gamma_t1 * nA * (M - m);
  out.sigma_Atls = flux_at == 0 ? 0 : flux_at * (xA - xT);
  const double flux_bt = p.gamma_t1 * m * (nB + 1) - p.gamma_t2 * nB * (M - m);
  out.sigma_Btls = flux_bt == 0 ? 0 : flux_bt * (xB - xT);
  out.total = out.sigma_AB + out.sigma_Atls + out.sigma_Btls;
  return out;
}

// Boundary entropy flow J = -(Q_A x_A + Q_B x_B + Q_tls x_tls) [k_B/s], with
// the same guarded logs and zero-prefactor convention as entropy_production.
[[nodiscard]] inline double entropy_flow_external(const State& s,
                                                  const ModelParams& p) {
  using detail::guarded_log;
  const HeatFlows q = heat_flow_external(s, p, ModelKind::OpenChiral);
  const double xA = guarded_log(s.n_A + 1) - guarded_log(s.n_A);
  const double xB = guarded_log(s.n_B + 1) - guarded_log(s.n_B);
  const double xT = guarded_log(static_cast<double>(p.M) - s.m) -
                    guarded_log(s.m);
  double j = 0;
  if (q.Q_A != 0) j -= q.Q_A * xA;
  if (q.Q_B != 0) j -= q.Q_B * xB;
  if (q.Q_tls != 0) j -= q.Q_tls * xT;
  return j;
}

// Per-sample thermodynamic observables. Fields that are undefined for the
// model kind are NaN.
struct ThermoReport {
  double t = 0;                                      // [s]
  double x_A = 0, x_B = 0, x_1 = 0, x_2 = 0, x_tls = 0;
  double S_tls = 0, S_A = 0, S_B = 0, S_wg = 0, S_total = 0;  // [k_B]
  double Q_ext_total = 0;                            // [hbar*Omega/s]
  double J_entropy = 0;                              // [k_B/s]
  double sigma_AB = 0, sigma_Atls = 0, sigma_Btls = 0, sigma_total = 0;
};

[[nodiscard]] inline ThermoReport thermo_report(const State& s,
                                                const ModelParams& p,
                                                ModelKind k, double t = 0) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  auto x_of = [](double n) {
    return n > 0 ? inverse_temperature_photon(n)
                 : std::numeric_limits<double>::infinity();
  };
  ThermoReport r;
  r.t = t;
  r.x_A = r.x_B = r.x_1 = r.x_2 = nan;
  r.S_A = r.S_B = r.S_wg = nan;
  r.Q_ext_total = r.J_entropy = nan;
  r.sigma_AB = r.sigma_Atls = r.sigma_Btls = r.sigma_total = nan;

  r.x_tls = inverse_temperature_tls(s.m, static_cast<double>(p.M));
  r.S_tls = entropy_tls(s.m, static_cast<double>(p.M));
  r.S_total = entropy_total(s, p, k);
  r.x_A = x_of(s.n_A);
  r.S_A = p.N_modes * entropy_photon_mode(s.n_A);
  switch (k) {
    case ModelKind::BlackBody:
      break;
    case ModelKind::OpenChiral: {
      r.x_B = x_of(s.n_B);
      r.S_B = p.N_modes * entropy_photon_mode(s.n_B);
      const HeatFlows q = heat_flow_external(s, p, k);
      r.Q_ext_total = q.Q_A + q.Q_B + q.Q_tls;
      r.J_entropy = entropy_flow_external(s, p);
      const EntropyProduction sp = entropy_production(s, p);
      r.sigma_AB = sp.sigma_AB;
      r.sigma_Atls = sp.sigma_Atls;
      r.sigma_Btls = sp.sigma_Btls;
      r.sigma_total = sp.total;
      break;
    }
    case ModelKind::ClosedChiral:
      r.x_B = x_of(s.n_B);
      r.x_1 = x_of(s.n_1);
      r.x_2 = x_of(s.n_2);
      r.S_B = p.N_modes * entropy_photon_mode(s.n_B);
      r.S_wg = p.N_modes_wg *
               (entropy_photon_mode(s.n_1) + entropy_photon_mode(s.n_2));
      break;
    case ModelKind::EmbeddedCavity:
      r.S_wg = p.N_modes_wg * entropy_photon_mode(s.n_C);
      break;
  }
  return r;
}

namespace detail {

// Fornberg finite-difference weights: c[j] such that f'(z) ~= sum c[j] f(x[j])
// for arbitrary (distinct) nodes x[0..n).
inline void fd_weights_first_derivative(double z, const double* x, int n,
                                        double* c) {
  constexpr int m = 1;
  double C[8][m + 1] = {};
  C[0][0] = 1;
  double c1 = 1, c4 = x[0] - z;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1;
    const double c5 = c4;
    c4 = x[i] - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          C[i][k] = c1 * (k * C[i - 1][k - 1] - c5 * C[i - 1][k]) / c2;
        C[i][0] = -c1 * c5 * C[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k)
        C[j][k] = (c4 * C[j][k] - k * C[j][k - 1]) / c3;
      C[j][0] = c4 * C[j][0] / c3;
    }
    c1 = c2;
  }
  for (int j = 0; j < n; ++j) c[j] = C[j][m];
}

}  // namespace detail

// Cross-validates the entropy bookkeeping of the open model: differentiates
// entropy_total along the trajectory with 4th-order finite differences
// (5-point stencils, one-sided at the ends — independent of the integrator's
// dense output) and compares against J_entropy + sigma_total. Returns the
// maximum absolute discrepancy [k_B/s] over the sample grid.
[[nodiscard]] inline double entropy_balance_residual(const Trajectory& traj,
                                                     const ModelParams& p) {
  if (traj.kind != ModelKind::OpenChiral)
    throw domain_error("NoBath",
                       "entropy balance bookkeeping applies to the open model");
  const std::size_t n = traj.samples.size();
  if (n < 5)
    throw domain_error("InvalidConfig",
                       "need at least 5 samples for 4th-order differences");
  const double M = static_cast<double>(p.M);
  std::vector<double> s_tot(n), rhs(n), ts(n);
  for (std::size_t i = 0; i < n; ++i) {
    const State& st = traj.samples[i].state;
    if (!(st.n_A > 0) || !(st.n_B > 0) || !(st.m > 0) || !(st.m < M))
      throw domain_error("BoundaryState",
                         "sample outside the strictly interior domain at t = " +
                             std::to_string(traj.samples[i].t));
    ts[i] = traj.samples[i].t;
    s_tot[i] = entropy_total(st, p, traj.kind);
    rhs[i] = entropy_flow_external(st, p) + entropy_production(st, p).total;
  }
  double max_resid = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t w0 =
        std::min(std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(i) - 2),
                 static_cast<std::ptrdiff_t>(n - 5));
    double c[5];
    detail::fd_weights_first_derivative(ts[i], &ts[w0], 5, c);
    double dsdt = 0;
    for (int j = 0; j < 5; ++j) dsdt += c[j] * s_tot[w0 + j];
    max_resid = std::max(max_resid, std::abs(dsdt - rhs[i]));
  }
  return max_resid;
}

}  // namespace chiralrate
