#pragma once

// Canned scenario configurations. The fig* presets carry the published rate
// sets for the chiral waveguide systems; M is not published, so those presets
// use the value calibrated by the entropy-production zero-crossing scan
// (scan-m) and remain overridable. Time windows are chosen to bracket the
// relevant timescales (tau_char = 1/gamma_t1 = 0.1 us, bath losses ~ 1/gamma_dec).

#include <cmath>
#include <string>
#include <vector>

#include "chiralrate/config.hpp"
#include "chiralrate/errors.hpp"
#include "chiralrate/model.hpp"

namespace chiralrate {

[[nodiscard]] inline std::vector<std::string> preset_names() {
  return {"fig2", "fig3", "fig4", "fig5",
          "fig6", "fig7", "blackbody-equilibration", "embedded-equilibrium"};
}

namespace detail {

// open chiral waveguide, both rotation senses of the published set
inline RunConfig open_chiral_base() {
  RunConfig c;
  c.kind = ModelKind::OpenChiral;
  c.params = ModelParams{};
  c.params.gamma_dec = 1e4;  // 10 kHz
  c.params.gamma_0 = 1e4;    // 10 kHz
  c.params.gamma_t1 = 1e7;   // 10 MHz  => gamma_1 = 100 kHz at N = 100
  c.params.gamma_t11 = 1e7;  // 10 MHz
  c.params.gamma_t2 = 0;
  c.params.gamma_t12 = 0;
  c.params.N_modes = 100;
  c.params.N_modes_wg = 100;
  c.params.M = 100;  // calibrated: sigma_total zero crossing at 0.75 us
  c.params.x0 = 1;
  c.rel_tol = 1e-10;
  c.abs_tol = 1e-12;
  return c;
}

inline RunConfig closed_chiral_base() {
  RunConfig c;
  c.kind = ModelKind::ClosedChiral;
  c.params = ModelParams{};
  c.params.gamma_dec = 1e4;        // 10 kHz
  c.params.gamma_dec_prime = 1e4;  // 10 kHz
  c.params.gamma_0 = 1e4;          // 10 kHz
  c.params.gamma_3 = 1e4;          // 10 kHz
  c.params.gamma_t1 = 1e7;         // 10 MHz => gamma_1 = 100 kHz
  c.params.gamma_t11 = 1e7;        // 10 MHz => gamma_11 = 100 kHz
  c.params.gamma_t2 = 0;
  c.params.gamma_t12 = 0;
  c.params.N_modes = 100;
  c.params.N_modes_wg = 100;
  c.params.M = 100;  // same TLS collection as the open presets
  c.params.x0 = 1;
  c.rel_tol = 1e-10;
  c.abs_tol = 1e-12;
  return c;
}

}  // namespace detail

[[nodiscard]] inline RunConfig preset(const std::string& name) {
  RunConfig c;
  if (name == "fig2") {
    // reservoir/TLS temperatures on the us scale
    c = detail::open_chiral_base();
    c.t_end = 5e-6;
    c.grid.kind = SampleGrid::Kind::Linear;
    c.grid.points = 1001;
  } else if (name == "fig3") {
    // occupation decay on the bath-loss scale; log sampling
    c = detail::open_chiral_base();
    c.t_end = 1e-3;
    c.grid.kind = SampleGrid::Kind::Log;
    c.grid.points = 601;
    c.grid.t_min = 1e-8;
    c.abs_tol = 1e-16;  // occupations fall ~9 decades; keep relative fidelity
  } else if (name == "fig4") {
    // entropy production sign change
    c = detail::open_chiral_base();
    c.t_end = 5e-6;
    c.grid.kind = SampleGrid::Kind::Linear;
    c.grid.points = 1001;
  } else if (name == "fig5") {
    // total entropy decay of the closed system, full equilibration window
    c = detail::closed_chiral_base();
    c.t_end = 1e-3;
    c.grid.kind = SampleGrid::Kind::Log;
    c.grid.points = 601;
    c.grid.t_min = 1e-8;
    c.abs_tol = 1e-14;
  } else if (name == "fig6") {
    // short-time occupations of the closed system
    c = detail::closed_chiral_base();
    c.t_end = 1e-5;
    c.grid.kind = SampleGrid::Kind::Linear;
    c.grid.points = 1001;
  } else if (name == "fig7") {
    // long-time approach to the chiral steady state
    c = detail::closed_chiral_base();
    c.t_end = 1e-3;
    c.grid.kind = SampleGrid::Kind::Log;
    c.grid.points = 601;
    c.grid.t_min = 1e-8;
    c.abs_tol = 1e-14;
  } else if (name == "blackbody-equilibration") {
    // hot TLS + cold radiation relaxing to a common temperature
    c.kind = ModelKind::BlackBody;
    c.params = ModelParams{};
    c.params.gamma_t1 = 1e6;  // 1 MHz per TLS
    c.params.N_modes = 100;
    c.params.M = 100;
    c.params.x0 = 1;
    c.init_x_tls = 2.0;
    c.init_x_photon = 0.5;
    c.t_end = 2e-5;
    c.grid.kind = SampleGrid::Kind::Linear;
    c.grid.points = 2001;
    c.rel_tol = 1e-10;
    c.abs_tol = 1e-12;
  } else if (name == "embedded-equilibrium") {
    // perturbed cavity-in-cavity relaxing back to mutual equilibrium
    c.kind = ModelKind::EmbeddedCavity;
    c.params = ModelParams{};
    c.params.gamma_4 = 1e4;        // 10 kHz
    c.params.gamma_4_prime = 1e4;  // 10 kHz
    c.params.gamma_5 = 1e4;        // 10 kHz
    c.params.gamma_6 = 1e2;        // 100 Hz
    c.params.N_modes = 100;
    c.params.N_modes_wg = 100;
    c.params.M = 10;
    c.params.x0 = 1;
    const double n_th = 1.0 / std::expm1(1.0);
    c.init_n_A = 1.5 * n_th;
    c.init_n_C = 0.8 * n_th;
    c.t_end = 2.5e-3;
    c.grid.kind = SampleGrid::Kind::Linear;
    c.grid.points = 2001;
    c.rel_tol = 1e-10;
    c.abs_tol = 1e-12;
  } else {
    throw domain_error("UnknownPreset", "unknown preset '" + name +
                                            "' (try: fig2..fig7, "
                                            "blackbody-equilibration, "
                                            "embedded-equilibrium)");
  }
  c.preset_name = name;
  return c;
}

}  // namespace chiralrate
