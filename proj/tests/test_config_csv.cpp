#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <string>

#include "chiralrate/config.hpp"
#include "chiralrate/csv.hpp"
#include "chiralrate/integrate.hpp"
#include "chiralrate/presets.hpp"

using namespace chiralrate;

namespace {
bool bit_equal(double a, double b) {
  return std::memcmp(&a, &b, sizeof(double)) == 0;
}
}  // namespace

TEST_CASE("rate values accept unit suffixes") {
  RunConfig c;
  apply_setting(c, "gamma_dec", "10 kHz");
  CHECK(c.params.gamma_dec == 1e4);
  apply_setting(c, "gamma_t1", "2.5MHz");
  CHECK(c.params.gamma_t1 == 2.5e6);
  apply_setting(c, "gamma_0", "1 GHz");
  CHECK(c.params.gamma_0 == 1e9);
  apply_setting(c, "gamma_3", "300");
  CHECK(c.params.gamma_3 == 300.0);
  apply_setting(c, "gamma_5", "5 hz");
  CHECK(c.params.gamma_5 == 5.0);
  apply_setting(c, "gamma_6", "7 KHZ");  // case-insensitive
  CHECK(c.params.gamma_6 == 7e3);
  CHECK_THROWS_AS(apply_setting(c, "gamma_dec", "10 furlongs"), domain_error);
  CHECK_THROWS_AS(apply_setting(c, "gamma_dec", ""), domain_error);
  CHECK_THROWS_AS(apply_setting(c, "gamma_dec", "fast"), domain_error);
}

TEST_CASE("settings cover model, counts, grid, integrator and stochastic") {
  RunConfig c;
  apply_setting(c, "model", "closed-chiral");
  CHECK(c.kind == ModelKind::ClosedChiral);
  apply_setting(c, "M", "250");
  CHECK(c.params.M == 250);
  CHECK_THROWS_AS(apply_setting(c, "M", "2.5"), domain_error);
  apply_setting(c, "N_modes", "64");
  apply_setting(c, "N_modes_wg", "32");
  apply_setting(c, "x0", "1.5");
  CHECK(c.params.N_modes == 64.0);
  CHECK(c.params.x0 == 1.5);
  apply_setting(c, "t_end_s", "2e-6");
  CHECK(c.t_end == 2e-6);

  apply_setting(c, "grid.kind", "log");
  CHECK(c.grid.kind == SampleGrid::Kind::Log);
  apply_setting(c, "grid.points", "601");
  CHECK(c.grid.points == 601);
  apply_setting(c, "grid.t_min_s", "1e-8");
  CHECK(c.grid.t_min == 1e-8);
  CHECK_THROWS_AS(apply_setting(c, "grid.points", "1"), domain_error);
  CHECK_THROWS_AS(apply_setting(c, "grid.kind", "spiral"), domain_error);
  apply_setting(c, "grid.times_s", "0, 1e-6, 2e-6");
  CHECK(c.grid.kind == SampleGrid::Kind::Explicit);
  CHECK(c.grid.times == std::vector<double>{0.0, 1e-6, 2e-6});

  apply_setting(c, "integrator.rel_tol", "1e-12");
  apply_setting(c, "integrator.abs_tol", "1e-14");
  apply_setting(c, "integrator.max_step_s", "1e-7");
  CHECK(c.rel_tol == 1e-12);
  CHECK(c.max_step == 1e-7);

  apply_setting(c, "stochastic.n_traj", "500");
  apply_setting(c, "stochastic.seed", "7");
  apply_setting(c, "stochastic.threads", "2");
  CHECK(c.n_traj == 500);
  CHECK(c.seed == 7);
  CHECK(c.threads == 2);
  CHECK_THROWS_AS(apply_setting(c, "stochastic.n_traj", "0"), domain_error);

  apply_setting(c, "emit_relative_T", "yes");
  CHECK(c.emit_relative_T);
  apply_setting(c, "emit_relative_T", "off");
  CHECK(!c.emit_relative_T);
  CHECK_THROWS_AS(apply_setting(c, "emit_relative_T", "maybe"), domain_error);

  CHECK_THROWS_AS(apply_setting(c, "gamma_typo", "1"), domain_error);
  try {
    apply_setting(c, "gamma_typo", "1");
  } catch (const domain_error& e) {
    CHECK(e.tag() == "UnknownKey");
  }
}

TEST_CASE("config text: comments, blank lines, line-numbered errors") {
  RunConfig c;
  apply_config_text(c,
                    "# a comment line\n"
                    "model = blackbody\n"
                    "\n"
                    "gamma_t1 = 1 MHz  # trailing comment\n"
                    "M = 100\n",
                    "inline");
  CHECK(c.kind == ModelKind::BlackBody);
  CHECK(c.params.gamma_t1 == 1e6);
  CHECK(c.params.M == 100);

  try {
    apply_config_text(c, "model = blackbody\nthis line is wrong\n", "inline");
    FAIL("expected ConfigParse");
  } catch (const domain_error& e) {
    CHECK(std::string(e.what()).find("inline:2") != std::string::npos);
  }
  CHECK_THROWS_AS(apply_config_text(c, "= value\n", "inline"), domain_error);
}

TEST_CASE("missing config file is an IO error") {
  RunConfig c;
  try {
    apply_config_file(c, "/nonexistent/path/run.conf");
    FAIL("expected Io");
  } catch (const error& e) {
    CHECK(e.tag() == "Io");
  }
}

TEST_CASE("initial state: thermal base plus overrides") {
  RunConfig c = preset("fig2");
  SUBCASE("plain thermal at x0") {
    const State s = initial_state(c);
    CHECK(s.n_A == doctest::Approx(0.58197670686932642439).epsilon(1e-15));
    CHECK(s.n_B == doctest::Approx(0.58197670686932642439).epsilon(1e-15));
    CHECK(s.m == doctest::Approx(26.894142136999512075).epsilon(1e-15));
  }
  SUBCASE("separate photon and TLS temperatures") {
    c.init_x_photon = 0.5;
    c.init_x_tls = 2.0;
    const State s = initial_state(c);
    CHECK(s.n_A == doctest::Approx(1.5414940825367982841).epsilon(1e-14));
    CHECK(s.n_B == doctest::Approx(1.5414940825367982841).epsilon(1e-14));
    CHECK(s.m == doctest::Approx(11.920292202211755594).epsilon(1e-14));
  }
  SUBCASE("direct field overrides beat the temperature settings") {
    c.init_x_photon = 0.5;
    c.init_n_B = 0.125;
    const State s = initial_state(c);
    CHECK(s.n_A == doctest::Approx(1.5414940825367982841).epsilon(1e-14));
    CHECK(s.n_B == 0.125);
  }
  SUBCASE("overriding a field the model does not evolve is an error") {
    RunConfig bb = preset("blackbody-equilibration");
    bb.init_n_B = 0.5;
    CHECK_THROWS_AS((void)initial_state(bb), domain_error);
  }
  SUBCASE("overrides outside the physical range are rejected") {
    c.init_m = 1e6;  // > M
    CHECK_THROWS_AS((void)initial_state(c), domain_error);
    c.init_m.reset();
    c.init_x_photon = -1.0;
    CHECK_THROWS_AS((void)initial_state(c), domain_error);
  }
}

TEST_CASE("presets carry the published rate sets") {
  SUBCASE("fig2") {
    const RunConfig c = preset("fig2");
    CHECK(c.kind == ModelKind::OpenChiral);
    CHECK(c.params.gamma_dec == 1e4);
    CHECK(c.params.gamma_0 == 1e4);
    CHECK(c.params.gamma_t1 == 1e7);
    CHECK(c.params.gamma_t11 == 1e7);
    CHECK(c.params.gamma_t2 == 0);
    CHECK(c.params.gamma_t12 == 0);
    CHECK(c.params.N_modes == 100);
    CHECK(c.params.gamma_1() == doctest::Approx(1e5).epsilon(1e-15));
    CHECK(c.params.M == 100);
    CHECK(c.params.x0 == 1.0);
    CHECK(c.t_end == 5e-6);
    CHECK(c.grid.kind == SampleGrid::Kind::Linear);
    CHECK(c.grid.points == 1001);
    CHECK(c.preset_name == "fig2");
  }
  SUBCASE("fig3 uses a log grid with tight absolute tolerance") {
    const RunConfig c = preset("fig3");
    CHECK(c.t_end == 1e-3);
    CHECK(c.grid.kind == SampleGrid::Kind::Log);
    CHECK(c.grid.points == 601);
    CHECK(c.grid.t_min == 1e-8);
    CHECK(c.abs_tol == 1e-16);
  }
  SUBCASE("fig6 closes the loop with matched exchange rates") {
    const RunConfig c = preset("fig6");
    CHECK(c.kind == ModelKind::ClosedChiral);
    CHECK(c.params.gamma_dec_prime == 1e4);
    CHECK(c.params.gamma_3 == 1e4);
    CHECK(c.params.gamma_11() == doctest::Approx(1e5).epsilon(1e-15));
    CHECK(c.t_end == 1e-5);
    // mode-weighted exchange symmetric => conservative
    CHECK(c.params.N_modes * c.params.gamma_dec ==
          c.params.N_modes_wg * c.params.gamma_dec_prime);
  }
  SUBCASE("relaxation presets") {
    const RunConfig b = preset("blackbody-equilibration");
    CHECK(b.kind == ModelKind::BlackBody);
    CHECK(b.params.gamma_t1 == 1e6);
    CHECK(b.init_x_tls == 2.0);
    CHECK(b.init_x_photon == 0.5);
    const RunConfig e = preset("embedded-equilibrium");
    CHECK(e.kind == ModelKind::EmbeddedCavity);
    CHECK(e.params.gamma_6 == 1e2);
    CHECK(e.init_n_A.has_value());
    CHECK(*e.init_n_A == doctest::Approx(1.5 / std::expm1(1.0)).epsilon(1e-15));
  }
  SUBCASE("every preset builds a valid runnable configuration") {
    for (const std::string& name : preset_names()) {
      CAPTURE(name);
      const RunConfig c = preset(name);
      CHECK_NOTHROW((void)initial_state(c));
      CHECK_NOTHROW(validate_config(integrator_config(c)));
    }
  }
  SUBCASE("unknown preset") {
    try {
      (void)preset("fig99");
      FAIL("expected UnknownPreset");
    } catch (const domain_error& e) {
      CHECK(e.tag() == "UnknownPreset");
    }
  }
}

TEST_CASE("float cells survive the round trip bit for bit") {
  const double cases[] = {0.0,
                          -0.0,
                          0.1,
                          1.0 / 3.0,
                          2.5e6,
                          1e-300,
                          5e-324,  // smallest subnormal
                          std::numeric_limits<double>::max(),
                          std::numeric_limits<double>::min(),
                          -1.2345678901234567e-89,
                          std::numeric_limits<double>::infinity(),
                          -std::numeric_limits<double>::infinity()};
  for (const double v : cases) {
    CAPTURE(v);
    CHECK(bit_equal(parse_double(format_double(v)), v));
  }
  CHECK(std::isnan(parse_double(format_double(
      std::numeric_limits<double>::quiet_NaN()))));
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");

  CHECK_THROWS_AS((void)parse_double("abc"), domain_error);
  CHECK_THROWS_AS((void)parse_double("1.5x"), domain_error);
  CHECK_THROWS_AS((void)parse_double(""), domain_error);
}

TEST_CASE("simulation CSV layout") {
  // tiny single-reservoir run: three samples are enough to pin the layout
  ModelParams p;
  p.gamma_t1 = 1e6;
  p.N_modes = 100;
  p.M = 100;
  const VectorField f = make_field(ModelKind::BlackBody, p);
  IntegratorConfig ic;
  ic.t_end = 1e-6;
  ic.grid.points = 3;
  const Trajectory traj = integrate(f, thermal_state(p, f.kind, 1.0), ic);

  std::ostringstream os;
  write_simulation_csv(os, traj);
  std::istringstream is(os.str());
  const CsvTable t = parse_csv(is);

  REQUIRE(t.header.size() == 18);
  CHECK(t.header.front() == "t_s");
  CHECK(t.header.back() == "Q_ext_total");
  REQUIRE(t.rows.size() == 3);
  // single-reservoir runs leave the B/1/2/C and entropy-production columns empty
  for (const auto& row : t.rows) {
    CHECK(row[t.column("n_B")].empty());
    CHECK(row[t.column("n_C")].empty());
    CHECK(row[t.column("sigma_total")].empty());
    CHECK(!row[t.column("n_A")].empty());
    CHECK(!row[t.column("S_total_kB")].empty());
  }
  CHECK(parse_double(t.rows[0][t.column("t_s")]) == 0.0);
  CHECK(parse_double(t.rows[0][t.column("n_A")]) ==
        doctest::Approx(0.58197670686932642439).epsilon(1e-15));

  SUBCASE("zero occupancy reports an infinite inverse temperature") {
    Trajectory empty;
    empty.kind = ModelKind::BlackBody;
    empty.params = p;
    State s;  // n_A = 0, m = 0
    empty.samples.push_back({0.0, s});
    std::ostringstream os2;
    write_simulation_csv(os2, empty);
    std::istringstream is2(os2.str());
    const CsvTable t2 = parse_csv(is2);
    CHECK(t2.rows[0][t2.column("x_A")] == "inf");
    CHECK(t2.rows[0][t2.column("x_tls")] == "inf");
  }

  SUBCASE("relative temperature columns") {
    std::ostringstream os3;
    write_simulation_csv(os3, traj, CsvOptions{true});
    std::istringstream is3(os3.str());
    const CsvTable t3 = parse_csv(is3);
    REQUIRE(t3.header.size() == 23);
    CHECK(t3.header[18] == "T_rel_A");
    CHECK(t3.header[22] == "T_rel_tls");
    // thermal start at x0: T/T(0) = 1 at t = 0
    CHECK(parse_double(t3.rows[0][t3.column("T_rel_A")]) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(t3.rows[0][t3.column("T_rel_B")].empty());
  }
}

TEST_CASE("CSV round trip is byte-identical") {
  const RunConfig c = preset("fig2");
  IntegratorConfig ic = integrator_config(c);
  ic.grid.points = 25;
  const VectorField f = make_field(c.kind, c.params);
  const Trajectory traj = integrate(f, initial_state(c), ic);

  std::ostringstream first;
  write_simulation_csv(first, traj);
  std::istringstream parse_in(first.str());
  const CsvTable t = parse_csv(parse_in);
  std::ostringstream second;
  write_csv(second, t);
  CHECK(first.str() == second.str());
  CHECK(t.rows.size() == 25);
}

TEST_CASE("CSV structural errors") {
  std::istringstream empty("");
  CHECK_THROWS_AS((void)parse_csv(empty), domain_error);
  std::istringstream ragged("a,b\n1,2\n3\n");
  CHECK_THROWS_AS((void)parse_csv(ragged), domain_error);
  std::istringstream fine("a,b\n1,2\n");
  const CsvTable t = parse_csv(fine);
  CHECK(t.column("b") == 1);
  CHECK_THROWS_AS((void)t.column("missing"), domain_error);
}
