#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "chiralrate/jump.hpp"
#include "chiralrate/model.hpp"
#include "chiralrate/rates.hpp"

using namespace chiralrate;

namespace {

ModelParams open_params() {
  ModelParams p;
  p.gamma_dec = 1e4;
  p.gamma_0 = 1e4;
  p.gamma_t1 = 1e7;
  p.gamma_t2 = 3e6;
  p.gamma_t11 = 1e7;
  p.gamma_t12 = 4e6;
  p.N_modes = 100;
  p.M = 100;
  return p;
}

ModelParams closed_params() {
  ModelParams p = open_params();
  p.gamma_dec_prime = 1e4;
  p.gamma_3 = 1e4;
  p.N_modes_wg = 100;
  return p;
}

ModelParams embedded_params() {
  ModelParams p;
  p.gamma_4 = 1e4;
  p.gamma_4_prime = 2e4;
  p.gamma_5 = 1e4;
  p.gamma_6 = 1e2;
  p.N_modes = 100;
  p.N_modes_wg = 50;
  p.M = 10;
  return p;
}

ModelParams blackbody_params() {
  ModelParams p;
  p.gamma_t1 = 1e6;
  p.N_modes = 100;
  p.M = 100;
  return p;
}

JumpMicrostate random_microstate(ModelKind k, const ModelParams& p,
                                 std::mt19937_64& gen) {
  std::uniform_int_distribution<std::int64_t> photons(0, 400);
  std::uniform_int_distribution<std::int64_t> tls(0, p.M);
  JumpMicrostate ms;
  ms.n = state_dimension(k);
  for (std::size_t i = 0; i + 1 < ms.n; ++i) ms[i] = photons(gen);
  ms[ms.n - 1] = tls(gen);
  return ms;
}

}  // namespace

TEST_CASE("splitmix64 reproduces the reference stream") {
  rng::SplitMix64 g(0);
  CHECK(g.next() == 0xe220a8397b1dcdafull);
  CHECK(g.next() == 0x6e789e6aa1b965f4ull);
  CHECK(g.next() == 0x06c45d188009454full);
  CHECK(g.next() == 0xf88bb8a8724c81ecull);

  rng::SplitMix64 g2(1234567);
  CHECK(g2.next() == 0x599ed017fb08fc85ull);
  CHECK(g2.next() == 0x2c73f08458540fa5ull);

  rng::SplitMix64 g3(42);
  const double u = g3.uniform();
  CHECK(u == doctest::Approx(0.7415648787718233).epsilon(1e-15));
  CHECK(u >= 0.0);
  CHECK(u < 1.0);
}

TEST_CASE("per-trajectory seeds are deterministic and collision-free") {
  CHECK(rng::derive_seed(42, 0) == 0x28efe333b266f103ull);
  CHECK(rng::derive_seed(42, 1) == 0x47526757130f9f52ull);
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i)
    seen.insert(rng::derive_seed(7, i));
  CHECK(seen.size() == 10000);
}

TEST_CASE("microstate round trip is exact on integer-consistent states") {
  const ModelParams p = closed_params();
  State s;
  s.n_A = 0.58;  // 58 photons over 100 modes
  s.n_B = 1.23;
  s.n_1 = 0.07;
  s.n_2 = 0.0;
  s.m = 42;
  const JumpMicrostate ms =
      microstate_from_state(s, p, ModelKind::ClosedChiral);
  CHECK(ms[0] == 58);
  CHECK(ms[1] == 123);
  CHECK(ms[2] == 7);
  CHECK(ms[3] == 0);
  CHECK(ms[4] == 42);
  const State back = state_from_microstate(ms, p, ModelKind::ClosedChiral);
  CHECK(back.n_A == doctest::Approx(0.58).epsilon(1e-15));
  CHECK(back.m == 42.0);
}

TEST_CASE("event channels reproduce the deterministic drift exactly") {
  // For every model the weighted sum of propensity*delta over channels must
  // equal the rate-equation RHS at the same per-mode state: the jump process
  // and the ODE are two renderings of one generator.
  const std::pair<ModelKind, ModelParams> cases[] = {
      {ModelKind::BlackBody, blackbody_params()},
      {ModelKind::OpenChiral, open_params()},
      {ModelKind::ClosedChiral, closed_params()},
      {ModelKind::EmbeddedCavity, embedded_params()},
  };
  std::mt19937_64 gen(123);
  for (const auto& [k, p] : cases) {
    CAPTURE(to_string(k));
    const auto channels = build_channels(k, p);
    const StateVec w = excitation_weights(k, p);
    const std::size_t dim = state_dimension(k);
    for (int trial = 0; trial < 1000; ++trial) {
      const JumpMicrostate ms = random_microstate(k, p, gen);
      const State view = state_from_microstate(ms, p, k);
      const StateVec rhs = pack(k, eval_rhs(k, view, p));
      for (std::size_t i = 0; i < dim; ++i) {
        double drift = 0, mag = 0;
        for (const auto& c : channels) {
          const double term = c.propensity(view) * c.delta[i] / w[i];
          drift += term;
          mag += std::abs(term);
        }
        CHECK(std::abs(drift - rhs[i]) <= 1e-12 * (mag + 1.0));
      }
    }
  }
}

TEST_CASE("channel tables") {
  SUBCASE("single reservoir has one emission and one absorption channel") {
    const auto ch = build_channels(ModelKind::BlackBody, blackbody_params());
    REQUIRE(ch.size() == 2);
    CHECK(ch[0].name == "tls-emit");
    CHECK(ch[1].name == "tls-absorb");
    CHECK(!ch[0].bath);
  }
  SUBCASE("zero-rate channels are omitted") {
    ModelParams p = open_params();
    p.gamma_t2 = 0;  // one chiral path switched off
    const auto ch = build_channels(ModelKind::OpenChiral, p);
    std::vector<std::string> names;
    for (const auto& c : ch) names.push_back(c.name);
    const std::vector<std::string> expect = {
        "loss-A",        "loss-B",        "transfer-A-to-B",
        "transfer-B-to-A", "spont-emit-1", "spont-emit-2",
        "absorb-from-A", "emit-toward-B"};
    CHECK(names == expect);
    // bath flags: the channel losses and spontaneous decays have no reverse
    for (const auto& c : ch) {
      const bool is_bath = c.name.rfind("loss-", 0) == 0 ||
                           c.name.rfind("spont-", 0) == 0;
      CHECK(c.bath == is_bath);
    }
  }
  SUBCASE("full closed and embedded tables") {
    // 8 reservoir<->channel hops, 4 TLS<->channel, 2 mixing, 2 transfer,
    // 4 chiral TLS couplings
    CHECK(build_channels(ModelKind::ClosedChiral, closed_params()).size() ==
          20);
    CHECK(build_channels(ModelKind::EmbeddedCavity, embedded_params()).size() ==
          6);
  }
  SUBCASE("mismatched exchange rates cannot form a conserving jump process") {
    ModelParams p = closed_params();
    p.gamma_dec_prime = 3e4;
    CHECK_THROWS_AS((void)build_channels(ModelKind::ClosedChiral, p),
                    domain_error);
    ModelParams q = embedded_params();
    q.gamma_4_prime = q.gamma_4;  // N != N' makes this imbalanced
    CHECK_THROWS_AS((void)build_channels(ModelKind::EmbeddedCavity, q),
                    domain_error);
  }
}

TEST_CASE("jump trajectories conserve the integer invariant exactly") {
  SUBCASE("single reservoir") {
    const ModelParams p = blackbody_params();
    JumpMicrostate s0;
    s0.n = 2;
    s0[0] = 58;
    s0[1] = 27;
    const JumpTrajectory traj =
        simulate_jump(ModelKind::BlackBody, p, s0, 1.0, 99, 200000);
    CHECK(traj.events == 200000);  // budget reached, not absorbed
    const std::int64_t e0 = s0[0] + s0[1];
    for (const auto& s : traj.states) {
      CHECK(s[0] + s[1] == e0);
      CHECK(s[0] >= 0);
      CHECK(s[1] >= 0);
      CHECK(s[1] <= p.M);
    }
  }
  SUBCASE("closed loop") {
    const ModelParams p = closed_params();
    JumpMicrostate s0;
    s0.n = 5;
    s0[0] = 58;
    s0[1] = 58;
    s0[2] = 58;
    s0[3] = 58;
    s0[4] = 27;
    const JumpTrajectory traj =
        simulate_jump(ModelKind::ClosedChiral, p, s0, 1.0, 7, 50000);
    const std::int64_t e0 = s0[0] + s0[1] + s0[2] + s0[3] + s0[4];
    for (const auto& s : traj.states) {
      CHECK(s[0] + s[1] + s[2] + s[3] + s[4] == e0);
      for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i] >= 0);
      CHECK(s[4] <= p.M);
    }
  }
  SUBCASE("embedded cavity conserves the mode-weighted total") {
    // N = 100, N' = 50: counts are already totals, the invariant is the sum
    const ModelParams p = embedded_params();
    JumpMicrostate s0;
    s0.n = 3;
    s0[0] = 58;
    s0[1] = 29;
    s0[2] = 5;
    const JumpTrajectory traj =
        simulate_jump(ModelKind::EmbeddedCavity, p, s0, 1.0, 3, 50000);
    const std::int64_t e0 = s0[0] + s0[1] + s0[2];
    for (const auto& s : traj.states) CHECK(s[0] + s[1] + s[2] == e0);
  }
}

TEST_CASE("trajectories are reproducible and seed-sensitive") {
  const ModelParams p = blackbody_params();
  JumpMicrostate s0;
  s0.n = 2;
  s0[0] = 58;
  s0[1] = 27;
  const auto a = simulate_jump(ModelKind::BlackBody, p, s0, 1e-5, 2024);
  const auto b = simulate_jump(ModelKind::BlackBody, p, s0, 1e-5, 2024);
  REQUIRE(a.times.size() == b.times.size());
  CHECK(a.times == b.times);
  CHECK(a.states.size() == b.states.size());
  for (std::size_t i = 0; i < a.states.size(); ++i)
    CHECK(a.states[i] == b.states[i]);

  const auto c = simulate_jump(ModelKind::BlackBody, p, s0, 1e-5, 2025);
  CHECK(a.times != c.times);
}

TEST_CASE("zero total propensity absorbs the trajectory") {
  ModelParams p = blackbody_params();
  JumpMicrostate s0;
  s0.n = 2;
  s0[0] = 0;
  s0[1] = 0;  // no photons, no excited TLS: nothing can happen
  const auto traj = simulate_jump(ModelKind::BlackBody, p, s0, 1.0, 5);
  CHECK(traj.absorbed);
  CHECK(traj.events == 0);
  REQUIRE(traj.states.size() == 1);
  CHECK(traj.states[0] == s0);
}

TEST_CASE("invalid jump inputs are rejected") {
  const ModelParams p = blackbody_params();
  JumpMicrostate bad;
  bad.n = 2;
  bad[0] = -1;
  bad[1] = 0;
  CHECK_THROWS_AS((void)simulate_jump(ModelKind::BlackBody, p, bad, 1.0, 1),
                  domain_error);
  JumpMicrostate wrong_dim;
  wrong_dim.n = 3;
  CHECK_THROWS_AS(
      (void)simulate_jump(ModelKind::BlackBody, p, wrong_dim, 1.0, 1),
      domain_error);
  JumpMicrostate over;
  over.n = 2;
  over[0] = 0;
  over[1] = p.M + 1;
  CHECK_THROWS_AS((void)simulate_jump(ModelKind::BlackBody, p, over, 1.0, 1),
                  domain_error);
  JumpMicrostate ok;
  ok.n = 2;
  ok[0] = 1;
  ok[1] = 1;
  CHECK_THROWS_AS((void)simulate_jump(ModelKind::BlackBody, p, ok, 0.0, 1),
                  domain_error);
}

TEST_CASE("ensemble statistics") {
  const ModelParams p = blackbody_params();
  JumpMicrostate s0;
  s0.n = 2;
  s0[0] = 154;
  s0[1] = 12;
  std::vector<double> grid;
  for (int i = 0; i <= 5; ++i) grid.push_back(4e-7 * i);

  SUBCASE("thread count does not change a single bit") {
    const auto one = ensemble_mean(ModelKind::BlackBody, p, s0, grid, 64, 42, 1);
    const auto four = ensemble_mean(ModelKind::BlackBody, p, s0, grid, 64, 42, 4);
    REQUIRE(one.mean.size() == four.mean.size());
    for (std::size_t g = 0; g < one.mean.size(); ++g) {
      for (std::size_t c = 0; c < 2; ++c) {
        CHECK(one.mean[g][c] == four.mean[g][c]);
        CHECK(one.std_err[g][c] == four.std_err[g][c]);
      }
      // identical bits, including possible NaN at t = 0
      CHECK(std::memcmp(&one.corr_m_photon[g], &four.corr_m_photon[g],
                        sizeof(double)) == 0);
    }
  }
  SUBCASE("t = 0 reproduces the initial condition with zero spread") {
    const auto st = ensemble_mean(ModelKind::BlackBody, p, s0, grid, 32, 7, 1);
    CHECK(st.mean[0][0] == doctest::Approx(1.54).epsilon(1e-15));
    CHECK(st.mean[0][1] == doctest::Approx(12.0).epsilon(1e-15));
    // identical start values; the spread is pure summation roundoff
    CHECK(st.std_err[0][0] <= 1e-13);
    CHECK(st.std_err[0][1] <= 1e-13);
  }
  SUBCASE("per-trajectory conservation forces corr(m, n) = -1") {
    // every emission raises the photon count exactly as it lowers m, so
    // across the ensemble the two coordinates are perfectly anti-correlated
    const auto st = ensemble_mean(ModelKind::BlackBody, p, s0, grid, 48, 11, 1);
    CHECK(st.corr_m_photon.back() == doctest::Approx(-1.0).epsilon(1e-12));
  }
  SUBCASE("single trajectory has no standard error") {
    const auto st = ensemble_mean(ModelKind::BlackBody, p, s0, grid, 1, 3, 1);
    CHECK(!st.se_defined);
    CHECK(std::isnan(st.std_err[1][0]));
    CHECK(std::isnan(st.corr_m_photon[1]));
  }
  SUBCASE("invalid ensemble inputs") {
    CHECK_THROWS_AS(
        (void)ensemble_mean(ModelKind::BlackBody, p, s0, grid, 0, 1, 1),
        domain_error);
    CHECK_THROWS_AS(
        (void)ensemble_mean(ModelKind::BlackBody, p, s0, {}, 4, 1, 1),
        domain_error);
    CHECK_THROWS_AS((void)ensemble_mean(ModelKind::BlackBody, p, s0,
                                        {0.0, 2e-6, 1e-6}, 4, 1, 1),
                    domain_error);
  }
}
