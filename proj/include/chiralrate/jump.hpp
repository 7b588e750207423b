#pragma once

// Exact-jump (kinetic Monte Carlo) simulation of the integer microstate
// process underlying the mean-field rate equations. The mode continua are
// coarse-grained to integer photon totals over their mode windows; per-mode
// occupancies n = total/N enter the propensities, mirroring the mean-field
// coarse-graining. Every ODE term corresponds to exactly one event channel,
// so the ensemble drift of the jump process reproduces the RHS identically.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "chiralrate/errors.hpp"
#include "chiralrate/model.hpp"
#include "chiralrate/rates.hpp"

namespace chiralrate {

namespace rng {

// splitmix64: tiny, statistically solid, and platform-independent — the
// standard-library distributions are implementation-defined, which would
// break byte-identical reproducibility across toolchains.
struct SplitMix64 {
  std::uint64_t state = 0;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

// Deterministic per-trajectory seed: trajectory streams must be independent
// of execution order and thread assignment.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  SplitMix64 g(base + 0x9E3779B97F4A7C15ull * (index + 1));
  return g.next();
}

}  // namespace rng

// Integer microstate: photon totals per packed slot (same order as the ODE
// state vector), with the excited-TLS count in the last slot.
struct JumpMicrostate {
  std::array<std::int64_t, 6> counts{};
  std::size_t n = 0;

  std::int64_t& operator[](std::size_t i) { return counts[i]; }
  std::int64_t operator[](std::size_t i) const { return counts[i]; }
  [[nodiscard]] std::size_t size() const { return n; }

  bool operator==(const JumpMicrostate& o) const {
    return n == o.n && counts == o.counts;
  }
};

[[nodiscard]] inline JumpMicrostate microstate_from_state(const State& s,
                                                          const ModelParams& p,
                                                          ModelKind k) {
  const StateVec y = pack(k, s);
  const StateVec w = excitation_weights(k, p);
  JumpMicrostate ms;
  ms.n = y.size();
  for (std::size_t i = 0; i < y.size(); ++i)
    ms[i] = std::llround(w[i] * y[i]);
  return ms;
}

[[nodiscard]] inline State state_from_microstate(const JumpMicrostate& ms,
                                                 const ModelParams& p,
                                                 ModelKind k) {
  StateVec y;
  y.n = ms.size();
  const StateVec w = excitation_weights(k, p);
  for (std::size_t i = 0; i < ms.size(); ++i)
    y[i] = static_cast<double>(ms[i]) / w[i];
  return unpack(k, y);
}

// One elementary process: a propensity [1/s] evaluated on the per-mode
// mean-field view of the microstate, and an integer state delta. Channels
// whose photons leave for the untracked T = 0 bath are flagged `bath`; they
// have no reverse process.
struct EventChannel {
  std::string name;
  std::array<int, 6> delta{};
  bool bath = false;
  std::function<double(const State&)> propensity;
};

// Builds the per-model channel list, omitting channels whose rate constant is
// zero (they carry no flux and would clutter pairing diagnostics).
[[nodiscard]] inline std::vector<EventChannel> build_channels(
    ModelKind k, const ModelParams& p) {
  validate_or_throw(p, k);
  const double M = static_cast<double>(p.M);
  const double N = p.N_modes, Nw = p.N_modes_wg;
  std::vector<EventChannel> ch;
  auto add = [&](double rate, const char* name, std::array<int, 6> delta,
                 std::function<double(const State&)> prop, bool bath = false) {
    if (rate > 0) ch.push_back({name, delta, bath, std::move(prop)});
  };

  switch (k) {
    case ModelKind::BlackBody: {
      // slots: [N_A, m]
      const double gp = p.gamma_t1;
      add(gp, "tls-emit", {+1, -1},
          [gp](const State& s) { return gp * s.m * (s.n_A + 1); });
      add(gp, "tls-absorb", {-1, +1},
          [gp, M](const State& s) { return gp * (M - s.m) * s.n_A; });
      break;
    }
    case ModelKind::OpenChiral: {
      // slots: [N_A, N_B, m]
      const double gdec = p.gamma_dec, g0 = p.gamma_0;
      const double gt1 = p.gamma_t1, gt2 = p.gamma_t2;
      add(gdec, "loss-A", {-1, 0, 0},
          [gdec, N](const State& s) { return 2 * gdec * N * s.n_A; }, true);
      add(gdec, "loss-B", {0, -1, 0},
          [gdec, N](const State& s) { return 2 * gdec * N * s.n_B; }, true);
      add(g0, "transfer-A-to-B", {-1, +1, 0},
          [g0, N](const State& s) { return g0 * N * s.n_A; });
      add(g0, "transfer-B-to-A", {+1, -1, 0},
          [g0, N](const State& s) { return g0 * N * s.n_B; });
      add(p.gamma_t11, "spont-emit-1", {0, 0, -1},
          [g = p.gamma_t11](const State& s) { return g * s.m; }, true);
      add(p.gamma_t12, "spont-emit-2", {0, 0, -1},
          [g = p.gamma_t12](const State& s) { return g * s.m; }, true);
      add(gt1, "absorb-from-A", {-1, 0, +1},
          [gt1, M](const State& s) { return gt1 * (M - s.m) * s.n_A; });
      add(gt1, "emit-toward-B", {0, +1, -1},
          [gt1](const State& s) { return gt1 * s.m * (s.n_B + 1); });
      add(gt2, "absorb-from-B", {0, -1, +1},
          [gt2, M](const State& s) { return gt2 * (M - s.m) * s.n_B; });
      add(gt2, "emit-toward-A", {+1, 0, -1},
          [gt2](const State& s) { return gt2 * s.m * (s.n_A + 1); });
      break;
    }
    case ModelKind::ClosedChiral: {
      // slots: [N_A, N_B, N_1, N_2, m]
      // The reservoir<->channel hops must agree from both sides, otherwise
      // no photon-conserving jump process reproduces the drift.
      const double ex_a = N * p.gamma_dec, ex_w = Nw * p.gamma_dec_prime;
      if (std::abs(ex_a - ex_w) > 1e-9 * std::max(ex_a, ex_w))
        throw domain_error("NotConservative",
                           "jump channels need N_modes*gamma_dec == "
                           "N_modes_wg*gamma_dec_prime");
      const double gt1 = p.gamma_t1, gt2 = p.gamma_t2;
      const double gt11 = p.gamma_t11, gt12 = p.gamma_t12;
      const double g0 = p.gamma_0, g3 = p.gamma_3;
      add(p.gamma_dec, "exchange-A-to-1", {-1, 0, +1, 0, 0},
          [r = N * p.gamma_dec](const State& s) { return r * s.n_A; });
      add(p.gamma_dec_prime, "exchange-1-to-A", {+1, 0, -1, 0, 0},
          [r = Nw * p.gamma_dec_prime](const State& s) { return r * s.n_1; });
      add(p.gamma_dec, "exchange-A-to-2", {-1, 0, 0, +1, 0},
          [r = N * p.gamma_dec](const State& s) { return r * s.n_A; });
      add(p.gamma_dec_prime, "exchange-2-to-A", {+1, 0, 0, -1, 0},
          [r = Nw * p.gamma_dec_prime](const State& s) { return r * s.n_2; });
      add(p.gamma_dec, "exchange-B-to-1", {0, -1, +1, 0, 0},
          [r = N * p.gamma_dec](const State& s) { return r * s.n_B; });
      add(p.gamma_dec_prime, "exchange-1-to-B", {0, +1, -1, 0, 0},
          [r = Nw * p.gamma_dec_prime](const State& s) { return r * s.n_1; });
      add(p.gamma_dec, "exchange-B-to-2", {0, -1, 0, +1, 0},
          [r = N * p.gamma_dec](const State& s) { return r * s.n_B; });
      add(p.gamma_dec_prime, "exchange-2-to-B", {0, +1, 0, -1, 0},
          [r = Nw * p.gamma_dec_prime](const State& s) { return r * s.n_2; });
      add(gt11, "tls-absorb-1", {0, 0, -1, 0, +1},
          [gt11, M](const State& s) { return gt11 * (M - s.m) * s.n_1; });
      add(gt11, "tls-emit-1", {0, 0, +1, 0, -1},
          [gt11](const State& s) { return gt11 * s.m * (s.n_1 + 1); });
      add(gt12, "tls-absorb-2", {0, 0, 0, -1, +1},
          [gt12, M](const State& s) { return gt12 * (M - s.m) * s.n_2; });
      add(gt12, "tls-emit-2", {0, 0, 0, +1, -1},
          [gt12](const State& s) { return gt12 * s.m * (s.n_2 + 1); });
      add(g3, "mix-1-to-2", {0, 0, -1, +1, 0},
          [g3, Nw](const State& s) {
            return g3 * Nw * (s.n_A + s.n_B + 2) * s.n_1 * (s.n_2 + 1);
          });
      add(g3, "mix-2-to-1", {0, 0, +1, -1, 0},
          [g3, Nw](const State& s) {
            return g3 * Nw * (s.n_A + s.n_B + 2) * s.n_2 * (s.n_1 + 1);
          });
      add(g0, "transfer-A-to-B", {-1, +1, 0, 0, 0},
          [g0, N](const State& s) {
            return g0 * N * s.n_A * (s.n_B + 1) * (s.n_1 + 1);
          });
      add(g0, "transfer-B-to-A", {+1, -1, 0, 0, 0},
          [g0, N](const State& s) {
            return g0 * N * s.n_B * (s.n_A + 1) * (s.n_2 + 1);
          });
      add(gt1, "absorb-from-A", {-1, 0, 0, 0, +1},
          [gt1, M](const State& s) {
            return gt1 * (M - s.m) * s.n_A * (s.n_1 + 1);
          });
      add(gt1, "emit-toward-B", {0, +1, 0, 0, -1},
          [gt1](const State& s) {
            return gt1 * s.m * (s.n_B + 1) * (s.n_1 + 1);
          });
      add(gt2, "absorb-from-B", {0, -1, 0, 0, +1},
          [gt2, M](const State& s) {
            return gt2 * (M - s.m) * s.n_B * (s.n_2 + 1);
          });
      add(gt2, "emit-toward-A", {+1, 0, 0, 0, -1},
          [gt2](const State& s) {
            return gt2 * s.m * (s.n_A + 1) * (s.n_2 + 1);
          });
      break;
    }
    case ModelKind::EmbeddedCavity: {
      // slots: [N_A, N_C, m]
      const double ex_a = N * p.gamma_4, ex_c = Nw * p.gamma_4_prime;
      if ((p.gamma_4 > 0 || p.gamma_4_prime > 0) &&
          std::abs(ex_a - ex_c) > 1e-9 * std::max(ex_a, ex_c))
        throw domain_error("NotConservative",
                           "jump channels need N_modes*gamma_4 == "
                           "N_modes_wg*gamma_4_prime");
      const double g5 = p.gamma_5, g6 = p.gamma_6;
      add(p.gamma_4, "exchange-A-to-C", {-1, +1, 0},
          [r = N * p.gamma_4](const State& s) { return r * s.n_A; });
      add(p.gamma_4_prime, "exchange-C-to-A", {+1, -1, 0},
          [r = Nw * p.gamma_4_prime](const State& s) { return r * s.n_C; });
      add(g5, "tls-absorb-C", {0, -1, +1},
          [r = Nw * g5, M](const State& s) { return r * (M - s.m) * s.n_C; });
      add(g5, "tls-emit-C", {0, +1, -1},
          [r = Nw * g5](const State& s) { return r * s.m * (s.n_C + 1); });
      add(g6, "tls-absorb-A", {-1, 0, +1},
          [r = N * g6, M](const State& s) {
            const double e = (s.n_C + 1) * (s.n_C + 1);
            return r * e * (M - s.m) * s.n_A;
          });
      add(g6, "tls-emit-A", {+1, 0, -1},
          [r = N * g6](const State& s) {
            const double e = (s.n_C + 1) * (s.n_C + 1);
            return r * e * s.m * (s.n_A + 1);
          });
      break;
    }
  }
  return ch;
}

struct JumpTrajectory {
  std::vector<double> times;           // event times, starting at 0
  std::vector<JumpMicrostate> states;  // states[i] holds from times[i] on
  bool absorbed = false;               // total propensity hit zero
  std::uint64_t events = 0;
};

inline void require_valid_microstate(const JumpMicrostate& ms,
                                     const ModelParams& p, ModelKind k) {
  if (ms.size() != state_dimension(k))
    throw domain_error("InvalidState", "microstate dimension mismatch");
  for (std::size_t i = 0; i < ms.size(); ++i)
    if (ms[i] < 0)
      throw domain_error("InvalidState", "negative microstate count");
  if (ms[ms.size() - 1] > p.M)
    throw domain_error("InvalidState", "m exceeds M");
}

// Direct-method exact-jump sampling: exponential waiting times from the total
// propensity, categorical channel choice. Fully deterministic given
// (seed, params, s0).
[[nodiscard]] inline JumpTrajectory simulate_jump(
    ModelKind k, const ModelParams& p, const JumpMicrostate& s0, double t_end,
    std::uint64_t seed, std::uint64_t max_events = UINT64_MAX) {
  require_valid_microstate(s0, p, k);
  if (!(t_end > 0))
    throw domain_error("InvalidConfig", "t_end must be positive");
  const std::vector<EventChannel> channels = build_channels(k, p);
  rng::SplitMix64 gen(seed);

  JumpTrajectory traj;
  traj.times.push_back(0);
  traj.states.push_back(s0);

  JumpMicrostate s = s0;
  double t = 0;
  std::vector<double> a(channels.size());
  while (t < t_end && traj.events < max_events) {
    const State view = state_from_microstate(s, p, k);
    double total = 0;
    for (std::size_t i = 0; i < channels.size(); ++i)
      total += (a[i] = channels[i].propensity(view));
    if (!(total > 0)) {
      traj.absorbed = true;
      break;
    }
    t += -std::log1p(-gen.uniform()) / total;
    if (t >= t_end) break;
    double r = gen.uniform() * total;
    std::size_t pick = channels.size() - 1;
    for (std::size_t i = 0; i < channels.size(); ++i) {
      if (r < a[i]) {
        pick = i;
        break;
      }
      r -= a[i];
    }
    for (std::size_t i = 0; i < s.size(); ++i)
      s[i] += channels[pick].delta[i];
    ++traj.events;
    traj.times.push_back(t);
    traj.states.push_back(s);
  }
  return traj;
}

struct EnsembleStats {
  std::vector<double> times;
  // [grid index][packed slot], per-mode units (m in counts)
  std::vector<std::array<double, 6>> mean;
  std::vector<std::array<double, 6>> std_err;
  // Pearson correlation between m and the first photon slot across the
  // ensemble, per grid time — a factorization diagnostic, no threshold.
  std::vector<double> corr_m_photon;
  std::size_t n_traj = 0;
  bool se_defined = false;
};

// Runs n_traj independent jump trajectories (splitmix-derived seed per
// trajectory index) and aggregates mean/standard error of the per-mode state
// on t_grid. Trajectories may run on several threads; aggregation happens in
// index order afterwards, so the result is byte-identical for any thread
// count.
[[nodiscard]] inline EnsembleStats ensemble_mean(
    ModelKind k, const ModelParams& p, const JumpMicrostate& s0,
    const std::vector<double>& t_grid, std::size_t n_traj,
    std::uint64_t base_seed, unsigned n_threads = 0) {
  require_valid_microstate(s0, p, k);
  if (n_traj == 0)
    throw domain_error("InvalidConfig", "ensemble needs at least 1 trajectory");
  if (t_grid.empty())
    throw domain_error("InvalidConfig", "empty time grid");
  for (std::size_t i = 0; i < t_grid.size(); ++i)
    if (!(t_grid[i] >= 0) || (i > 0 && !(t_grid[i] > t_grid[i - 1])))
      throw domain_error("InvalidConfig", "grid must be increasing and >= 0");

  const std::vector<EventChannel> channels = build_channels(k, p);
  const std::size_t dim = state_dimension(k);
  const std::size_t G = t_grid.size();
  std::vector<double> slab(n_traj * G * dim);

  auto run_one = [&](std::size_t idx) {
    rng::SplitMix64 gen(rng::derive_seed(base_seed, idx));
    JumpMicrostate s = s0;
    double t = 0;
    std::size_t gi = 0;
    std::vector<double> a(channels.size());
    double* out = slab.data() + idx * G * dim;
    while (gi < G) {
      const State view = state_from_microstate(s, p, k);
      double total = 0;
      for (std::size_t i = 0; i < channels.size(); ++i)
        total += (a[i] = channels[i].propensity(view));
      double t_next;
      if (total > 0)
        t_next = t + -std::log1p(-gen.uniform()) / total;
      else
        t_next = std::numeric_limits<double>::infinity();
      const StateVec y = pack(k, view);
      while (gi < G && t_grid[gi] < t_next) {
        for (std::size_t c = 0; c < dim; ++c) out[gi * dim + c] = y[c];
        ++gi;
      }
      if (gi == G || !(total > 0)) break;
      t = t_next;
      double r = gen.uniform() * total;
      std::size_t pick = channels.size() - 1;
      for (std::size_t i = 0; i < channels.size(); ++i) {
        if (r < a[i]) {
          pick = i;
          break;
        }
        r -= a[i];
      }
      for (std::size_t i = 0; i < s.size(); ++i)
        s[i] += channels[pick].delta[i];
    }
  };

  unsigned workers = n_threads ? n_threads : std::thread::hardware_concurrency();
  if (workers == 0) workers = 1;
  workers = static_cast<unsigned>(
      std::min<std::size_t>(workers, n_traj));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n_traj; ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < n_traj; i += workers) run_one(i);
      });
    for (auto& th : pool) th.join();
  }

  EnsembleStats st;
  st.times = t_grid;
  st.n_traj = n_traj;
  st.se_defined = n_traj >= 2;
  st.mean.assign(G, {});
  st.std_err.assign(G, {});
  st.corr_m_photon.assign(G, 0.0);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t g = 0; g < G; ++g) {
    for (std::size_t c = 0; c < dim; ++c) {
      double sum = 0;
      for (std::size_t i = 0; i < n_traj; ++i)
        sum += slab[(i * G + g) * dim + c];
      const double mu = sum / static_cast<double>(n_traj);
      st.mean[g][c] = mu;
      if (n_traj >= 2) {
        double ss = 0;
        for (std::size_t i = 0; i < n_traj; ++i) {
          const double d = slab[(i * G + g) * dim + c] - mu;
          ss += d * d;
        }
        st.std_err[g][c] = std::sqrt(
            ss / (static_cast<double>(n_traj - 1) * static_cast<double>(n_traj)));
      } else {
        st.std_err[g][c] = nan;
      }
    }
    if (dim >= 2 && n_traj >= 2) {
      const std::size_t cm = dim - 1;
      double cov = 0, v0 = 0, vm = 0;
      for (std::size_t i = 0; i < n_traj; ++i) {
        const double d0 = slab[(i * G + g) * dim + 0] - st.mean[g][0];
        const double dm = slab[(i * G + g) * dim + cm] - st.mean[g][cm];
        cov += d0 * dm;
        v0 += d0 * d0;
        vm += dm * dm;
      }
      st.corr_m_photon[g] =
          (v0 > 0 && vm > 0) ? cov / std::sqrt(v0 * vm) : nan;
    } else {
      st.corr_m_photon[g] = nan;
    }
  }
  return st;
}

}  // namespace chiralrate
