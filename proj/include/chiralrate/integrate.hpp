#pragma once

// Adaptive explicit Runge-Kutta integration (Dormand-Prince 5(4), FSAL) with
// quartic dense output, plus steady-state search. The embedded error estimate
// is controlled against abs_tol + rel_tol*|y|; a negativity guard keeps the
// occupancies inside their physical ranges without touching the vector field.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "chiralrate/errors.hpp"
#include "chiralrate/model.hpp"
#include "chiralrate/rates.hpp"

namespace chiralrate {

struct SampleGrid {
  enum class Kind { Linear, Log, Explicit };
  Kind kind = Kind::Linear;
  // Linear: total sample count including t = 0 and t_end.
  // Log: count of logarithmically spaced positive samples; t = 0 is prepended.
  std::size_t points = 201;
  double t_min = 0;           // Log only: smallest positive sample; 0 -> t_end*1e-6
  std::vector<double> times;  // Explicit only: increasing, within [0, t_end]
};

struct IntegratorConfig {
  double t_end = 0;  // [s], required > 0
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;  // also the negativity-guard threshold
  double max_step = std::numeric_limits<double>::infinity();  // [s]
  double initial_step = 0;  // [s]; 0 -> automatic
  SampleGrid grid{};
  std::size_t max_steps = 100'000'000;
  bool store_dense = false;  // keep interpolation blocks for eval_dense()
};

struct TrajectorySample {
  double t = 0;  // [s]
  State state{};
};

// Interpolation coefficients of one accepted step, for dense evaluation.
struct DenseBlock {
  double t0 = 0, h = 0;
  StateVec c1, c2, c3, c4, c5;
};

struct Trajectory {
  ModelKind kind{};
  ModelParams params{};
  std::vector<TrajectorySample> samples;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
  std::size_t rhs_evaluations = 0;
  std::vector<DenseBlock> dense;  // nonempty iff store_dense was set

  // Quartic interpolant evaluation at any time covered by the stored blocks.
  [[nodiscard]] State eval_dense(double t) const {
    if (dense.empty())
      throw domain_error("NoDenseOutput",
                         "trajectory was integrated without store_dense");
    std::size_t lo = 0, hi = dense.size() - 1;
    while (lo < hi) {  // last block with t0 <= t
      const std::size_t mid = (lo + hi + 1) / 2;
      if (dense[mid].t0 <= t)
        lo = mid;
      else
        hi = mid - 1;
    }
    const DenseBlock& b = dense[lo];
    const double th = std::clamp(b.h > 0 ? (t - b.t0) / b.h : 0.0, 0.0, 1.0);
    StateVec y;
    y.n = b.c1.size();
    for (std::size_t i = 0; i < y.n; ++i)
      y[i] = b.c1[i] +
             th * (b.c2[i] +
                   (1 - th) * (b.c3[i] + th * (b.c4[i] + (1 - th) * b.c5[i])));
    return unpack(kind, y);
  }
};

namespace detail {

// Dormand-Prince 5(4) tableau.
inline constexpr double kC2 = 1.0 / 5, kC3 = 3.0 / 10, kC4 = 4.0 / 5,
                        kC5 = 8.0 / 9;
inline constexpr double kA21 = 1.0 / 5;
inline constexpr double kA31 = 3.0 / 40, kA32 = 9.0 / 40;
inline constexpr double kA41 = 44.0 / 45, kA42 = -56.0 / 15, kA43 = 32.0 / 9;
inline constexpr double kA51 = 19372.0 / 6561, kA52 = -25360.0 / 2187,
                        kA53 = 64448.0 / 6561, kA54 = -212.0 / 729;
inline constexpr double kA61 = 9017.0 / 3168, kA62 = -355.0 / 33,
                        kA63 = 46732.0 / 5247, kA64 = 49.0 / 176,
                        kA65 = -5103.0 / 18656;
inline constexpr double kB1 = 35.0 / 384, kB3 = 500.0 / 1113,
                        kB4 = 125.0 / 192, kB5 = -2187.0 / 6784,
                        kB6 = 11.0 / 84;
// 5th-minus-4th-order error coefficients.
inline constexpr double kE1 = 71.0 / 57600, kE3 = -71.0 / 16695,
                        kE4 = 71.0 / 1920, kE5 = -17253.0 / 339200,
                        kE6 = 22.0 / 525, kE7 = -1.0 / 40;
// Dense-output coefficients.
inline constexpr double kD1 = -12715105075.0 / 11282082432.0;
inline constexpr double kD3 = 87487479700.0 / 32700410799.0;
inline constexpr double kD4 = -10690763975.0 / 1880347072.0;
inline constexpr double kD5 = 701980252875.0 / 199316789632.0;
inline constexpr double kD6 = -1453857185.0 / 822651844.0;
inline constexpr double kD7 = 69997945.0 / 29380423.0;

inline constexpr double kMinStep = 1e-18;  // [s]

}  // namespace detail

// Builds the monotone sample-time list, always starting at t = 0.
[[nodiscard]] inline std::vector<double> make_sample_times(
    const IntegratorConfig& cfg) {
  const double t_end = cfg.t_end;
  std::vector<double> times;
  switch (cfg.grid.kind) {
    case SampleGrid::Kind::Linear: {
      if (cfg.grid.points < 2)
        throw domain_error("InvalidConfig", "linear grid needs >= 2 points");
      const std::size_t n = cfg.grid.points;
      times.reserve(n);
      for (std::size_t i = 0; i < n; ++i)
        times.push_back(t_end * static_cast<double>(i) /
                        static_cast<double>(n - 1));
      times.front() = 0;
      times.back() = t_end;
      break;
    }
    case SampleGrid::Kind::Log: {
      if (cfg.grid.points < 2)
        throw domain_error("InvalidConfig", "log grid needs >= 2 points");
      double t_min = cfg.grid.t_min > 0 ? cfg.grid.t_min : t_end * 1e-6;
      if (!(t_min < t_end))
        throw domain_error("InvalidConfig", "log grid needs t_min < t_end");
      const std::size_t n = cfg.grid.points;
      times.reserve(n + 1);
      times.push_back(0);
      const double l0 = std::log(t_min), l1 = std::log(t_end);
      for (std::size_t i = 0; i < n; ++i)
        times.push_back(std::exp(l0 + (l1 - l0) * static_cast<double>(i) /
                                          static_cast<double>(n - 1)));
      times.back() = t_end;
      break;
    }
    case SampleGrid::Kind::Explicit: {
      times = cfg.grid.times;
      if (times.empty())
        throw domain_error("InvalidConfig", "explicit grid is empty");
      for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] >= 0) || !(times[i] <= t_end) ||
            (i > 0 && !(times[i] > times[i - 1])))
          throw domain_error("InvalidConfig",
                             "explicit grid must be strictly increasing "
                             "within [0, t_end]");
      }
      if (times.front() > 0) times.insert(times.begin(), 0.0);
      break;
    }
  }
  return times;
}

inline void validate_config(const IntegratorConfig& cfg) {
  if (!(cfg.t_end > 0) || !std::isfinite(cfg.t_end))
    throw domain_error("InvalidConfig", "t_end must be positive and finite");
  if (!(cfg.rel_tol > 0) || !(cfg.rel_tol < 1))
    throw domain_error("InvalidConfig", "rel_tol must lie in (0, 1)");
  if (!(cfg.abs_tol > 0))
    throw domain_error("InvalidConfig", "abs_tol must be positive");
  if (!(cfg.max_step > 0))
    throw domain_error("InvalidConfig", "max_step must be positive");
  if (cfg.initial_step < 0)
    throw domain_error("InvalidConfig", "initial_step must be >= 0");
}

inline Trajectory integrate(const VectorField& field, const State& s0,
                            const IntegratorConfig& cfg) {
  validate_config(cfg);
  require_valid_state(s0, field.params, field.kind, "integrate");
  const std::vector<double> grid = make_sample_times(cfg);

  Trajectory traj;
  traj.kind = field.kind;
  traj.params = field.params;
  traj.samples.reserve(grid.size());

  const std::size_t dim = state_dimension(field.kind);
  const double big_m = static_cast<double>(field.params.M);
  const std::size_t m_slot = dim - 1;  // m is always packed last

  StateVec y = pack(field.kind, s0);
  double t = 0;

  auto rhs = [&](const StateVec& v) -> StateVec {
    ++traj.rhs_evaluations;
    StateVec f = field.eval_packed(v);
    for (std::size_t i = 0; i < dim; ++i)
      if (!std::isfinite(f[i]))
        throw integration_error("NonFiniteState",
                                "vector field returned NaN/Inf", t);
    return f;
  };

  // Clamp dense-output samples onto the physical domain; interior
  // interpolation can undershoot by O(tolerance) even between guarded
  // endpoints.
  auto emit = [&](double ts, const StateVec& v) {
    State s = unpack(field.kind, v);
    for (StateField f : active_fields(field.kind)) {
      double val = get(s, f);
      if (val < 0) val = 0;
      if (f == StateField::m && val > big_m) val = big_m;
      set(s, f, val);
    }
    traj.samples.push_back({ts, s});
  };

  std::size_t gi = 0;
  while (gi < grid.size() && grid[gi] <= 0) emit(grid[gi++], y);

  StateVec k1 = rhs(y);

  // Automatic initial step (standard two-probe heuristic).
  double h = cfg.initial_step;
  if (h <= 0) {
    double d0 = 0, d1 = 0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double sc = cfg.abs_tol + cfg.rel_tol * std::abs(y[i]);
      d0 += (y[i] / sc) * (y[i] / sc);
      d1 += (k1[i] / sc) * (k1[i] / sc);
    }
    d0 = std::sqrt(d0 / static_cast<double>(dim));
    d1 = std::sqrt(d1 / static_cast<double>(dim));
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * cfg.t_end : 0.01 * d0 / d1;
    h0 = std::min(h0, cfg.t_end);
    StateVec yp;
    yp.n = dim;
    for (std::size_t i = 0; i < dim; ++i) yp[i] = y[i] + h0 * k1[i];
    const StateVec f1 = rhs(yp);
    double d2 = 0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double sc = cfg.abs_tol + cfg.rel_tol * std::abs(y[i]);
      d2 += ((f1[i] - k1[i]) / sc) * ((f1[i] - k1[i]) / sc);
    }
    d2 = std::sqrt(d2 / static_cast<double>(dim)) / h0;
    const double der = std::max(d1, d2);
    const double h1 = der > 1e-15 ? std::pow(0.01 / der, 0.2)
                                  : std::max(1e-6 * cfg.t_end, h0 * 1e-3);
    h = std::min({100 * h0, h1, cfg.t_end});
  }
  h = std::min(h, cfg.max_step);

  bool last_rejected = false;
  std::size_t steps = 0;
  StateVec k2, k3, k4, k5, k6, k7, y1, ytmp;
  k2.n = k3.n = k4.n = k5.n = k6.n = k7.n = y1.n = ytmp.n = dim;

  using namespace detail;
  while (t < cfg.t_end) {
    if (++steps > cfg.max_steps)
      throw integration_error("MaxStepsExceeded",
                              "step budget exhausted before t_end", t);
    const bool final_step = (t + h >= cfg.t_end);
    if (final_step) h = cfg.t_end - t;
    if (h < kMinStep) {
      if (final_step) break;  // within roundoff of t_end
      throw integration_error("StepSizeUnderflow",
                              "step size fell below 1e-18 s", t);
    }

    for (std::size_t i = 0; i < dim; ++i)
      ytmp[i] = y[i] + h * kA21 * k1[i];
    k2 = rhs(ytmp);
    for (std::size_t i = 0; i < dim; ++i)
      ytmp[i] = y[i] + h * (kA31 * k1[i] + kA32 * k2[i]);
    k3 = rhs(ytmp);
    for (std::size_t i = 0; i < dim; ++i)
      ytmp[i] = y[i] + h * (kA41 * k1[i] + kA42 * k2[i] + kA43 * k3[i]);
    k4 = rhs(ytmp);
    for (std::size_t i = 0; i < dim; ++i)
      ytmp[i] = y[i] + h * (kA51 * k1[i] + kA52 * k2[i] + kA53 * k3[i] +
                            kA54 * k4[i]);
    k5 = rhs(ytmp);
    for (std::size_t i = 0; i < dim; ++i)
      ytmp[i] = y[i] + h * (kA61 * k1[i] + kA62 * k2[i] + kA63 * k3[i] +
                            kA64 * k4[i] + kA65 * k5[i]);
    k6 = rhs(ytmp);
    for (std::size_t i = 0; i < dim; ++i)
      y1[i] = y[i] + h * (kB1 * k1[i] + kB3 * k3[i] + kB4 * k4[i] +
                          kB5 * k5[i] + kB6 * k6[i]);
    k7 = rhs(y1);

    double err = 0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double e = h * (kE1 * k1[i] + kE3 * k3[i] + kE4 * k4[i] +
                            kE5 * k5[i] + kE6 * k6[i] + kE7 * k7[i]);
      const double sc =
          cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y[i]), std::abs(y1[i]));
      err += (e / sc) * (e / sc);
    }
    err = std::sqrt(err / static_cast<double>(dim));
    if (!std::isfinite(err))
      throw integration_error("NonFiniteState",
                              "error estimate is NaN/Inf", t);

    if (err > 1) {
      ++traj.rejected_steps;
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      last_rejected = true;
      continue;
    }

    // Negativity guard: snap tiny undershoot to the boundary, reject steps
    // that land materially outside the physical domain.
    bool snapped = false, guard_reject = false;
    for (std::size_t i = 0; i < dim && !guard_reject; ++i) {
      if (y1[i] < 0) {
        if (y1[i] > -cfg.abs_tol) {
          y1[i] = 0;
          snapped = true;
        } else {
          guard_reject = true;
        }
      }
      if (i == m_slot && y1[i] > big_m) {
        if (y1[i] < big_m + cfg.abs_tol) {
          y1[i] = big_m;
          snapped = true;
        } else {
          guard_reject = true;
        }
      }
    }
    if (guard_reject) {
      ++traj.rejected_steps;
      h *= 0.5;
      last_rejected = true;
      continue;
    }

    ++traj.accepted_steps;
    const double t_new = final_step ? cfg.t_end : t + h;

    const bool want_dense =
        cfg.store_dense || (gi < grid.size() && grid[gi] <= t_new);
    DenseBlock blk;
    if (want_dense) {
      blk.t0 = t;
      blk.h = h;
      blk.c1.n = blk.c2.n = blk.c3.n = blk.c4.n = blk.c5.n = dim;
      for (std::size_t i = 0; i < dim; ++i) {
        const double dy = y1[i] - y[i];
        blk.c1[i] = y[i];
        blk.c2[i] = dy;
        blk.c3[i] = h * k1[i] - dy;
        blk.c4[i] = dy - h * k7[i] - blk.c3[i];
        blk.c5[i] = h * (kD1 * k1[i] + kD3 * k3[i] + kD4 * k4[i] +
                         kD5 * k5[i] + kD6 * k6[i] + kD7 * k7[i]);
      }
      while (gi < grid.size() && grid[gi] <= t_new) {
        const double th = std::clamp((grid[gi] - t) / h, 0.0, 1.0);
        StateVec v;
        v.n = dim;
        for (std::size_t i = 0; i < dim; ++i)
          v[i] = blk.c1[i] +
                 th * (blk.c2[i] + (1 - th) * (blk.c3[i] +
                                               th * (blk.c4[i] +
                                                     (1 - th) * blk.c5[i])));
        // honor the accepted endpoint exactly
        if (grid[gi] == t_new) v = y1;
        emit(grid[gi], v);
        ++gi;
      }
      if (cfg.store_dense) traj.dense.push_back(std::move(blk));
    }

    t = t_new;
    y = y1;
    if (snapped)
      k1 = rhs(y);  // FSAL stage is stale after snapping
    else
      k1 = k7;

    double fac = 0.9 * std::pow(std::max(err, 1e-50), -0.2);
    fac = std::min(last_rejected ? 1.0 : 5.0, std::max(0.2, fac));
    h = std::min(h * fac, cfg.max_step);
    last_rejected = false;
  }

  // Rounding guards: any grid tail not emitted inside the loop sits at t_end.
  while (gi < grid.size()) emit(grid[gi++], y);
  return traj;
}

// ---------------------------------------------------------------------------
// Steady-state search

// Coarse magnitude of the fastest process in the model, times max(1, M): the
// natural scale against which RHS residuals are measured.
[[nodiscard]] inline double rate_scale(const ModelParams& p, ModelKind k) {
  double r = 0;
  switch (k) {
    case ModelKind::BlackBody: r = p.gamma_t1; break;
    case ModelKind::OpenChiral:
      r = std::max({2 * p.gamma_dec, p.gamma_0, p.gamma_t1, p.gamma_t2,
                    p.gamma_t11 + p.gamma_t12});
      break;
    case ModelKind::ClosedChiral:
      r = std::max({2 * p.gamma_dec, 2 * p.gamma_dec_prime, p.gamma_0,
                    p.gamma_3, p.gamma_t1, p.gamma_t2, p.gamma_t11,
                    p.gamma_t12});
      break;
    case ModelKind::EmbeddedCavity:
      r = std::max({p.gamma_4, p.gamma_4_prime, p.N_modes_wg * p.gamma_5,
                    p.N_modes * p.gamma_6});
      break;
  }
  return r * std::max(1.0, static_cast<double>(p.M));
}

namespace detail {

// Gaussian elimination with partial pivoting for the tiny (<= 7x7) systems
// of the damped least-squares update. Returns false on (near-)singularity.
inline bool solve_linear(std::size_t n, double a[7][7], double b[7],
                         double x[7]) {
  std::size_t piv[7];
  for (std::size_t i = 0; i < n; ++i) piv[i] = i;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t best = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[piv[r]][col]) > std::abs(a[piv[best]][col])) best = r;
    std::swap(piv[col], piv[best]);
    const double d = a[piv[col]][col];
    if (std::abs(d) < 1e-300) return false;
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[piv[r]][col] / d;
      if (f == 0) continue;
      for (std::size_t c = col; c < n; ++c) a[piv[r]][c] -= f * a[piv[col]][c];
      b[piv[r]] -= f * b[piv[col]];
    }
  }
  for (std::size_t ri = n; ri-- > 0;) {
    double s = b[piv[ri]];
    for (std::size_t c = ri + 1; c < n; ++c) s -= a[piv[ri]][c] * x[c];
    x[ri] = s / a[piv[ri]][ri];
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(x[i])) return false;
  return true;
}

}  // namespace detail

// Finds a state with max-norm of the vector field below 1e-12 * rate_scale,
// by damped Gauss-Newton polishing seeded from progressively longer
// relaxation integrations. Conservative kinds are constrained to the
// conservation manifold of s0 (an extra least-squares row pins the total
// excitation), so the search cannot wander to a different equilibrium.
inline State find_steady_state(const VectorField& field, const State& s0) {
  require_valid_state(s0, field.params, field.kind, "find_steady_state");
  const ModelKind kind = field.kind;
  const ModelParams& p = field.params;
  const std::size_t dim = state_dimension(kind);
  const double scale = rate_scale(p, kind);
  if (scale <= 0) return s0;  // zero field: every state is steady
  const double tol = 1e-12 * scale;
  const double big_m = static_cast<double>(p.M);

  const bool conservative = kind != ModelKind::OpenChiral;
  const StateVec w = excitation_weights(kind, p);
  double e0 = 0;
  if (conservative) {
    const StateVec y0 = pack(kind, s0);
    for (std::size_t i = 0; i < dim; ++i) e0 += w[i] * y0[i];
  }
  const double cons_weight = scale / std::max(1.0, std::abs(e0));

  const std::size_t neq = conservative ? dim + 1 : dim;
  auto eval_G = [&](const StateVec& y, double g[7]) {
    const StateVec f = field.eval_packed(y);
    for (std::size_t i = 0; i < dim; ++i) g[i] = f[i];
    if (conservative) {
      double e = 0;
      for (std::size_t i = 0; i < dim; ++i) e += w[i] * y[i];
      g[dim] = cons_weight * (e - e0);
    }
  };
  auto residual = [&](const StateVec& y) {
    const StateVec f = field.eval_packed(y);
    double r = 0;
    for (std::size_t i = 0; i < dim; ++i) r = std::max(r, std::abs(f[i]));
    return r;
  };
  auto clamp_state = [&](StateVec& y) {
    for (std::size_t i = 0; i < dim; ++i) y[i] = std::max(y[i], 0.0);
    y[dim - 1] = std::min(y[dim - 1], big_m);
  };

  int total_iters = 0;
  auto polish = [&](StateVec y, StateVec& out) -> bool {
    double g[7], gtrial[7];
    double lambda = 1e-3;
    for (int it = 0; it < 80; ++it) {
      ++total_iters;
      if (residual(y) < tol) {
        out = y;
        return true;
      }
      eval_G(y, g);
      double norm_g = 0;
      for (std::size_t i = 0; i < neq; ++i) norm_g += g[i] * g[i];

      // central-difference Jacobian of the augmented system
      double J[7][7];
      for (std::size_t j = 0; j < dim; ++j) {
        const double hj = 1e-6 * std::max(std::abs(y[j]), 1.0);
        StateVec yp = y, ym = y;
        yp[j] += hj;
        ym[j] -= hj;
        double gp[7], gm[7];
        eval_G(yp, gp);
        eval_G(ym, gm);
        for (std::size_t i = 0; i < neq; ++i)
          J[i][j] = (gp[i] - gm[i]) / (2 * hj);
      }

      double jtj[7][7], jtg[7];
      for (std::size_t a = 0; a < dim; ++a) {
        jtg[a] = 0;
        for (std::size_t i = 0; i < neq; ++i) jtg[a] += J[i][a] * g[i];
        for (std::size_t b = 0; b < dim; ++b) {
          jtj[a][b] = 0;
          for (std::size_t i = 0; i < neq; ++i)
            jtj[a][b] += J[i][a] * J[i][b];
        }
      }

      bool improved = false;
      for (int tries = 0; tries < 30 && !improved; ++tries) {
        double aug[7][7], rhs_v[7], delta[7];
        for (std::size_t a = 0; a < dim; ++a) {
          for (std::size_t b = 0; b < dim; ++b) aug[a][b] = jtj[a][b];
          aug[a][a] += lambda * std::max(jtj[a][a], 1e-30);
          rhs_v[a] = -jtg[a];
        }
        if (detail::solve_linear(dim, aug, rhs_v, delta)) {
          StateVec yt = y;
          for (std::size_t i = 0; i < dim; ++i) yt[i] += delta[i];
          clamp_state(yt);
          eval_G(yt, gtrial);
          double norm_t = 0;
          for (std::size_t i = 0; i < neq; ++i) norm_t += gtrial[i] * gtrial[i];
          if (norm_t < norm_g) {
            y = yt;
            lambda = std::max(lambda * 0.25, 1e-12);
            improved = true;
            break;
          }
        }
        lambda *= 10;
        if (lambda > 1e14) return false;
      }
      if (!improved) return false;
    }
    out = y;
    return residual(y) < tol;
  };

  StateVec y = pack(kind, s0);
  StateVec found;
  if (polish(y, found)) return unpack(kind, found);

  // Relaxation fallback: integrate over exponentially growing windows, then
  // polish from each endpoint.
  double window = 20.0 / scale;
  State s = s0;
  for (int k = 0; k < 26; ++k) {
    IntegratorConfig cfg;
    cfg.t_end = window;
    cfg.rel_tol = 1e-10;
    cfg.abs_tol = 1e-12;
    cfg.grid.kind = SampleGrid::Kind::Linear;
    cfg.grid.points = 2;
    const Trajectory traj = integrate(field, s, cfg);
    s = traj.samples.back().state;
    if (polish(pack(kind, s), found)) return unpack(kind, found);
    window *= 8;
  }
  throw convergence_error("steady-state search did not reach tolerance",
                          residual(pack(kind, s)), total_iters);
}

}  // namespace chiralrate
