#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "swiptmac/errors.hpp"
#include "swiptmac/region.hpp"
#include "swiptmac/scenario.hpp"

namespace swiptmac {

inline constexpr std::size_t kMaxSolveUsers = 8;
inline constexpr int kMaxGridPoints = 96;

/// Coarse-to-fine search lattice. Round 1 spans [0, caps[i]] with `points`
/// samples per axis; every later round re-centers a window of +-1 previous
/// step around the incumbent, clamped to [0, caps[i]].
struct GridSpec {
  int points = 17;
  int rounds = 3;
  std::vector<double> caps;
};

/// One fade state of the per-state Lagrangian
///   max_{t in grid} max_{r} sum_i mu(i) r(i) - sum_i (lambda_s(i) - lambda_r h(i)) t(i)
/// with r ranging over the pentagon {rho <= r, r(A) <= C_A(h, t)}.
struct PerStateProblem {
  const double* h = nullptr;
  const double* mu = nullptr;
  const double* lambda_s = nullptr;
  double lambda_r = 0.0;
  const double* rho = nullptr;
  std::size_t users = 0;
  double sigma2 = 1.0;
  ReceiverModel model = ReceiverModel::Ideal;
  double pi_e = 0.0;
};

struct PerStateResult {
  std::array<double, kMaxSolveUsers> t{};
  std::array<double, kMaxSolveUsers> r{};
  std::size_t users = 0;
  double objective = -std::numeric_limits<double>::infinity();
  bool feasible = false;
  std::uint32_t cap_hit_mask = 0;
};

namespace detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Linear-objective maximum over the two-user pentagon intersected with
// {r >= rho}: at most five vertex candidates (two decode orders, the two
// min-rate faces, and the all-clamped corner). Returns sum mu r, -inf if the
// minimum rates do not fit.
inline double alloc_rates2(double c0, double c1, double c01, double mu0, double mu1,
                           double rho0, double rho1, double& r0_out, double& r1_out) {
  if (rho0 > c0 || rho1 > c1 || rho0 + rho1 > c01) return kNegInf;
  double best = kNegInf, b0 = 0.0, b1 = 0.0;
  const auto consider = [&](double r0, double r1) {
    if (r0 >= rho0 && r1 >= rho1) {
      const double o = mu0 * r0 + mu1 * r1;
      if (o > best) {
        best = o;
        b0 = r0;
        b1 = r1;
      }
    }
  };
  consider(c0, std::min(c1, c01 - c0));
  consider(std::min(c0, c01 - c1), c1);
  consider(rho0, std::min(c1, c01 - rho0));
  consider(std::min(c0, c01 - rho1), rho1);
  consider(rho0, rho1);
  r0_out = b0;
  r1_out = b1;
  return best;
}

inline double alloc_rates1(double c0, double mu0, double rho0, double& r0_out) {
  if (rho0 > c0) return kNegInf;
  double best = mu0 * c0;
  r0_out = c0;
  const double alt = mu0 * rho0;
  if (alt > best) {
    best = alt;
    r0_out = rho0;
  }
  return best;
}

// General-L allocation: for every priority permutation, grant each user in
// turn the largest rate leaving rho-room for everyone later; the candidates
// cover all vertices a nonnegative objective can select.
inline double alloc_rates_general(const double* caps /* [2^L - 1], caps[mask-1] */,
                                  const double* mu, const double* rho, std::size_t L,
                                  double* r_out) {
  const std::uint32_t full = (1u << L) - 1;
  for (std::uint32_t m = 1; m <= full; ++m) {
    double rs = 0.0;
    for (std::size_t i = 0; i < L; ++i)
      if (m & (1u << i)) rs += rho[i];
    if (rs > caps[m - 1]) return kNegInf;
  }
  std::array<std::size_t, kMaxSolveUsers> perm{};
  for (std::size_t i = 0; i < L; ++i) perm[i] = i;
  double best = kNegInf;
  std::array<double, kMaxSolveUsers> bestr{};
  do {
    std::array<double, kMaxSolveUsers> r{};
    for (std::size_t i = 0; i < L; ++i) r[i] = rho[i];
    for (std::size_t k = 0; k < L; ++k) {
      const std::size_t u = perm[k];
      double lim = std::numeric_limits<double>::infinity();
      for (std::uint32_t m = 1; m <= full; ++m) {
        if (!(m & (1u << u))) continue;
        double s = 0.0;
        for (std::size_t i = 0; i < L; ++i)
          if ((m & (1u << i)) && i != u) s += r[i];
        lim = std::min(lim, caps[m - 1] - s);
      }
      r[u] = std::max(lim, rho[u]);
    }
    double o = 0.0;
    for (std::size_t i = 0; i < L; ++i) o += mu[i] * r[i];
    if (o > best) {
      best = o;
      bestr = r;
    }
  } while (std::next_permutation(perm.begin(), perm.begin() + L));
  for (std::size_t i = 0; i < L; ++i) r_out[i] = bestr[i];
  return best;
}

struct ScanBest {
  double obj = kNegInf;
  std::array<double, kMaxSolveUsers> t{};
  std::array<double, kMaxSolveUsers> r{};
};

// Lattice value shared with the exhaustive reference implementation: both
// must generate bit-identical sample points for the equal-grid contract.
inline double lattice_point(double lo, double hi, int j, int points) {
  return lo + (hi - lo) * (static_cast<double>(j) / static_cast<double>(points - 1));
}

inline void scan_round1(const PerStateProblem& p, const CapScale cs, const double* lo,
                        const double* hi, int G, ScanBest& best) {
  const double a0 = p.lambda_s[0] - p.lambda_r * p.h[0];
  std::array<double, kMaxGridPoints> t0v, s0v, c0v, w0v;
  for (int j = 0; j < G; ++j) {
    t0v[j] = lattice_point(lo[0], hi[0], j, G);
    s0v[j] = p.h[0] * t0v[j];
    c0v[j] = cap_raw(s0v[j], p.sigma2, cs);
    w0v[j] = a0 * t0v[j];
  }
  for (int j = 0; j < G; ++j) {
    double r0;
    const double rate = alloc_rates1(c0v[j], p.mu[0], p.rho[0], r0);
    if (rate == kNegInf) continue;
    const double obj = rate - w0v[j];
    if (obj > best.obj) {
      best.obj = obj;
      best.t[0] = t0v[j];
      best.r[0] = r0;
    }
  }
}

inline void scan_round2(const PerStateProblem& p, const CapScale cs, const double* lo,
                        const double* hi, int G, ScanBest& best) {
  const double a0 = p.lambda_s[0] - p.lambda_r * p.h[0];
  const double a1 = p.lambda_s[1] - p.lambda_r * p.h[1];
  std::array<double, kMaxGridPoints> t0v, s0v, c0v, w0v, t1v, s1v, c1v, w1v;
  for (int j = 0; j < G; ++j) {
    t0v[j] = lattice_point(lo[0], hi[0], j, G);
    s0v[j] = p.h[0] * t0v[j];
    c0v[j] = cap_raw(s0v[j], p.sigma2, cs);
    w0v[j] = a0 * t0v[j];
    t1v[j] = lattice_point(lo[1], hi[1], j, G);
    s1v[j] = p.h[1] * t1v[j];
    c1v[j] = cap_raw(s1v[j], p.sigma2, cs);
    w1v[j] = a1 * t1v[j];
  }
  const double mu0 = p.mu[0], mu1 = p.mu[1], rho0 = p.rho[0], rho1 = p.rho[1];
  for (int j0 = 0; j0 < G; ++j0) {
    const double s0 = s0v[j0], c0 = c0v[j0], w0 = w0v[j0];
    for (int j1 = 0; j1 < G; ++j1) {
      const double c01 = cap_raw(s0 + s1v[j1], p.sigma2, cs);
      double r0, r1;
      const double rate = alloc_rates2(c0, c1v[j1], c01, mu0, mu1, rho0, rho1, r0, r1);
      if (rate == kNegInf) continue;
      const double obj = rate - (w0 + w1v[j1]);
      if (obj > best.obj) {
        best.obj = obj;
        best.t[0] = t0v[j0];
        best.t[1] = t1v[j1];
        best.r[0] = r0;
        best.r[1] = r1;
      }
    }
  }
}

// Odometer scan for three or more users; feasibility filtered through the
// same subset-capacity machinery. Not performance critical.
inline void scan_round_general(const PerStateProblem& p, const CapScale cs, const double* lo,
                               const double* hi, int G, ScanBest& best) {
  const std::size_t L = p.users;
  const std::uint32_t full = (1u << L) - 1;
  double total_points = 1.0;
  for (std::size_t i = 0; i < L; ++i) total_points *= G;
  if (total_points > 2e6)
    throw invalid_parameter("per_state_solve: lattice too large for " + std::to_string(L) +
                            " users; reduce grid points");
  std::array<double, kMaxSolveUsers> a{};
  for (std::size_t i = 0; i < L; ++i) a[i] = p.lambda_s[i] - p.lambda_r * p.h[i];
  std::array<int, kMaxSolveUsers> idx{};
  std::array<double, kMaxSolveUsers> t{}, r{};
  std::vector<double> caps(full);
  for (;;) {
    for (std::size_t i = 0; i < L; ++i) t[i] = lattice_point(lo[i], hi[i], idx[i], G);
    for (std::uint32_t m = 1; m <= full; ++m) {
      double s = 0.0;
      for (std::size_t i = 0; i < L; ++i)
        if (m & (1u << i)) s += p.h[i] * t[i];
      caps[m - 1] = cap_raw(s, p.sigma2, cs);
    }
    const double rate = alloc_rates_general(caps.data(), p.mu, p.rho, L, r.data());
    if (rate != kNegInf) {
      double pw = 0.0;
      for (std::size_t i = 0; i < L; ++i) pw += a[i] * t[i];
      const double obj = rate - pw;
      if (obj > best.obj) {
        best.obj = obj;
        best.t = t;
        best.r = r;
      }
    }
    std::size_t i = L;
    for (; i-- > 0;) {
      if (++idx[i] < G) break;
      idx[i] = 0;
    }
    if (i == std::numeric_limits<std::size_t>::max()) break;
  }
}

}  // namespace detail

/// Maximizes the per-state Lagrangian over the power lattice. With
/// strict = true, raises infeasible_min_rate when the minimum rates do not
/// fit even at the caps, and unbounded_objective when the incumbent sits on
/// the cap while its power price lambda_s(i) - lambda_r h(i) is <= 0 (the
/// continuous problem would run away). Lenient mode reports both conditions
/// in the result instead.
inline PerStateResult per_state_solve(const PerStateProblem& p, const GridSpec& grid,
                                      bool strict = true) {
  const std::size_t L = p.users;
  if (L == 0 || L > kMaxSolveUsers)
    throw invalid_parameter("per_state_solve: need 1.." + std::to_string(kMaxSolveUsers) +
                            " users");
  if (grid.points < 2 || grid.points > kMaxGridPoints)
    throw invalid_parameter("per_state_solve: grid points must be in [2, 96]");
  if (grid.rounds < 1 || grid.rounds > 16)
    throw invalid_parameter("per_state_solve: grid rounds must be in [1, 16]");
  if (grid.caps.size() != L) throw invalid_parameter("per_state_solve: caps size mismatch");
  for (std::size_t i = 0; i < L; ++i) {
    if (!(grid.caps[i] > 0.0)) throw invalid_parameter("per_state_solve: caps must be > 0");
    if (!(p.mu[i] >= 0.0)) throw invalid_parameter("per_state_solve: mu must be >= 0");
    if (!(p.lambda_s[i] >= 0.0))
      throw invalid_parameter("per_state_solve: lambda_s must be >= 0");
    if (!(p.rho[i] >= 0.0)) throw invalid_parameter("per_state_solve: rho must be >= 0");
  }
  if (!(p.lambda_r >= 0.0)) throw invalid_parameter("per_state_solve: lambda_r must be >= 0");
  if (!(p.sigma2 > 0.0)) throw invalid_parameter("per_state_solve: sigma2 must be > 0");
  if (!(p.pi_e >= 0.0 && p.pi_e <= 1.0))
    throw invalid_parameter("per_state_solve: pi_e must be in [0, 1]");

  const detail::CapScale cs = detail::cap_scale(p.model, p.pi_e);

  PerStateResult res;
  res.users = L;

  // Minimum rates must fit at the caps; capacities are monotone in t.
  {
    const std::uint32_t full = (1u << L) - 1;
    bool ok = true;
    for (std::uint32_t m = 1; m <= full && ok; ++m) {
      double s = 0.0, rs = 0.0;
      for (std::size_t i = 0; i < L; ++i) {
        if (m & (1u << i)) {
          s += p.h[i] * grid.caps[i];
          rs += p.rho[i];
        }
      }
      if (rs > detail::cap_raw(s, p.sigma2, cs)) ok = false;
    }
    if (!ok) {
      if (strict)
        throw infeasible_min_rate("per_state_solve: minimum rates unreachable within power caps");
      res.feasible = false;
      return res;
    }
  }

  std::array<double, kMaxSolveUsers> lo{}, hi{};
  for (std::size_t i = 0; i < L; ++i) {
    lo[i] = 0.0;
    hi[i] = grid.caps[i];
  }
  detail::ScanBest best;
  for (int round = 0; round < grid.rounds; ++round) {
    if (round > 0) {
      for (std::size_t i = 0; i < L; ++i) {
        const double step = (hi[i] - lo[i]) / static_cast<double>(grid.points - 1);
        lo[i] = std::max(0.0, best.t[i] - step);
        hi[i] = std::min(grid.caps[i], best.t[i] + step);
      }
    }
    if (L == 1)
      detail::scan_round1(p, cs, lo.data(), hi.data(), grid.points, best);
    else if (L == 2)
      detail::scan_round2(p, cs, lo.data(), hi.data(), grid.points, best);
    else
      detail::scan_round_general(p, cs, lo.data(), hi.data(), grid.points, best);
  }

  res.feasible = best.obj != detail::kNegInf;
  res.objective = best.obj;
  res.t = best.t;
  res.r = best.r;
  for (std::size_t i = 0; i < L; ++i) {
    if (best.t[i] == grid.caps[i]) {
      res.cap_hit_mask |= (1u << i);
      if (strict && p.lambda_s[i] - p.lambda_r * p.h[i] <= 0.0)
        throw unbounded_objective(
            "per_state_solve: power reward at or above its price for user " + std::to_string(i) +
            "; optimum pinned at the grid cap");
    }
  }
  return res;
}

struct Multipliers {
  std::vector<double> lambda_s;
  double lambda_r = 0.0;
};

/// One traced point of the weighted-rate boundary, with the policy and
/// per-state rate allocations realizing it.
struct BoundaryPoint {
  std::vector<double> mu;           // normalized weights
  std::vector<double> avg_rates;    // E_H[R_i]
  PolicyTable policy;               // per-state transmit energies
  std::vector<double> state_rates;  // [states * users]
  Multipliers multipliers;
  double pi_e = 0.0;
  double delivered = 0.0;  // eta * sum_i E[H(i) T_i(H)], joules per slot
  double objective = 0.0;  // sum_i mu_i E[R_i]
  std::vector<double> avg_power;
  std::vector<double> power_target;
  double pi_residual = 0.0;
  int pi_iterations = 0;
  std::size_t cap_hit_states = 0;
  long solver_passes = 0;  // per-state sweeps consumed end to end
};

struct SolverOptions {
  int grid_points = 17;      // final-answer lattice
  int grid_rounds = 3;       // deepened automatically to honor power_tol_rel
  double grid_cap_factor = 20.0;
  int iter_grid_points = 11; // cheaper lattice while multipliers move
  int iter_grid_rounds = 2;
  double power_tol_rel = 1e-4;
  double pi_tol = 1e-6;
  double pi_damping = 0.5;
  int pi_max_iters = 100;
  double epsilon_frac = 0.0;  // transmit budget backoff as a fraction of E[Y]
  int max_bisect_iters = 60;
  int max_sweeps = 25;
};

struct DualWarmStart {
  std::vector<double> lambda_s;
  double lambda_r = 0.0;
  double pi_e = 0.0;
  bool valid = false;
};

namespace detail {

struct PassStats {
  std::array<double, kMaxSolveUsers> avg_power{};
  std::array<double, kMaxSolveUsers> avg_rate{};
  double delivered_raw = 0.0;  // sum_i E[H(i) T_i]
  std::size_t cap_hit_states = 0;
};

inline PassStats run_pass(const Scenario& sc, ReceiverModel model, const double* mu,
                          const Multipliers& lm, double pi_e, const GridSpec& grid,
                          PolicyTable* policy_out = nullptr,
                          std::vector<double>* rates_out = nullptr) {
  const std::size_t L = sc.users();
  PassStats st;
  PerStateProblem p;
  p.mu = mu;
  p.lambda_s = lm.lambda_s.data();
  p.lambda_r = lm.lambda_r;
  p.rho = sc.rho.data();
  p.users = L;
  p.sigma2 = sc.sigma2;
  p.model = model;
  p.pi_e = pi_e;
  for (std::size_t s = 0; s < sc.fading.states; ++s) {
    p.h = sc.fading.state_gains(s);
    const PerStateResult r = per_state_solve(p, grid, /*strict=*/false);
    if (!r.feasible)
      throw infeasible_min_rate("minimum rates unreachable within power caps at joint state " +
                                std::to_string(s) + " (pi_e = " + std::to_string(pi_e) + ")");
    const double ps = sc.fading.prob[s];
    double dot = 0.0;
    for (std::size_t i = 0; i < L; ++i) {
      st.avg_power[i] += ps * r.t[i];
      st.avg_rate[i] += ps * r.r[i];
      dot += p.h[i] * r.t[i];
    }
    st.delivered_raw += ps * dot;
    if (r.cap_hit_mask) ++st.cap_hit_states;
    if (policy_out) {
      double* row = policy_out->row(s);
      for (std::size_t i = 0; i < L; ++i) row[i] = r.t[i];
    }
    if (rates_out) {
      for (std::size_t i = 0; i < L; ++i) (*rates_out)[s * L + i] = r.r[i];
    }
  }
  return st;
}

// Largest sum_i E[H(i) T_i] any policy can reach under the per-user budgets
// and per-state caps: per user, pour the budget into the states with the
// highest gain first.
inline double max_delivery_raw(const Scenario& sc, const std::vector<double>& caps,
                               const std::vector<double>& budget) {
  const std::size_t L = sc.users();
  double total = 0.0;
  std::vector<std::size_t> order(sc.fading.states);
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t s = 0; s < sc.fading.states; ++s) order[s] = s;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return sc.fading.gain[a * L + i] > sc.fading.gain[b * L + i];
    });
    double remaining = budget[i];
    for (std::size_t k = 0; k < order.size() && remaining > 0.0; ++k) {
      const std::size_t s = order[k];
      const double mass = std::min(caps[i] * sc.fading.prob[s], remaining);
      total += sc.fading.gain[s * L + i] * mass;
      remaining -= mass;
    }
  }
  return total;
}

class DualSolver {
 public:
  DualSolver(const Scenario& sc, ReceiverModel model, const std::vector<double>& mu_in,
             const SolverOptions& opts, const DualWarmStart* warm)
      : sc_(sc), model_(model), opts_(opts) {
    sc.validate();
    const std::size_t L = sc.users();
    if (L > kMaxSolveUsers)
      throw invalid_parameter("dual_solve: at most " + std::to_string(kMaxSolveUsers) + " users");
    if (mu_in.size() != L) throw invalid_parameter("dual_solve: mu size mismatch");
    double msum = 0.0;
    for (double m : mu_in) {
      if (!(m >= 0.0)) throw invalid_parameter("dual_solve: mu must be >= 0");
      msum += m;
    }
    if (!(msum > 0.0)) throw invalid_parameter("dual_solve: mu must not be all zero");
    mu_.resize(L);
    for (std::size_t i = 0; i < L; ++i) mu_[i] = mu_in[i] / msum;

    if (!(opts.epsilon_frac >= 0.0 && opts.epsilon_frac < 1.0))
      throw invalid_parameter("dual_solve: epsilon_frac must be in [0, 1)");
    target_.resize(L);
    caps_.resize(L);
    for (std::size_t i = 0; i < L; ++i) {
      target_[i] = sc.harvest_mean[i] * (1.0 - opts.epsilon_frac);
      caps_[i] = opts.grid_cap_factor * sc.harvest_mean[i];
    }

    // All joint states sharing one user's gain value cross their lattice
    // thresholds at nearly the same multiplier, so E[T_i](lambda) jumps in
    // blocks of this probability mass. It sets the attainable resolution.
    max_class_p_ = 0.0;
    {
      std::map<double, double> acc;
      for (std::size_t i = 0; i < L; ++i) {
        acc.clear();
        for (std::size_t s = 0; s < sc.fading.states; ++s)
          acc[sc.fading.gain[s * L + i]] += sc.fading.prob[s];
        for (const auto& kv : acc) max_class_p_ = std::max(max_class_p_, kv.second);
      }
    }

    fine_ = GridSpec{opts.grid_points, fine_rounds(), caps_};
    coarse_ = GridSpec{opts.iter_grid_points, opts.iter_grid_rounds, caps_};

    deficit_ = sc.energy_deficit();
    lm_.lambda_s.assign(L, 0.0);
    lm_.lambda_r = 0.0;
    seed_.resize(L);
    for (std::size_t i = 0; i < L; ++i) {
      const double hbar = marginal_mean(sc.fading, i);
      seed_[i] = std::max(1e-30, (mu_[i] + 0.1) * hbar / (2.0 * std::log(2.0) * sc.sigma2));
      lm_.lambda_s[i] = seed_[i];
    }
    if (warm && warm->valid && warm->lambda_s.size() == L) {
      for (std::size_t i = 0; i < L; ++i)
        lm_.lambda_s[i] = std::max(warm->lambda_s[i], 0.0);
      lm_.lambda_r = std::max(warm->lambda_r, 0.0);
      pi_ = std::clamp(warm->pi_e, 0.0, 1.0);
      warm_ = true;
    }

    // A zero-weight user earns nothing from its own rate, yet its transmit
    // power still feeds the receiver; with a pure rate reward the solver
    // would park that user at the rate floors and forfeit the delivery. A
    // small positive delivery reward makes its budget-pinned allocation fill
    // the best gain states instead. The fill shape does not depend on the
    // reward size (the budget fixes the gain threshold), so the scale only
    // has to clear rounding noise while leaving the priced users' allocation
    // undisturbed. Priced directions keep the reward at zero, warm start or
    // not; for the ideal receiver lambda_r is owned by the delivery solve.
    if (model_ != ReceiverModel::Ideal) {
      double mu_min = mu_[0], smax = 0.0;
      for (double m : mu_) mu_min = std::min(mu_min, m);
      for (double s : seed_) smax = std::max(smax, s);
      lm_.lambda_r = (deficit_ > 0.0 && mu_min == 0.0) ? 1e-5 * smax : 0.0;
    }
  }

  BoundaryPoint solve() {
    precheck_energy();

    const bool needs_pi = deficit_ > 0.0 && model_ != ReceiverModel::Ideal;
    const bool needs_lr = deficit_ > 0.0 && model_ == ReceiverModel::Ideal;

    if (needs_pi) {
      fixed_point_loop(coarse_);
    } else {
      pi_ = 0.0;
      solve_lambda(coarse_, iteration_tol(coarse_));
      if (needs_lr) ensure_delivery(coarse_, iteration_tol(coarse_));
    }

    // Endgame on the fine lattice: settle the multipliers at full tolerance,
    // then (TS/PS) polish pi with the multipliers frozen. Plain Picard steps
    // converge here because the delivery sum depends only weakly on pi, and
    // freezing the multipliers keeps the pi -> pi_target map deterministic.
    // The delivery sum inherits the lattice staircase, so pi_target jitters
    // by about pi times the attainable power resolution; demanding less than
    // that would spin forever. Alternate until both tolerances hold on one
    // final pass.
    for (int outer = 0;; ++outer) {
      solve_lambda(fine_, opts_.power_tol_rel);
      if (needs_lr) verify_delivery_fine();
      if (!needs_pi) break;
      const double pi_pre = pi_;
      bool pi_ok = false, pi_cycled = false;
      std::array<double, 8> hist{};
      for (int k = 0; k < 40; ++k) {
        const double pt = pi_target(last_.delivered_raw);
        pi_residual_ = std::fabs(pi_ - pt);
        if (pi_residual_ <= std::max(opts_.pi_tol, pi_ * uslack_)) {
          pi_ok = true;
          break;
        }
        hist[k % hist.size()] = pi_;
        // The delivery sum inherits the lattice staircase, so the Picard map
        // can jump over its own fixed point and oscillate among a few lattice
        // allocations instead of converging. Once the recent iterates confine
        // themselves to a narrow band, revisit the largest one: its own target
        // lies below it, so that design banks more than the deficit and stays
        // feasible, conceding at most the band width in rate.
        if (k >= 16) {
          const double mx = *std::max_element(hist.begin(), hist.end());
          const double mn = *std::min_element(hist.begin(), hist.end());
          if (mx - mn <= 0.05 * pi_) {
            if (pi_ != mx) {
              pi_ = mx;
              ++pi_iterations_;
              last_ = pass(fine_);
            }
            const double ptm = pi_target(last_.delivered_raw);
            pi_residual_ = std::fabs(pi_ - ptm);
            if (ptm <= pi_) {
              pi_ok = true;
              pi_cycled = true;
              break;
            }
            continue;
          }
        }
        pi_ = pt;
        ++pi_iterations_;
        last_ = pass(fine_);
      }
      if (!pi_ok)
        throw no_fixed_point("erasure-fraction polish did not reach tolerance; residual " +
                             std::to_string(pi_residual_));
      if (pi_cycled) {
        // Crossing the gap moved E[T], so re-settle the multipliers at the
        // settled pi. Accept unless that final adjustment flipped the design
        // back to under-banking; only that direction breaks feasibility.
        solve_lambda(fine_, opts_.power_tol_rel);
        const double pt = pi_target(last_.delivered_raw);
        pi_residual_ = std::fabs(pi_ - pt);
        if (pt - pi_ <= std::max(opts_.pi_tol, pi_ * uslack_)) break;
      } else if (power_ok(last_, opts_.power_tol_rel)) {
        break;
      }
      if (outer >= 12)
        throw no_fixed_point(
            "joint multiplier and erasure-fraction refinement did not settle");
      // Re-solving the multipliers after each erasure update makes the outer
      // rounds a Picard iteration on the joint map, whose slope passes -1
      // when the deficit sits deep in the deliverable range; halving the
      // step restores contraction there and does not disturb rounds that
      // already settle in one pass.
      pi_ = 0.5 * (pi_pre + pi_);
    }

    return assemble();
  }

 private:
  int fine_rounds() const {
    // The configured rounds (3 by default, final step <= 1e-3 cap) are a
    // floor; deepen until E[T] can be tuned within the power tolerance even
    // when one joint state carries most of the probability mass.
    double max_p = 0.0;
    for (double p : sc_.fading.prob) max_p = std::max(max_p, p);
    int rounds = std::max(3, opts_.grid_rounds);
    const double G1 = static_cast<double>(opts_.grid_points - 1);
    for (; rounds < 12; ++rounds) {
      const double final_step_frac = (1.0 / G1) * std::pow(2.0 / G1, rounds - 1);
      // caps are grid_cap_factor * E[Y]; required resolution relative to cap
      const double need =
          std::min(1e-3, opts_.power_tol_rel * (1.0 - opts_.epsilon_frac) /
                             (4.0 * max_p * opts_.grid_cap_factor));
      if (final_step_frac <= need) break;
    }
    return rounds;
  }

  double iteration_tol(const GridSpec& g) const {
    // Lattice quantization bounds how precisely E[T] responds to lambda.
    double max_p = 0.0;
    for (double p : sc_.fading.prob) max_p = std::max(max_p, p);
    const double G1 = static_cast<double>(g.points - 1);
    const double final_step_frac = (1.0 / G1) * std::pow(2.0 / G1, g.rounds - 1);
    const double quant = final_step_frac * opts_.grid_cap_factor * max_p;
    return std::max(1e-3, 3.0 * quant);
  }

  void precheck_energy() {
    if (deficit_ <= 0.0) return;
    const double need = deficit_ / sc_.rx.eta;
    const double dmax = max_delivery_raw(sc_, caps_, target_);
    if (need > dmax * (1.0 + 1e-9))
      throw infeasible_energy(
          "energy deficit exceeds the largest deliverable RF power: need sum E[HT] >= " +
          std::to_string(need) + " J/slot, achievable maximum " + std::to_string(dmax));
  }

  double pi_target(double delivered_raw) const {
    const double pt = erasure_fraction(deficit_, sc_.rx.eta * delivered_raw);
    if (pt >= 1.0 - 1e-12)
      throw infeasible_energy(
          "deficit forces the erasure fraction to 1; no positive rates are sustainable");
    return pt;
  }

  PassStats pass(const GridSpec& g, PolicyTable* pol = nullptr, std::vector<double>* rates = nullptr) {
    ++pass_count_;
    return run_pass(sc_, model_, mu_.data(), lm_, pi_, g, pol, rates);
  }

  // E[T_i](lambda) is a staircase on the lattice: states sharing a gain value
  // flip together, so near the fixed point consecutive plateaus straddling the
  // target can sit several block jumps apart. Overspending breaks feasibility
  // and is held to tol; underspending only loosens complementary slackness, so
  // it is accepted up to the attainable resolution.
  double undershoot_slack(const GridSpec& g, double tol) const {
    const double G1 = static_cast<double>(g.points - 1);
    const double fsf = (1.0 / G1) * std::pow(2.0 / G1, g.rounds - 1);
    const double block = fsf * opts_.grid_cap_factor * max_class_p_ /
                         (1.0 - opts_.epsilon_frac);
    return std::clamp(6.0 * block, tol, 5e-3);
  }

  bool power_ok(const PassStats& st, double tol) const {
    for (std::size_t i = 0; i < sc_.users(); ++i) {
      const double e = st.avg_power[i];
      if (e > target_[i] * (1.0 + tol)) return false;
      if (lm_.lambda_s[i] > 0.0 && !(settled_ & (1u << i)) &&
          e < target_[i] * (1.0 - std::max(tol, uslack_)))
        return false;
    }
    return true;
  }

  // Per-user violation of the power target. Zero-price users and users
  // settled on a certified plateau are only in violation when they overspend
  // (complementary slackness up to the attainable resolution).
  double violation(std::size_t i) const {
    const double ratio = last_.avg_power[i] / target_[i];
    if (ratio > 1.0) return ratio - 1.0;
    if (lm_.lambda_s[i] <= 0.0 || (settled_ & (1u << i))) return 0.0;
    const double under = 1.0 - ratio;
    return under > uslack_ ? under : 0.0;
  }

  // Safeguarded Newton iteration in log-log coordinates on the monotone maps
  // lambda_s(i) -> E[T_i], always correcting the worst violator. The local
  // slope d ln E / d ln lambda is learned from consecutive samples; a round
  // of bracketed Illinois sweeps backs it up if it fails to settle.
  void solve_lambda(const GridSpec& g, double tol) {
    const std::size_t L = sc_.users();
    uslack_ = undershoot_slack(g, tol);
    settled_ = 0;
    last_ = pass(g);
    struct NewtonState {
      double l = -1.0, e = -1.0, gamma = 1.5;
      // Tightest straddle seen: E(lo) overshoots, E(hi) undershoots. When it
      // closes below the certification width with no in-band sample, the
      // budget sits inside a jump of the E staircase (exact equality would
      // need time-sharing between the two adjacent policies); we settle on
      // the feasible side.
      double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    };
    std::array<NewtonState, kMaxSolveUsers> ns{};
    for (int it = 0; it < 70; ++it) {
      std::size_t worst = L;
      double werr = tol;
      for (std::size_t i = 0; i < L; ++i) {
        const double v = violation(i);
        if (v > werr) {
          werr = v;
          worst = i;
        }
      }
      if (worst == L) return;
      const std::size_t i = worst;
      settled_ &= ~(1u << i);
      const double l = lm_.lambda_s[i];
      const double e = last_.avg_power[i];
      double lnew;
      if (l <= 0.0) {
        lnew = seed_[i] * 1e-6;
      } else {
        NewtonState& st = ns[i];
        double gamma = st.gamma;
        if (st.l > 0.0 && st.l != l && st.e > 0.0 && st.e != e) {
          const double den = std::log(l / st.l);
          // lambda moves below the plateau width sample the staircase, not
          // the slope; learn only from moves that cleared it
          if (std::fabs(den) > 1e-3) {
            const double gn = std::log(st.e / e) / den;
            if (gn > 0.05 && gn < 50.0) gamma = 0.5 * gamma + 0.5 * gn;
          }
        }
        gamma = std::clamp(gamma, 0.3, 12.0);
        st.gamma = gamma;
        st.l = l;
        st.e = e;
        // E decreases in lambda; keep the bracket consistent with the newest
        // sample when cross-user coupling has shifted the map under us.
        if (e > target_[i]) {
          if (l >= st.hi) st.hi = std::numeric_limits<double>::infinity();
          st.lo = std::max(st.lo, l);
        } else {
          if (l <= st.lo) st.lo = 0.0;
          st.hi = std::min(st.hi, l);
        }
        const double fac =
            std::clamp(std::pow(e / target_[i], 1.0 / gamma), 0.25, 4.0);
        lnew = l * fac;
        if (st.lo > 0.0 && st.lo < st.hi &&
            st.hi < std::numeric_limits<double>::infinity()) {
          if (st.hi / st.lo - 1.0 < 3e-4) {
            lnew = st.hi;  // certified plateau: spend-no-more side
            settled_ |= (1u << i);
          } else if (lnew <= st.lo || lnew >= st.hi) {
            lnew = std::sqrt(st.lo * st.hi);  // geometric bisection inside
          }
        }
        if (lnew < seed_[i] * 1e-15) lnew = 0.0;  // price collapsed: slack probe
      }
      lm_.lambda_s[i] = lnew;
      last_ = pass(g);
    }
    for (int sweep = 0; sweep < opts_.max_sweeps; ++sweep) {
      if (power_ok(last_, tol)) return;
      for (std::size_t i = 0; i < L; ++i) bisect_user(i, g, tol);
    }
    if (!power_ok(last_, 10.0 * tol))
      throw no_fixed_point("power-target refinement stalled; multipliers did not converge");
  }

  double eval_lambda(std::size_t i, double v, const GridSpec& g) {
    lm_.lambda_s[i] = v;
    last_ = pass(g);
    return last_.avg_power[i];
  }

  void bisect_user(std::size_t i, const GridSpec& g, double tol) {
    const double target = target_[i];
    settled_ &= ~(1u << i);
    double cur = last_.avg_power[i];
    if (lm_.lambda_s[i] <= 0.0) {
      if (cur <= target * (1.0 + tol)) return;  // slack constraint, lambda stays 0
      lm_.lambda_s[i] = seed_[i] * 1e-6;
      cur = eval_lambda(i, lm_.lambda_s[i], g);
    }
    if (cur <= target * (1.0 + tol) &&
        cur >= target * (1.0 - std::max(tol, uslack_)))
      return;

    // Bracket [lo, hi] with E(lo) > target >= E(hi). Warm multipliers sit
    // near the answer, so expand gently before escalating.
    double lo, hi, flo, fhi;
    double grow = 1.6;
    if (cur > target) {
      lo = lm_.lambda_s[i];
      flo = cur;
      hi = lo;
      for (int k = 0;; ++k) {
        hi *= grow;
        fhi = eval_lambda(i, hi, g);
        if (fhi <= target) break;
        lo = hi;
        flo = fhi;
        if (k > 6) grow = 3.0;
        if (k >= 80)
          throw infeasible_scenario(
              "user " + std::to_string(i) +
              ": minimum-rate power floor exceeds the average harvest budget");
      }
    } else {
      hi = lm_.lambda_s[i];
      fhi = cur;
      lo = hi;
      for (int k = 0;; ++k) {
        lo /= grow;
        if (k >= 80 || lo < seed_[i] * 1e-18) {
          // even a vanishing price cannot spend the budget: slack constraint
          if (eval_lambda(i, 0.0, g) <= target * (1.0 + tol)) return;
          lo = 0.0;
          flo = last_.avg_power[i];
          break;
        }
        flo = eval_lambda(i, lo, g);
        if (flo > target) break;
        hi = lo;
        fhi = flo;
        if (k > 6) grow = 3.0;
      }
    }

    // Illinois refinement: secant steps with endpoint de-weighting, a plain
    // bisection step every third iteration against lattice plateaus.
    double a = lo, fa = flo - target;
    double b = hi, fb = fhi - target;
    int side = 0;
    for (int k = 0; k < opts_.max_bisect_iters; ++k) {
      double x;
      if (k % 3 == 2 || fa == fb) {
        x = 0.5 * (a + b);
      } else {
        x = b - fb * (b - a) / (fb - fa);
        const double margin = 0.05 * (b - a);
        x = std::clamp(x, a + margin, b - margin);
      }
      const double fx = eval_lambda(i, x, g) - target;
      if (fx <= tol * target && fx >= -std::max(tol, uslack_) * target) return;
      if (fx > 0.0) {
        a = x;
        fa = fx;
        if (side == 1) fb *= 0.5;
        side = 1;
      } else {
        b = x;
        fb = fx;
        if (side == -1) fa *= 0.5;
        side = -1;
      }
      if (b - a <= 3e-4 * b) break;
    }
    // No multiplier lands inside the band: the budget sits in a jump of the
    // E staircase. Settle on the spend-no-more-than-budget side.
    eval_lambda(i, b, g);
    settled_ |= (1u << i);
  }

  // Ideal receiver: the delivery constraint sum E[HT] >= deficit/eta binds
  // through lambda_r with complementary slackness. Each trial value re-solves
  // the per-user multipliers, so this only runs when the deficit is positive.
  void ensure_delivery(const GridSpec& g, double tol) {
    const double need = deficit_ / sc_.rx.eta;
    if (lm_.lambda_r == 0.0 && last_.delivered_raw >= need * (1.0 - 1e-9)) return;
    double hi = lm_.lambda_r;
    if (hi <= 0.0) {
      double lmin = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < sc_.users(); ++i)
        lmin = std::min(lmin, lm_.lambda_s[i] > 0 ? lm_.lambda_s[i] : seed_[i]);
      double hmax = 0.0;
      for (double h : sc_.fading.gain) hmax = std::max(hmax, h);
      hi = 0.05 * lmin / hmax;
    }
    double lo = 0.0;
    for (int k = 0;; ++k) {
      lm_.lambda_r = hi;
      solve_lambda(g, tol);
      if (last_.delivered_raw >= need) break;
      lo = hi;
      hi *= 3.0;
      if (k >= 60)
        throw infeasible_energy("delivery constraint unreachable despite multiplier growth");
    }
    for (int k = 0; k < 50; ++k) {
      if (hi - lo <= 1e-9 * hi) break;
      const double mid = 0.5 * (lo + hi);
      lm_.lambda_r = mid;
      solve_lambda(g, tol);
      const double d = last_.delivered_raw;
      if (d >= need && d <= need * (1.0 + 1e-4)) return;
      if (d < need)
        lo = mid;
      else
        hi = mid;
    }
    if (last_.delivered_raw < need) {
      lm_.lambda_r = hi;
      solve_lambda(g, tol);
    }
  }

  // After refining the multipliers on the fine lattice the delivery sum can
  // slip below its target by grid noise; nudge lambda_r up until covered.
  void verify_delivery_fine() {
    const double need = deficit_ / sc_.rx.eta;
    if (last_.delivered_raw >= need * (1.0 - 1e-9)) return;
    if (lm_.lambda_r == 0.0) {
      ensure_delivery(fine_, opts_.power_tol_rel);
    } else {
      for (int k = 0; k < 30 && last_.delivered_raw < need * (1.0 - 1e-9); ++k) {
        lm_.lambda_r *= 1.25;
        solve_lambda(fine_, opts_.power_tol_rel);
      }
    }
    if (last_.delivered_raw < need * (1.0 - 1e-9))
      throw infeasible_energy("delivery constraint unreachable on the refinement lattice");
  }

  void fixed_point_loop(const GridSpec& g) {
    const double tol = iteration_tol(g);
    if (!warm_) pi_ = 0.0;
    solve_lambda(g, tol);
    double pt = pi_target(last_.delivered_raw);
    const double beta = opts_.pi_damping;
    for (int k = 0; k < opts_.pi_max_iters; ++k) {
      pi_residual_ = std::fabs(pi_ - pt);
      ++pi_iterations_;
      if (pi_residual_ <= std::max(opts_.pi_tol, tol * pt)) return;
      pi_ = (1.0 - beta) * pi_ + beta * pt;
      solve_lambda(g, tol);
      pt = pi_target(last_.delivered_raw);
    }
    throw no_fixed_point("damped erasure-fraction iteration did not converge in " +
                         std::to_string(opts_.pi_max_iters) + " iterations");
  }

  BoundaryPoint assemble() {
    const std::size_t L = sc_.users();
    BoundaryPoint bp;
    bp.mu = mu_;
    bp.policy.users = L;
    bp.policy.states = sc_.fading.states;
    bp.policy.powers.assign(L * sc_.fading.states, 0.0);
    bp.state_rates.assign(L * sc_.fading.states, 0.0);
    const PassStats st = pass(fine_, &bp.policy, &bp.state_rates);
    bp.avg_rates.assign(st.avg_rate.begin(), st.avg_rate.begin() + L);
    bp.avg_power.assign(st.avg_power.begin(), st.avg_power.begin() + L);
    bp.power_target = target_;
    bp.multipliers = lm_;
    bp.pi_e = pi_;
    bp.delivered = sc_.rx.eta * st.delivered_raw;
    bp.cap_hit_states = st.cap_hit_states;
    bp.pi_iterations = pi_iterations_;
    bp.solver_passes = pass_count_;
    bp.pi_residual = deficit_ > 0.0 && model_ != ReceiverModel::Ideal
                         ? std::fabs(pi_ - pi_target(st.delivered_raw))
                         : 0.0;
    double obj = 0.0;
    for (std::size_t i = 0; i < L; ++i) obj += mu_[i] * bp.avg_rates[i];
    bp.objective = obj;
    return bp;
  }

  const Scenario& sc_;
  ReceiverModel model_;
  SolverOptions opts_;
  std::vector<double> mu_, target_, caps_, seed_;
  GridSpec fine_, coarse_;
  Multipliers lm_;
  double pi_ = 0.0;
  double deficit_ = 0.0;
  double pi_residual_ = 0.0;
  double max_class_p_ = 1.0;
  double uslack_ = 1e-4;
  unsigned settled_ = 0;
  int pi_iterations_ = 0;
  bool warm_ = false;
  PassStats last_;
  long pass_count_ = 0;
};

}  // namespace detail

/// Supporting-hyperplane boundary point for reward direction mu: multipliers
/// are adjusted until every per-user average power meets its budget within
/// tolerance (or is slack at zero price), the delivery constraint holds with
/// complementary slackness, and (TS/PS) the erasure fraction solves its
/// fixed-point equation.
inline BoundaryPoint dual_solve(const Scenario& sc, ReceiverModel model,
                                const std::vector<double>& mu, const SolverOptions& opts = {},
                                const DualWarmStart* warm = nullptr) {
  detail::DualSolver solver(sc, model, mu, opts, warm);
  return solver.solve();
}

struct TracePoint {
  double theta = 0.0;
  std::vector<double> mu;
  std::optional<BoundaryPoint> point;
  std::string error;  // empty when the point solved
};

namespace detail {

inline void simplex_grid(std::size_t L, int K, std::vector<std::vector<double>>& out) {
  // Uniform simplex lattice: compositions of (K - 1) into L parts.
  std::vector<int> c(L, 0);
  std::vector<double> mu(L);
  const std::function<void(std::size_t, int)> rec = [&](std::size_t i, int rem) {
    if (i + 1 == L) {
      c[i] = rem;
      for (std::size_t j = 0; j < L; ++j) mu[j] = static_cast<double>(c[j]) / (K - 1);
      out.push_back(mu);
      return;
    }
    for (int v = rem; v >= 0; --v) {
      c[i] = v;
      rec(i + 1, rem - v);
    }
  };
  rec(0, K - 1);
}

}  // namespace detail

/// Sweeps the reward simplex (for two users: mu = (theta, 1 - theta) with
/// theta ascending on a uniform grid) and returns one entry per direction.
/// Directions whose subproblem is infeasible are recorded with the error
/// message instead of aborting the sweep.
inline std::vector<TracePoint> trace_boundary(const Scenario& sc, ReceiverModel model,
                                              int mu_grid, const SolverOptions& opts = {}) {
  sc.validate();
  if (mu_grid < 1) throw invalid_parameter("trace_boundary: mu_grid must be >= 1");
  const std::size_t L = sc.users();
  std::vector<std::vector<double>> dirs;
  if (L == 1) {
    dirs.push_back({1.0});
  } else if (mu_grid == 1) {
    dirs.push_back(std::vector<double>(L, 1.0 / static_cast<double>(L)));
  } else if (L == 2) {
    for (int j = 0; j < mu_grid; ++j) {
      const double theta = static_cast<double>(j) / (mu_grid - 1);
      dirs.push_back({theta, 1.0 - theta});
    }
  } else {
    detail::simplex_grid(L, mu_grid, dirs);
  }

  std::vector<TracePoint> out;
  out.reserve(dirs.size());
  DualWarmStart warm;
  for (const auto& mu : dirs) {
    TracePoint tp;
    tp.mu = mu;
    tp.theta = mu[0];
    try {
      BoundaryPoint bp = dual_solve(sc, model, mu, opts, warm.valid ? &warm : nullptr);
      warm.lambda_s = bp.multipliers.lambda_s;
      warm.lambda_r = bp.multipliers.lambda_r;
      warm.pi_e = bp.pi_e;
      warm.valid = true;
      tp.point = std::move(bp);
    } catch (const infeasible_energy& e) {
      tp.error = e.what();
    } catch (const infeasible_min_rate& e) {
      tp.error = e.what();
    } catch (const infeasible_scenario& e) {
      tp.error = e.what();
    } catch (const no_fixed_point& e) {
      tp.error = e.what();
    }
    out.push_back(std::move(tp));
  }
  return out;
}

/// Largest achievable sum rate: boundary point in the uniform reward
/// direction.
inline double sum_rate(const Scenario& sc, ReceiverModel model, const SolverOptions& opts = {}) {
  const std::vector<double> mu(sc.users(), 1.0 / static_cast<double>(sc.users()));
  const BoundaryPoint bp = dual_solve(sc, model, mu, opts);
  double s = 0.0;
  for (double r : bp.avg_rates) s += r;
  return s;
}

}  // namespace swiptmac
