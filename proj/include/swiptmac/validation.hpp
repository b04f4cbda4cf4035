#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "swiptmac/oracle.hpp"
#include "swiptmac/optimizer.hpp"
#include "swiptmac/simulator.hpp"

namespace swiptmac {

/// Randomized cross-checks of the per-state solver against the exhaustive
/// reference:
///  - on an identical lattice (33 points, single round) the two must agree
///    exactly, objective and argmax alike;
///  - the refined solver must match a much denser reference scan to within
///    tol bits on the objective (primary direction: the solver is not worse;
///    the reverse direction has extra slack because the dense scan itself
///    quantizes harder near feasibility edges);
///  - single-user instances must match the closed-form optimum.
struct ValidationOutcome {
  int instances = 0;
  int infeasible_instances = 0;
  int equal_grid_mismatches = 0;
  double max_gap_below = 0.0;  // dense reference minus solver, bits
  double max_gap_above = 0.0;  // solver minus dense reference, bits
  double max_wf_gap = 0.0;     // |t* - closed form| in final grid steps
  int failures = 0;
};

namespace detail {

struct DrawnInstance {
  std::size_t users = 1;
  std::array<double, 2> h{}, mu{}, lambda_s{}, rho{};
  double lambda_r = 0.0;
  double sigma2 = 1.0;
  ReceiverModel model = ReceiverModel::Ideal;
  double pi_e = 0.0;
  std::vector<double> caps;
};

inline DrawnInstance draw_instance(UniformSource& rng, std::size_t users) {
  DrawnInstance d;
  d.users = users;
  const auto uni = [&](double lo, double hi) { return lo + (hi - lo) * rng.next(); };
  const int model_pick = static_cast<int>(rng.next() * 3.0);
  d.model = model_pick == 0   ? ReceiverModel::Ideal
            : model_pick == 1 ? ReceiverModel::TimeSwitching
                              : ReceiverModel::PowerSplitting;
  d.pi_e = d.model == ReceiverModel::Ideal ? 0.0
                                           : (rng.next() < 0.5 ? 0.0 : uni(0.0, 0.5));
  d.caps.resize(users);
  double min_price_over_gain = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < users; ++i) {
    d.h[i] = uni(0.1, 4.0);
    d.mu[i] = uni(0.1, 1.0);
    d.lambda_s[i] = uni(0.02, 0.2);
    d.caps[i] = uni(1.0, 2.5);
    min_price_over_gain = std::min(min_price_over_gain, d.lambda_s[i] / d.h[i]);
  }
  if (users == 2 && rng.next() < 0.1) d.mu[rng.next() < 0.5 ? 0 : 1] = 0.0;
  // keep every net power price positive so the continuous optimum is finite
  d.lambda_r = rng.next() < 0.2 ? uni(0.0, 0.5) * min_price_over_gain : 0.0;

  const CapScale cs = cap_scale(d.model, d.pi_e);
  if (rng.next() < 0.7) {
    std::array<double, 2> want{};
    for (std::size_t i = 0; i < users; ++i) want[i] = uni(0.0, 0.3);
    double shrink = 1.0;
    double ssum = 0.0, rsum = 0.0;
    for (std::size_t i = 0; i < users; ++i) {
      const double ci = cap_raw(d.h[i] * d.caps[i], d.sigma2, cs);
      if (want[i] > 0.0) shrink = std::min(shrink, 0.9 * ci / want[i]);
      ssum += d.h[i] * d.caps[i];
      rsum += want[i];
    }
    if (rsum > 0.0)
      shrink = std::min(shrink, 0.9 * cap_raw(ssum, d.sigma2, cs) / rsum);
    for (std::size_t i = 0; i < users; ++i) d.rho[i] = want[i] * std::max(shrink, 0.0);
  }
  return d;
}

}  // namespace detail

inline ValidationOutcome validate_solver(int instances, std::uint64_t seed, double tol = 1e-3) {
  if (instances < 1) throw invalid_parameter("validate_solver: need at least one instance");
  detail::UniformSource rng(seed);
  ValidationOutcome out;
  for (int n = 0; n < instances; ++n) {
    const std::size_t users = (n % 10) < 7 ? 1 : 2;
    const detail::DrawnInstance d = detail::draw_instance(rng, users);
    PerStateProblem p;
    p.h = d.h.data();
    p.mu = d.mu.data();
    p.lambda_s = d.lambda_s.data();
    p.lambda_r = d.lambda_r;
    p.rho = d.rho.data();
    p.users = users;
    p.sigma2 = d.sigma2;
    p.model = d.model;
    p.pi_e = d.pi_e;
    ++out.instances;
    bool bad = false;

    // identical lattice: exact agreement
    const GridSpec shared{33, 1, d.caps};
    const PerStateResult a = per_state_solve(p, shared, /*strict=*/false);
    const OracleResult b = per_state_oracle(p, d.caps, 33);
    bool same = a.feasible == b.feasible;
    if (same && a.feasible) {
      same = a.objective == b.objective;
      for (std::size_t i = 0; i < users; ++i) same = same && a.t[i] == b.t[i];
    }
    if (!same) {
      ++out.equal_grid_mismatches;
      bad = true;
    }

    if (!a.feasible) {
      ++out.infeasible_instances;
      if (bad) ++out.failures;
      continue;
    }

    // refined solver vs dense reference
    const GridSpec refined{17, 4, d.caps};
    const PerStateResult fine = per_state_solve(p, refined, /*strict=*/false);
    const int dense_points = users == 1 ? 100001 : 1401;
    const OracleResult dense = per_state_oracle(p, d.caps, dense_points);
    const double below = dense.objective - fine.objective;
    const double above = fine.objective - dense.objective;
    out.max_gap_below = std::max(out.max_gap_below, below);
    out.max_gap_above = std::max(out.max_gap_above, above);
    if (below > tol || above > 10.0 * tol) bad = true;

    // Feasibility excludes t below the min-rate floor, so the single-user
    // objective is concave on its feasible interval and the refined argmax
    // must land within one final lattice step of the closed form.
    if (users == 1) {
      const double a0 = d.lambda_s[0] - d.lambda_r * d.h[0];
      const double tstar =
          water_fill_power(d.mu[0], a0, d.h[0], d.sigma2, d.rho[0], d.caps[0], d.model, d.pi_e);
      if (!std::isnan(tstar)) {
        const double G1 = static_cast<double>(refined.points - 1);
        const double step =
            d.caps[0] * (1.0 / G1) * std::pow(2.0 / G1, refined.rounds - 1);
        const double gap = std::fabs(fine.t[0] - tstar) / step;
        out.max_wf_gap = std::max(out.max_wf_gap, gap);
        if (gap > 1.0 + 1e-9) bad = true;
      }
    }

    if (bad) ++out.failures;
  }
  return out;
}

}  // namespace swiptmac
