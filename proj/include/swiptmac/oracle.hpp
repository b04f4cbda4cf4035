#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "swiptmac/errors.hpp"
#include "swiptmac/optimizer.hpp"
#include "swiptmac/region.hpp"

namespace swiptmac {

/// Exhaustive reference maximizer for the per-state Lagrangian, one or two
/// users. No refinement rounds and no pruning: a single flat scan of the full
/// lattice {0, cap/(N-1), ..., cap}. Slow on purpose; exists to check
/// per_state_solve. On a lattice equal to the solver's first round the two
/// agree bit for bit because both evaluate the same expressions at the same
/// sample points.
struct OracleResult {
  std::array<double, 2> t{};
  std::array<double, 2> r{};
  double objective = -std::numeric_limits<double>::infinity();
  bool feasible = false;
};

inline OracleResult per_state_oracle(const PerStateProblem& p, const std::vector<double>& caps,
                                     int points) {
  if (p.users < 1 || p.users > 2)
    throw invalid_parameter("per_state_oracle: reference covers 1 or 2 users");
  if (points < 2) throw invalid_parameter("per_state_oracle: need at least 2 points");
  if (caps.size() != p.users) throw invalid_parameter("per_state_oracle: caps size mismatch");

  const detail::CapScale cs = detail::cap_scale(p.model, p.pi_e);
  OracleResult out;

  if (p.users == 1) {
    const double a0 = p.lambda_s[0] - p.lambda_r * p.h[0];
    for (int j = 0; j < points; ++j) {
      const double t0 = detail::lattice_point(0.0, caps[0], j, points);
      const double c0 = detail::cap_raw(p.h[0] * t0, p.sigma2, cs);
      if (p.rho[0] > c0) continue;
      double r0 = c0;
      double rate = p.mu[0] * c0;
      const double alt = p.mu[0] * p.rho[0];
      if (alt > rate) {
        rate = alt;
        r0 = p.rho[0];
      }
      const double obj = rate - a0 * t0;
      if (obj > out.objective) {
        out.objective = obj;
        out.t[0] = t0;
        out.r[0] = r0;
      }
    }
    out.feasible = out.objective != -std::numeric_limits<double>::infinity();
    return out;
  }

  const double a0 = p.lambda_s[0] - p.lambda_r * p.h[0];
  const double a1 = p.lambda_s[1] - p.lambda_r * p.h[1];
  const double mu0 = p.mu[0], mu1 = p.mu[1];
  const double rho0 = p.rho[0], rho1 = p.rho[1];
  for (int j0 = 0; j0 < points; ++j0) {
    const double t0 = detail::lattice_point(0.0, caps[0], j0, points);
    const double s0 = p.h[0] * t0;
    const double c0 = detail::cap_raw(s0, p.sigma2, cs);
    const double w0 = a0 * t0;
    for (int j1 = 0; j1 < points; ++j1) {
      const double t1 = detail::lattice_point(0.0, caps[1], j1, points);
      const double c1 = detail::cap_raw(p.h[1] * t1, p.sigma2, cs);
      const double c01 = detail::cap_raw(s0 + p.h[1] * t1, p.sigma2, cs);
      if (rho0 > c0 || rho1 > c1 || rho0 + rho1 > c01) continue;
      double rate = -std::numeric_limits<double>::infinity();
      double r0 = 0.0, r1 = 0.0;
      const auto consider = [&](double x0, double x1) {
        if (x0 >= rho0 && x1 >= rho1) {
          const double o = mu0 * x0 + mu1 * x1;
          if (o > rate) {
            rate = o;
            r0 = x0;
            r1 = x1;
          }
        }
      };
      consider(c0, std::min(c1, c01 - c0));
      consider(std::min(c0, c01 - c1), c1);
      consider(rho0, std::min(c1, c01 - rho0));
      consider(std::min(c0, c01 - rho1), rho1);
      consider(rho0, rho1);
      const double obj = rate - (w0 + a1 * t1);
      if (obj > out.objective) {
        out.objective = obj;
        out.t[0] = t0;
        out.t[1] = t1;
        out.r[0] = r0;
        out.r[1] = r1;
      }
    }
  }
  out.feasible = out.objective != -std::numeric_limits<double>::infinity();
  return out;
}

/// Closed-form continuous optimum for a single user (water-filling with a
/// rate floor): maximize mu C(t) - lambda t over t in [0, cap] subject to
/// C(t) >= rho, where C is the model capacity at erasure fraction pi_e.
/// Returns the optimal t; NaN when the rate floor does not fit below the cap.
inline double water_fill_power(double mu, double lambda, double h, double sigma2, double rho,
                               double cap, ReceiverModel model, double pi_e) {
  const detail::CapScale cs = detail::cap_scale(model, pi_e);
  const double muf = mu * cs.prelog;
  const double t_rho =
      rho > 0.0 ? (sigma2 / (cs.snr_scale * h)) * (std::pow(2.0, 2.0 * rho / cs.prelog) - 1.0)
                : 0.0;
  if (t_rho > cap) return std::numeric_limits<double>::quiet_NaN();
  double t_wf;
  if (lambda <= 0.0) {
    t_wf = cap;
  } else {
    t_wf = muf / (2.0 * lambda * std::log(2.0)) - sigma2 / (cs.snr_scale * h);
  }
  return std::min(cap, std::max(t_wf, t_rho));
}

}  // namespace swiptmac
