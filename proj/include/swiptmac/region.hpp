#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "swiptmac/errors.hpp"
#include "swiptmac/fading.hpp"

namespace swiptmac {

/// Receiver architectures. Ideal decodes and harvests the same signal;
/// TimeSwitching erases a fraction pi_e of slots to harvest; PowerSplitting
/// diverts a fraction pi_e of received signal power to the harvester in
/// every slot.
enum class ReceiverModel { Ideal, TimeSwitching, PowerSplitting };

inline const char* model_name(ReceiverModel m) {
  switch (m) {
    case ReceiverModel::Ideal: return "ideal";
    case ReceiverModel::TimeSwitching: return "ts";
    case ReceiverModel::PowerSplitting: return "ps";
  }
  return "?";
}

/// Receiver energy bookkeeping, all in joules per slot.
///   rx_consumption  E[T^r], energy the receive chain burns per received slot
///   rx_harvest      E[Y^r], ambient (non-RF) harvest mean
///   eta             RF-to-DC conversion efficiency in (0, 1]
struct ReceiverEnergetics {
  double rx_consumption = 0.0;
  double rx_harvest = 0.0;
  double eta = 1.0;
};

/// Energy deficit (E[T^r] - E[Y^r])^+ the RF link has to cover.
inline double deficit(const ReceiverEnergetics& rx) {
  const double d = rx.rx_consumption - rx.rx_harvest;
  return d > 0.0 ? d : 0.0;
}

/// Per-state transmit energies, one row per joint fade state.
struct PolicyTable {
  std::size_t users = 0;
  std::size_t states = 0;
  std::vector<double> powers;  // [states * users], joules per slot

  const double* row(std::size_t s) const { return powers.data() + s * users; }
  double* row(std::size_t s) { return powers.data() + s * users; }
};

/// eta * sum_i E[H(i) T_i(H)]: mean RF energy per slot converted at the
/// receiver under the given policy.
inline double delivered_rf_power(const JointFadeTable& t, const PolicyTable& p, double eta) {
  if (p.users != t.users || p.states != t.states)
    throw invalid_parameter("delivered_rf_power: policy shape does not match fade table");
  if (!(eta > 0.0) || !(eta <= 1.0))
    throw invalid_parameter("delivered_rf_power: eta must be in (0, 1]");
  double acc = 0.0;
  for (std::size_t s = 0; s < t.states; ++s) {
    const double* h = t.state_gains(s);
    const double* w = p.row(s);
    double dot = 0.0;
    for (std::size_t i = 0; i < t.users; ++i) dot += h[i] * w[i];
    acc += t.prob[s] * dot;
  }
  return eta * acc;
}

/// Fraction of slots (TS) or of signal power (PS) diverted to harvesting so
/// the deficit is covered on average: min(deficit / delivered, 1).
inline double erasure_fraction(double deficit_j, double delivered_j) {
  if (deficit_j <= 0.0) return 0.0;
  if (!(delivered_j > 0.0))
    throw infeasible_energy("erasure_fraction: positive deficit with no delivered RF energy");
  const double r = deficit_j / delivered_j;
  return r < 1.0 ? r : 1.0;
}

namespace detail {

// Receiver models reduce to two scalars applied around one log:
//   C = prelog * 0.5 log2(1 + snr_scale * S / sigma2).
struct CapScale {
  double prelog = 1.0;
  double snr_scale = 1.0;
};

inline CapScale cap_scale(ReceiverModel model, double pi_e) {
  switch (model) {
    case ReceiverModel::Ideal: return {1.0, 1.0};
    case ReceiverModel::TimeSwitching: return {1.0 - pi_e, 1.0};
    case ReceiverModel::PowerSplitting: return {1.0, 1.0 - pi_e};
  }
  return {1.0, 1.0};
}

inline double cap_raw(double s, double sigma2, CapScale cs) {
  return cs.prelog * (0.5 * std::log2(1.0 + cs.snr_scale * s / sigma2));
}

}  // namespace detail

/// C_A(h, t): capacity of user subset A (bitmask over users) in one fade
/// state, bits per channel use.
///   Ideal:          0.5 log2(1 + S/sigma2)
///   TimeSwitching:  (1 - pi_e) * 0.5 log2(1 + S/sigma2)
///   PowerSplitting: 0.5 log2(1 + (1 - pi_e) S/sigma2)
/// with S = sum_{i in A} h(i) t(i).
inline double state_capacity(std::uint32_t subset, const double* h, const double* t,
                             std::size_t users, double sigma2, ReceiverModel model,
                             double pi_e = 0.0) {
  if (users == 0 || users > 16) throw invalid_parameter("state_capacity: need 1..16 users");
  if (subset == 0 || subset >= (1u << users))
    throw invalid_parameter("state_capacity: subset mask out of range");
  if (!(sigma2 > 0.0)) throw invalid_parameter("state_capacity: sigma2 must be > 0");
  if (!(pi_e >= 0.0) || !(pi_e <= 1.0))
    throw invalid_parameter("state_capacity: pi_e must be in [0, 1]");
  double s = 0.0;
  for (std::size_t i = 0; i < users; ++i)
    if (subset & (1u << i)) s += h[i] * t[i];
  return detail::cap_raw(s, sigma2, detail::cap_scale(model, pi_e));
}

/// E_H[C_A(H, T(H))] for every nonempty subset. Entry [mask - 1] is the bound
/// for subset `mask`.
inline std::vector<double> ergodic_bounds(const JointFadeTable& t, const PolicyTable& p,
                                          double sigma2, ReceiverModel model,
                                          double pi_e = 0.0) {
  if (t.users > 16) throw invalid_parameter("ergodic_bounds: subset enumeration capped at 16 users");
  if (p.users != t.users || p.states != t.states)
    throw invalid_parameter("ergodic_bounds: policy shape does not match fade table");
  const std::uint32_t masks = (1u << t.users) - 1;
  std::vector<double> b(masks, 0.0);
  for (std::size_t s = 0; s < t.states; ++s) {
    const double* h = t.state_gains(s);
    const double* w = p.row(s);
    for (std::uint32_t m = 1; m <= masks; ++m)
      b[m - 1] += t.prob[s] * state_capacity(m, h, w, t.users, sigma2, model, pi_e);
  }
  return b;
}

/// True iff rho(A) <= R(A) <= bound(A) for every nonempty subset A, within
/// +-tol on both sides.
inline bool region_contains(const std::vector<double>& rates, const std::vector<double>& bounds,
                            const std::vector<double>& rho, double tol = 0.0) {
  const std::size_t L = rates.size();
  if (L == 0 || L > 16) throw invalid_parameter("region_contains: need 1..16 users");
  if (rho.size() != L) throw invalid_parameter("region_contains: rho size mismatch");
  const std::uint32_t masks = (1u << L) - 1;
  if (bounds.size() != masks) throw invalid_parameter("region_contains: bounds size mismatch");
  for (std::uint32_t m = 1; m <= masks; ++m) {
    double rsum = 0.0, rhosum = 0.0;
    for (std::size_t i = 0; i < L; ++i) {
      if (m & (1u << i)) {
        rsum += rates[i];
        rhosum += rho[i];
      }
    }
    if (rsum < rhosum - tol) return false;
    if (rsum > bounds[m - 1] + tol) return false;
  }
  return true;
}

/// True iff the pentagon at (h, t) can carry the per-user minimum rates:
/// rho(A) <= C_A(h, t) for every nonempty A.
inline bool feasible_min_rates(const double* h, const double* t, const std::vector<double>& rho,
                               double sigma2, ReceiverModel model, double pi_e = 0.0) {
  const std::size_t L = rho.size();
  if (L == 0 || L > 16) throw invalid_parameter("feasible_min_rates: need 1..16 users");
  const std::uint32_t masks = (1u << L) - 1;
  for (std::uint32_t m = 1; m <= masks; ++m) {
    double rhosum = 0.0;
    for (std::size_t i = 0; i < L; ++i)
      if (m & (1u << i)) rhosum += rho[i];
    if (rhosum > state_capacity(m, h, t, L, sigma2, model, pi_e)) return false;
  }
  return true;
}

}  // namespace swiptmac
