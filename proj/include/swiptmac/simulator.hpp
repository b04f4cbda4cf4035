#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "swiptmac/errors.hpp"
#include "swiptmac/optimizer.hpp"
#include "swiptmac/region.hpp"
#include "swiptmac/scenario.hpp"

namespace swiptmac {

namespace detail {

/// Uniform doubles in [0, 1) from the raw engine words. Distributions are
/// hand-rolled on top of this: the standard library engine is pinned by the
/// standard, its distributions are not, and reproducibility across compilers
/// matters more here than sampling speed.
class UniformSource {
 public:
  explicit UniformSource(std::uint64_t seed) : eng_(seed) {}
  double next() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 eng_;
};

inline double sample_harvest(HarvestKind kind, double mean, double u) {
  switch (kind) {
    case HarvestKind::Constant:
      return mean;
    case HarvestKind::Exponential:
      return -mean * std::log1p(-u);
    case HarvestKind::Uniform:
      return 2.0 * mean * u;
    case HarvestKind::TwoPoint:
      return u < 0.5 ? 0.0 : 2.0 * mean;
  }
  return mean;
}

inline double sample_gaussian(double u1, double u2) {
  // Box-Muller, cosine branch only: fixed two-uniform cost per draw.
  const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
  return r * std::cos(2.0 * 3.14159265358979323846 * u2);
}

/// Withdraws min(nominal, buf + harvest) from the buffer such that
/// spend + new_buffer == fl(buf + harvest) holds exactly. Case 1 (everything
/// spent) is trivially exact; case 2 rounds the remainder first and then
/// recovers the spend by a subtraction that Sterbenz's lemma makes exact:
/// either mid <= 2 * nominal (so mid - nominal is exact) or the remainder
/// exceeds mid / 2 (so mid - remainder is exact).
struct SpendResult {
  double spend = 0.0;
  double buffer = 0.0;
  bool clipped = false;
};

inline SpendResult buffered_spend(double buf, double harvest, double nominal) {
  SpendResult out;
  const double mid = buf + harvest;
  if (nominal >= mid) {
    out.spend = mid;
    out.buffer = 0.0;
    out.clipped = nominal > mid;
  } else {
    const double nb = mid - nominal;
    out.spend = mid - nb;
    out.buffer = nb;
  }
  return out;
}

}  // namespace detail

/// How the receiver-side RF energy per slot is formed from the transmit
/// energies: its conditional expectation given the fade state, or a sample
/// with per-user standard-normal amplitude coefficients.
enum class XiMode { Expectation, Sampled };

/// Time-switching receivers either harvest exactly when the battery cannot
/// cover a decoding slot, or flip an erasure coin with the design fraction.
enum class TsRule { Threshold, Bernoulli };

struct SimOptions {
  std::uint64_t horizon = 100000;
  std::uint64_t seed = 1;
  XiMode xi_mode = XiMode::Expectation;
  TsRule ts_rule = TsRule::Threshold;
  // Power-splitting erasure slots bank the full incident energy by default;
  // with the strict flag only the design split fraction is harvestable.
  bool ps_strict_fraction = false;
};

/// Everything the simulator needs from a solved operating point: the
/// per-state transmit energies, the erasure fraction, and the rates credited
/// on slots the receiver actually decodes.
struct PolicyBundle {
  ReceiverModel model = ReceiverModel::Ideal;
  double pi_e = 0.0;
  PolicyTable policy;
  std::vector<double> cond_rates;  // [states * users]
};

/// Time-switching region rates average over erasure slots; decoding slots
/// must carry rate / (1 - pi) for the average to come out right. The
/// power-splitting penalty acts on every decoded slot instead.
inline PolicyBundle make_policy_bundle(const Scenario& sc, const BoundaryPoint& bp,
                                       ReceiverModel model) {
  if (bp.policy.states != sc.fading.states || bp.policy.users != sc.users())
    throw invalid_parameter("make_policy_bundle: policy does not match the scenario");
  PolicyBundle b;
  b.model = model;
  b.pi_e = bp.pi_e;
  b.policy = bp.policy;
  b.cond_rates = bp.state_rates;
  if (model == ReceiverModel::TimeSwitching && bp.pi_e > 0.0) {
    if (bp.pi_e >= 1.0)
      throw invalid_parameter("make_policy_bundle: erasure fraction must be < 1");
    for (double& r : b.cond_rates) r /= (1.0 - bp.pi_e);
  }
  return b;
}

/// Constant transmit energies, zero credited rates; used to exercise the
/// energy side of the simulator in isolation.
inline PolicyBundle make_constant_bundle(const Scenario& sc, const std::vector<double>& t_const,
                                         ReceiverModel model, double pi_e) {
  if (t_const.size() != sc.users())
    throw invalid_parameter("make_constant_bundle: power size mismatch");
  PolicyBundle b;
  b.model = model;
  b.pi_e = pi_e;
  b.policy.users = sc.users();
  b.policy.states = sc.fading.states;
  b.policy.powers.resize(sc.users() * sc.fading.states);
  for (std::size_t s = 0; s < sc.fading.states; ++s)
    for (std::size_t i = 0; i < sc.users(); ++i) b.policy.powers[s * sc.users() + i] = t_const[i];
  b.cond_rates.assign(sc.users() * sc.fading.states, 0.0);
  return b;
}

struct SimStats {
  std::uint64_t horizon = 0;
  std::vector<double> mean_power;      // J/slot actually radiated, per user
  std::vector<double> mean_rate;       // bits/use credited, per user
  std::vector<double> final_tx_buffer; // J left in each transmit battery
  double final_rx_buffer = 0.0;
  double erasure_fraction = 0.0;   // slots whose RF energy went to harvesting
  double rx_outage_fraction = 0.0; // decode attempts dropped for lack of energy
  double clip_fraction = 0.0;      // slots where some transmitter fell short
  double delivered_rf = 0.0;       // J/slot banked at the receiver from RF
  double mean_xi = 0.0;            // J/slot incident RF energy
  bool conservation_ok = true;     // per-slot energy identity held exactly
};

/// Slot-by-slot rollout. Per slot, in fixed draw order: fade state, one
/// harvest per transmitter, amplitude gaussians (sampled mode only), the
/// erasure coin (Bernoulli rule only). The order and count never depend on
/// runtime values, so a longer horizon extends a shorter one's sample path.
inline SimStats run_simulation(const Scenario& sc, const PolicyBundle& b,
                               const SimOptions& opts) {
  sc.validate();
  const std::size_t L = sc.users();
  const std::size_t S = sc.fading.states;
  if (b.policy.users != L || b.policy.states != S || b.cond_rates.size() != L * S)
    throw invalid_parameter("run_simulation: bundle does not match the scenario");
  if (opts.horizon == 0) throw invalid_parameter("run_simulation: horizon must be positive");
  if (!(b.pi_e >= 0.0 && b.pi_e < 1.0))
    throw invalid_parameter("run_simulation: erasure fraction must be in [0, 1)");

  std::vector<double> cum(S);
  double acc = 0.0;
  for (std::size_t s = 0; s < S; ++s) {
    acc += sc.fading.prob[s];
    cum[s] = acc;
  }
  cum[S - 1] = 1.0;

  detail::UniformSource rng(opts.seed);
  const bool sample_xi = opts.xi_mode == XiMode::Sampled;
  const bool bernoulli =
      b.model == ReceiverModel::TimeSwitching && opts.ts_rule == TsRule::Bernoulli;

  std::vector<double> tx_buf(L, 0.0);
  double rx_buf = 0.0;
  std::vector<double> power_sum(L, 0.0), rate_sum(L, 0.0);
  std::vector<double> spend(L, 0.0);
  std::uint64_t erasures = 0, outages = 0, clipped_slots = 0;
  double delivered_sum = 0.0, xi_sum = 0.0;
  bool conserved = true;

  const double rx_need = sc.rx.rx_consumption;
  const double rx_ambient = sc.rx.rx_harvest;

  for (std::uint64_t slot = 0; slot < opts.horizon; ++slot) {
    const double us = rng.next();
    const std::size_t s =
        std::upper_bound(cum.begin(), cum.end(), us) - cum.begin();
    const double* h = sc.fading.state_gains(s);
    const double* nominal = b.policy.row(s);

    bool clip = false;
    for (std::size_t i = 0; i < L; ++i) {
      const double y = detail::sample_harvest(sc.harvest_kind, sc.harvest_mean[i], rng.next());
      const double mid = tx_buf[i] + y;
      const detail::SpendResult sr = detail::buffered_spend(tx_buf[i], y, nominal[i]);
      if (sr.spend + sr.buffer != mid) conserved = false;
      tx_buf[i] = sr.buffer;
      spend[i] = sr.spend;
      power_sum[i] += sr.spend;
      clip = clip || sr.clipped;
    }
    if (clip) ++clipped_slots;

    double xi;
    if (sample_xi) {
      double amp = 0.0;
      for (std::size_t i = 0; i < L; ++i) {
        const double u1 = rng.next();
        const double u2 = rng.next();
        amp += std::sqrt(h[i] * spend[i]) * detail::sample_gaussian(u1, u2);
      }
      xi = sc.rx.eta * amp * amp;
    } else {
      double p = 0.0;
      for (std::size_t i = 0; i < L; ++i) p += h[i] * spend[i];
      xi = sc.rx.eta * p;
    }
    xi_sum += xi;

    bool decoded = false;
    switch (b.model) {
      case ReceiverModel::Ideal:
        decoded = true;
        break;
      case ReceiverModel::TimeSwitching: {
        if (bernoulli) {
          const double coin = rng.next();
          if (coin < b.pi_e) {
            rx_buf += rx_ambient + xi;
            delivered_sum += xi;
            ++erasures;
          } else if (rx_buf + rx_ambient >= rx_need) {
            const detail::SpendResult sr = detail::buffered_spend(rx_buf, rx_ambient, rx_need);
            rx_buf = sr.buffer;
            decoded = true;
          } else {
            rx_buf += rx_ambient;  // incident energy is lost, not banked
            ++outages;
          }
        } else {
          if (rx_buf + rx_ambient >= rx_need) {
            const detail::SpendResult sr = detail::buffered_spend(rx_buf, rx_ambient, rx_need);
            rx_buf = sr.buffer;
            decoded = true;
          } else {
            rx_buf += rx_ambient + xi;
            delivered_sum += xi;
            ++erasures;
          }
        }
        break;
      }
      case ReceiverModel::PowerSplitting: {
        const double split = b.pi_e * xi;
        if (rx_buf + rx_ambient + split >= rx_need) {
          const detail::SpendResult sr =
              detail::buffered_spend(rx_buf, rx_ambient + split, rx_need);
          rx_buf = sr.buffer;
          delivered_sum += split;
          decoded = true;
        } else {
          const double banked = opts.ps_strict_fraction ? split : xi;
          rx_buf += rx_ambient + banked;
          delivered_sum += banked;
          ++erasures;
        }
        break;
      }
    }

    if (decoded && !clip) {
      const double* r = b.cond_rates.data() + s * L;
      for (std::size_t i = 0; i < L; ++i) rate_sum[i] += r[i];
    }
  }

  SimStats st;
  st.horizon = opts.horizon;
  const double n = static_cast<double>(opts.horizon);
  st.mean_power.resize(L);
  st.mean_rate.resize(L);
  for (std::size_t i = 0; i < L; ++i) {
    st.mean_power[i] = power_sum[i] / n;
    st.mean_rate[i] = rate_sum[i] / n;
  }
  st.final_tx_buffer = tx_buf;
  st.final_rx_buffer = rx_buf;
  st.erasure_fraction = static_cast<double>(erasures) / n;
  st.rx_outage_fraction = static_cast<double>(outages) / n;
  st.clip_fraction = static_cast<double>(clipped_slots) / n;
  st.delivered_rf = delivered_sum / n;
  st.mean_xi = xi_sum / n;
  st.conservation_ok = conserved;
  return st;
}

}  // namespace swiptmac
