#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "swiptmac/errors.hpp"

namespace swiptmac {

/// Finite single-user fading distribution: strictly increasing positive gains
/// with a pmf that sums to one.
struct MarginalFading {
  std::vector<double> gain;
  std::vector<double> prob;

  std::size_t size() const { return gain.size(); }

  double mean() const {
    double m = 0.0;
    for (std::size_t i = 0; i < gain.size(); ++i) m += prob[i] * gain[i];
    return m;
  }
};

namespace detail {

inline void check_marginal(const MarginalFading& m) {
  if (m.gain.empty() || m.gain.size() != m.prob.size())
    throw invalid_parameter("fading marginal: empty or mismatched gain/prob arrays");
  double prev = 0.0;
  for (std::size_t i = 0; i < m.gain.size(); ++i) {
    if (!(m.gain[i] > prev))
      throw invalid_parameter("fading marginal: gains must be strictly increasing and positive");
    if (!(m.prob[i] >= 0.0) || !(m.prob[i] <= 1.0))
      throw invalid_parameter("fading marginal: probabilities must lie in [0, 1]");
    prev = m.gain[i];
  }
  double s = std::accumulate(m.prob.begin(), m.prob.end(), 0.0);
  if (std::fabs(s - 1.0) > 1e-9)
    throw invalid_parameter("fading marginal: pmf must sum to 1, got " + std::to_string(s));
}

}  // namespace detail

/// Quantizes a Rayleigh(scale) gain distribution onto the grid
/// {q, 2q, ..., floor(h_max/q)*q}. Point i carries the CDF mass of
/// ((i-1)q, iq]; all mass above the last point is folded into it, so the
/// pmf sums to exactly 1.
///
/// CDF: F(x) = 1 - exp(-x^2 / (2 scale^2)).
inline MarginalFading quantize_rayleigh(double scale, double q, double h_max) {
  if (!(scale > 0.0)) throw invalid_parameter("quantize_rayleigh: scale must be > 0");
  if (!(q > 0.0)) throw invalid_parameter("quantize_rayleigh: q must be > 0");
  if (!(h_max >= q)) throw invalid_parameter("quantize_rayleigh: h_max must be >= q");

  const auto cdf = [scale](double x) { return 1.0 - std::exp(-x * x / (2.0 * scale * scale)); };
  const std::size_t n = static_cast<std::size_t>(std::floor(h_max / q + 1e-12));

  MarginalFading m;
  m.gain.resize(n);
  m.prob.resize(n);
  double partial = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    m.gain[i] = q * static_cast<double>(i + 1);
    if (i + 1 < n) {
      m.prob[i] = cdf(m.gain[i]) - cdf(m.gain[i] - q);
      partial += m.prob[i];
    }
  }
  // Tail fold; written as 1 - partial so the running sum is exactly 1.
  m.prob[n - 1] = 1.0 - partial;
  detail::check_marginal(m);
  return m;
}

/// Constant (single-point) gain.
inline MarginalFading constant_gain(double g) {
  if (!(g > 0.0)) throw invalid_parameter("constant_gain: gain must be > 0");
  return MarginalFading{{g}, {1.0}};
}

/// Cartesian product of independent per-user marginals. Joint states are
/// enumerated lexicographically with user 0 as the most significant digit:
/// state s has per-user indices (s / stride_0 % n_0, ..., s % n_{L-1}).
struct JointFadeTable {
  std::size_t users = 0;
  std::size_t states = 0;
  std::vector<double> prob;  // [states]
  std::vector<double> gain;  // [states * users], gain[s * users + i]

  const double* state_gains(std::size_t s) const { return gain.data() + s * users; }
};

inline JointFadeTable joint_states(const std::vector<MarginalFading>& marginals) {
  if (marginals.empty() || marginals.size() > 16)
    throw invalid_parameter("joint_states: need between 1 and 16 users");
  std::size_t total = 1;
  for (const auto& m : marginals) {
    detail::check_marginal(m);
    if (m.size() > 10'000'000 / total)
      throw invalid_parameter("joint_states: joint state count exceeds 10,000,000");
    total *= m.size();
  }

  const std::size_t L = marginals.size();
  JointFadeTable t;
  t.users = L;
  t.states = total;
  t.prob.resize(total);
  t.gain.resize(total * L);
  std::vector<std::size_t> idx(L, 0);
  for (std::size_t s = 0; s < total; ++s) {
    double p = 1.0;
    for (std::size_t i = 0; i < L; ++i) {
      p *= marginals[i].prob[idx[i]];
      t.gain[s * L + i] = marginals[i].gain[idx[i]];
    }
    t.prob[s] = p;
    // lexicographic increment, last user fastest
    for (std::size_t i = L; i-- > 0;) {
      if (++idx[i] < marginals[i].size()) break;
      idx[i] = 0;
    }
  }
  return t;
}

/// E[f(H)] over the joint table. f receives a pointer to the L gains of one
/// state.
template <typename F>
double expect(const JointFadeTable& t, F&& f) {
  double acc = 0.0;
  for (std::size_t s = 0; s < t.states; ++s) acc += t.prob[s] * f(t.state_gains(s));
  return acc;
}

/// E[H(i)] for one user.
inline double marginal_mean(const JointFadeTable& t, std::size_t user) {
  if (user >= t.users) throw invalid_parameter("marginal_mean: user index out of range");
  double acc = 0.0;
  for (std::size_t s = 0; s < t.states; ++s) acc += t.prob[s] * t.gain[s * t.users + user];
  return acc;
}

}  // namespace swiptmac
