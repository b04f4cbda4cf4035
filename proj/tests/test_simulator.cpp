#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "swiptmac/config.hpp"
#include "swiptmac/fading.hpp"
#include "swiptmac/optimizer.hpp"
#include "swiptmac/simulator.hpp"

using namespace swiptmac;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::string config_path(const char* name) {
  return std::string(SWIPTMAC_CONFIG_DIR) + "/" + name;
}

// Single fade state, constant harvests: every branch of the receiver logic
// becomes deterministic and checkable by hand.
Scenario degenerate_scenario(double gain, double harvest, double rx_need, double rx_ambient,
                             double eta) {
  Scenario sc;
  sc.fading = joint_states({constant_gain(gain)});
  sc.harvest_mean = {harvest};
  sc.harvest_kind = HarvestKind::Constant;
  sc.rho = {0.0};
  sc.sigma2 = 1.0;
  sc.rx = {rx_need, rx_ambient, eta};
  return sc;
}

PolicyBundle hand_bundle(const Scenario& sc, ReceiverModel model, double pi_e, double t,
                         double rate) {
  PolicyBundle b = make_constant_bundle(sc, {t}, model, pi_e);
  for (double& r : b.cond_rates) r = rate;
  return b;
}

bool same_stats(const SimStats& a, const SimStats& b) {
  return a.horizon == b.horizon && a.mean_power == b.mean_power && a.mean_rate == b.mean_rate &&
         a.final_tx_buffer == b.final_tx_buffer && a.final_rx_buffer == b.final_rx_buffer &&
         a.erasure_fraction == b.erasure_fraction &&
         a.rx_outage_fraction == b.rx_outage_fraction && a.clip_fraction == b.clip_fraction &&
         a.delivered_rf == b.delivered_rf && a.mean_xi == b.mean_xi &&
         a.conservation_ok == b.conservation_ok;
}

}  // namespace

TEST_CASE("buffered spend conserves energy bit for bit") {
  detail::UniformSource rng(4242);
  int clipped = 0;
  for (int n = 0; n < 20000; ++n) {
    const double scale = std::pow(10.0, -15.0 + 30.0 * rng.next());
    const double buf = scale * rng.next();
    const double harvest = scale * rng.next();
    const double nominal = 1.5 * scale * rng.next();
    const double mid = buf + harvest;
    const detail::SpendResult sr = detail::buffered_spend(buf, harvest, nominal);
    REQUIRE(sr.spend + sr.buffer == mid);
    REQUIRE(sr.spend >= 0.0);
    REQUIRE(sr.buffer >= 0.0);
    if (sr.clipped) {
      ++clipped;
      REQUIRE(sr.spend == mid);
      REQUIRE(sr.buffer == 0.0);
      REQUIRE(nominal > mid);
    } else {
      REQUIRE(std::fabs(sr.spend - nominal) <= 4.0 * std::numeric_limits<double>::epsilon() * mid);
    }
  }
  REQUIRE(clipped > 1000);  // both branches exercised
  // nominal == mid spends everything without counting as a clip
  const detail::SpendResult sr = detail::buffered_spend(0.25, 0.25, 0.5);
  REQUIRE(sr.spend == 0.5);
  REQUIRE_FALSE(sr.clipped);
}

TEST_CASE("harvest and amplitude samplers hit their design moments") {
  const int N = 200000;
  const double m = 2.5;
  struct KindSigma {
    HarvestKind kind;
    double sigma;
  };
  const KindSigma cases[] = {
      {HarvestKind::Constant, 0.0},
      {HarvestKind::Exponential, m},
      {HarvestKind::Uniform, m / std::sqrt(3.0)},
      {HarvestKind::TwoPoint, m},
  };
  for (const KindSigma& c : cases) {
    detail::UniformSource rng(7);
    double acc = 0.0;
    for (int i = 0; i < N; ++i) {
      const double y = detail::sample_harvest(c.kind, m, rng.next());
      REQUIRE(y >= 0.0);
      acc += y;
    }
    const double tol = c.sigma == 0.0 ? 1e-12 : 3.0 * c.sigma / std::sqrt(double(N));
    REQUIRE_THAT(acc / N, WithinAbs(m, tol));
  }

  detail::UniformSource rng(8);
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < N; ++i) {
    const double g = detail::sample_gaussian(rng.next(), rng.next());
    s1 += g;
    s2 += g * g;
  }
  REQUIRE_THAT(s1 / N, WithinAbs(0.0, 3.0 / std::sqrt(double(N))));
  REQUIRE_THAT(s2 / N, WithinAbs(1.0, 3.0 * std::sqrt(2.0 / double(N))));
}

TEST_CASE("identical seeds reproduce every statistic exactly") {
  const Scenario sc = build_scenario(load_config(config_path("small.cfg")));
  PolicyBundle b = make_constant_bundle(sc, sc.harvest_mean, ReceiverModel::TimeSwitching, 0.2);
  SimOptions opts;
  opts.horizon = 20000;
  opts.seed = 99;
  opts.xi_mode = XiMode::Sampled;  // widest draw footprint per slot
  opts.ts_rule = TsRule::Bernoulli;
  const SimStats a = run_simulation(sc, b, opts);
  const SimStats c = run_simulation(sc, b, opts);
  REQUIRE(same_stats(a, c));
  opts.seed = 100;
  const SimStats d = run_simulation(sc, b, opts);
  REQUIRE_FALSE(same_stats(a, d));
}

TEST_CASE("per-slot conservation holds in every mode") {
  const Scenario sc = build_scenario(load_config(config_path("small.cfg")));
  PolicyBundle b = make_constant_bundle(sc, sc.harvest_mean, ReceiverModel::TimeSwitching, 0.15);
  SimOptions opts;
  opts.horizon = 5000;
  for (XiMode xm : {XiMode::Expectation, XiMode::Sampled}) {
    for (TsRule rule : {TsRule::Threshold, TsRule::Bernoulli}) {
      opts.xi_mode = xm;
      opts.ts_rule = rule;
      REQUIRE(run_simulation(sc, b, opts).conservation_ok);
    }
  }
  b.model = ReceiverModel::PowerSplitting;
  REQUIRE(run_simulation(sc, b, opts).conservation_ok);
  b.model = ReceiverModel::Ideal;
  b.pi_e = 0.0;
  REQUIRE(run_simulation(sc, b, opts).conservation_ok);
}

TEST_CASE("ideal receiver credits every unclipped slot and keeps no bank") {
  const Scenario sc = degenerate_scenario(1.0, 2.0, 0.4, 0.05, 1.0);
  const PolicyBundle b = hand_bundle(sc, ReceiverModel::Ideal, 0.0, 1.0, 0.7);
  SimOptions opts;
  opts.horizon = 1000;
  const SimStats st = run_simulation(sc, b, opts);
  REQUIRE_THAT(st.mean_power[0], WithinRel(1.0, 1e-12));
  REQUIRE_THAT(st.mean_rate[0], WithinRel(0.7, 1e-12));
  REQUIRE(st.clip_fraction == 0.0);
  REQUIRE(st.erasure_fraction == 0.0);
  REQUIRE(st.final_rx_buffer == 0.0);
  REQUIRE(st.delivered_rf == 0.0);
  REQUIRE_THAT(st.mean_xi, WithinRel(1.0, 1e-12));
}

TEST_CASE("time-switching branches on the decode battery") {
  SimOptions opts;
  opts.horizon = 1000;

  SECTION("ambient alone funds decoding, so no slot is erased") {
    const Scenario sc = degenerate_scenario(1.0, 2.0, 0.1, 0.2, 1.0);
    const PolicyBundle b = hand_bundle(sc, ReceiverModel::TimeSwitching, 0.3, 1.0, 0.9);
    const SimStats st = run_simulation(sc, b, opts);
    REQUIRE(st.erasure_fraction == 0.0);
    REQUIRE(st.rx_outage_fraction == 0.0);
    REQUIRE_THAT(st.mean_rate[0], WithinRel(0.9, 1e-12));
    REQUIRE(st.delivered_rf == 0.0);
  }

  SECTION("an unpayable decode cost erases every slot") {
    // banked xi accrues 1 J/slot, so the cost must exceed the whole horizon
    const Scenario sc = degenerate_scenario(1.0, 2.0, 1e7, 0.0, 1.0);
    const PolicyBundle b = hand_bundle(sc, ReceiverModel::TimeSwitching, 0.3, 1.0, 0.9);
    const SimStats st = run_simulation(sc, b, opts);
    REQUIRE(st.erasure_fraction == 1.0);
    REQUIRE(st.mean_rate[0] == 0.0);
    // every slot banks xi = eta * h * t = 1
    REQUIRE_THAT(st.delivered_rf, WithinRel(1.0, 1e-12));
  }
}

TEST_CASE("power splitting banks the split share when decoding") {
  const Scenario sc = degenerate_scenario(1.0, 2.0, 0.4, 0.05, 1.0);
  const PolicyBundle b = hand_bundle(sc, ReceiverModel::PowerSplitting, 0.5, 1.0, 0.8);
  SimOptions opts;
  opts.horizon = 1000;
  const SimStats st = run_simulation(sc, b, opts);
  // xi = 1 per slot; the split share 0.5 covers rx_need with ambient, so
  // every slot decodes and banks exactly the split.
  REQUIRE(st.erasure_fraction == 0.0);
  REQUIRE_THAT(st.delivered_rf, WithinRel(0.5, 1e-12));
  REQUIRE_THAT(st.mean_rate[0], WithinRel(0.8, 1e-12));
  REQUIRE(st.final_rx_buffer > 0.0);  // 0.15 surplus per slot accumulates
}

TEST_CASE("power splitting erasure slots bank full or split energy by flag") {
  const Scenario sc = degenerate_scenario(1.0, 2.0, 1e7, 0.0, 1.0);
  const PolicyBundle b = hand_bundle(sc, ReceiverModel::PowerSplitting, 0.5, 1.0, 0.0);
  SimOptions opts;
  opts.horizon = 200;
  SimStats st = run_simulation(sc, b, opts);
  REQUIRE(st.erasure_fraction == 1.0);
  REQUIRE_THAT(st.delivered_rf, WithinRel(1.0, 1e-12));
  opts.ps_strict_fraction = true;
  st = run_simulation(sc, b, opts);
  REQUIRE_THAT(st.delivered_rf, WithinRel(0.5, 1e-12));
}

TEST_CASE("bernoulli rule erases at the design fraction") {
  const Scenario sc = build_scenario(load_config(config_path("small.cfg")));
  const double pi = 0.25;
  const PolicyBundle b = make_constant_bundle(sc, sc.harvest_mean, ReceiverModel::TimeSwitching, pi);
  SimOptions opts;
  opts.horizon = 200000;
  opts.seed = 3;
  opts.ts_rule = TsRule::Bernoulli;
  const SimStats st = run_simulation(sc, b, opts);
  const double se = std::sqrt(pi * (1.0 - pi) / double(opts.horizon));
  REQUIRE_THAT(st.erasure_fraction, WithinAbs(pi, 3.0 * se));
  REQUIRE(st.conservation_ok);
}

TEST_CASE("threshold rule settles at the stationary erasure fraction") {
  // Stationary receive battery: erased slots bank ambient + xi, decoded
  // slots drain rx_need - ambient, so the long-run erased fraction solves
  // f (ambient + xi) + (1 - f) (ambient - need) = 0.
  const Scenario sc = build_scenario(load_config(config_path("reference.cfg")));
  const PolicyBundle b =
      make_constant_bundle(sc, sc.harvest_mean, ReceiverModel::TimeSwitching, 0.0);
  double xi_bar = 0.0;
  for (std::size_t i = 0; i < sc.users(); ++i)
    xi_bar += sc.rx.eta * marginal_mean(sc.fading, i) * sc.harvest_mean[i];
  const double pred =
      (sc.rx.rx_consumption - sc.rx.rx_harvest) / (xi_bar + sc.rx.rx_consumption);

  SimOptions opts;
  opts.horizon = 400000;
  opts.seed = 17;
  const SimStats st = run_simulation(sc, b, opts);
  CAPTURE(pred, st.erasure_fraction);
  REQUIRE(st.rx_outage_fraction == 0.0);  // threshold never attempts unfunded decodes
  REQUIRE_THAT(st.erasure_fraction, WithinAbs(pred, 4e-3));
  // Transmit side: zero-drift battery, so the mean radiated power tracks the
  // harvest rate from below.
  for (std::size_t i = 0; i < sc.users(); ++i) {
    REQUIRE(st.mean_power[i] <= sc.harvest_mean[i]);
    REQUIRE(st.mean_power[i] >= 0.98 * sc.harvest_mean[i]);
  }
  REQUIRE(st.clip_fraction > 0.0);
}

TEST_CASE("policy bundles carry conditional decode rates") {
  const Scenario sc = build_scenario(load_config(config_path("small.cfg")));
  const BoundaryPoint bp = dual_solve(sc, ReceiverModel::TimeSwitching, {0.5, 0.5});
  REQUIRE(bp.pi_e > 0.0);

  const PolicyBundle ts = make_policy_bundle(sc, bp, ReceiverModel::TimeSwitching);
  REQUIRE(ts.pi_e == bp.pi_e);
  REQUIRE(ts.policy.powers == bp.policy.powers);
  for (std::size_t k = 0; k < bp.state_rates.size(); ++k)
    REQUIRE(ts.cond_rates[k] == bp.state_rates[k] / (1.0 - bp.pi_e));

  // Without slot erasures there is nothing to compensate.
  const PolicyBundle ideal = make_policy_bundle(sc, bp, ReceiverModel::Ideal);
  REQUIRE(ideal.cond_rates == bp.state_rates);

  const PolicyBundle flat = make_constant_bundle(sc, {1e-6, 2e-6}, ReceiverModel::Ideal, 0.0);
  REQUIRE(flat.policy.states == sc.fading.states);
  for (std::size_t s = 0; s < flat.policy.states; ++s) {
    REQUIRE(flat.policy.powers[s * 2] == 1e-6);
    REQUIRE(flat.policy.powers[s * 2 + 1] == 2e-6);
  }
  for (double r : flat.cond_rates) REQUIRE(r == 0.0);
}

TEST_CASE("simulation argument validation") {
  const Scenario sc = build_scenario(load_config(config_path("small.cfg")));
  PolicyBundle b = make_constant_bundle(sc, sc.harvest_mean, ReceiverModel::Ideal, 0.0);
  SimOptions opts;
  opts.horizon = 0;
  REQUIRE_THROWS_AS(run_simulation(sc, b, opts), invalid_parameter);
  opts.horizon = 10;
  b.pi_e = 1.0;
  REQUIRE_THROWS_AS(run_simulation(sc, b, opts), invalid_parameter);
  b.pi_e = 0.0;
  b.cond_rates.pop_back();
  REQUIRE_THROWS_AS(run_simulation(sc, b, opts), invalid_parameter);
  REQUIRE_THROWS_AS(make_constant_bundle(sc, {1e-6}, ReceiverModel::Ideal, 0.0),
                    invalid_parameter);
}
