#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "swiptmac/region.hpp"
#include "swiptmac/simulator.hpp"

using namespace swiptmac;

TEST_CASE("state capacity matches hand-computed logs") {
  const double h[] = {3.0, 1.25};
  const double t[] = {1.0, 2.0};

  // S = 3, sigma2 = 1: 0.5 log2(4) = 1 exactly
  CHECK(state_capacity(0b01, h, t, 2, 1.0, ReceiverModel::Ideal) == 1.0);
  // S = 2.5: 0.5 log2(3.5)
  CHECK_THAT(state_capacity(0b10, h, t, 2, 1.0, ReceiverModel::Ideal),
             Catch::Matchers::WithinRel(0.5 * std::log2(3.5), 1e-15));
  // joint subset adds the received energies before the log
  CHECK_THAT(state_capacity(0b11, h, t, 2, 1.0, ReceiverModel::Ideal),
             Catch::Matchers::WithinRel(0.5 * std::log2(6.5), 1e-15));

  // time switching scales the prelog, power splitting scales the SNR
  CHECK(state_capacity(0b01, h, t, 2, 1.0, ReceiverModel::TimeSwitching, 0.5) == 0.5);
  CHECK_THAT(state_capacity(0b10, h, t, 2, 1.0, ReceiverModel::PowerSplitting, 0.5),
             Catch::Matchers::WithinRel(0.5849625007211562, 1e-14));  // 0.5 log2(2.25)
}

TEST_CASE("receiver models coincide bitwise when nothing is diverted") {
  const double h[] = {1.7, 0.4};
  const double t[] = {0.9, 2.3};
  for (std::uint32_t m = 1; m <= 3; ++m) {
    const double ideal = state_capacity(m, h, t, 2, 0.37, ReceiverModel::Ideal);
    CHECK(state_capacity(m, h, t, 2, 0.37, ReceiverModel::TimeSwitching, 0.0) == ideal);
    CHECK(state_capacity(m, h, t, 2, 0.37, ReceiverModel::PowerSplitting, 0.0) == ideal);
  }
}

TEST_CASE("capacity is invariant under power-of-two energy rescaling") {
  // S/sigma2 is a single division, so scaling both by 2^k is exact
  const double h[] = {1.3};
  for (double k : {0.25, 1.0, 4.0, 1024.0}) {
    const double t1[] = {0.7};
    const double tk[] = {0.7 * k};
    CHECK(state_capacity(1, h, t1, 1, 0.2, ReceiverModel::Ideal) ==
          state_capacity(1, h, tk, 1, 0.2 * k, ReceiverModel::Ideal));
  }
}

TEST_CASE("state capacity validates its arguments") {
  const double h[] = {1.0};
  const double t[] = {1.0};
  CHECK_THROWS_AS(state_capacity(0, h, t, 1, 1.0, ReceiverModel::Ideal), invalid_parameter);
  CHECK_THROWS_AS(state_capacity(2, h, t, 1, 1.0, ReceiverModel::Ideal), invalid_parameter);
  CHECK_THROWS_AS(state_capacity(1, h, t, 1, 0.0, ReceiverModel::Ideal), invalid_parameter);
  CHECK_THROWS_AS(state_capacity(1, h, t, 1, 1.0, ReceiverModel::Ideal, 1.5), invalid_parameter);
}

TEST_CASE("deficit and erasure fraction edge cases") {
  CHECK(deficit({1e-5, 2e-5, 1.0}) == 0.0);         // harvest covers consumption
  CHECK(deficit({3e-5, 1e-5, 1.0}) == 3e-5 - 1e-5);

  CHECK(erasure_fraction(0.0, 1.0) == 0.0);
  CHECK(erasure_fraction(-1.0, 1.0) == 0.0);
  CHECK(erasure_fraction(1.0, 4.0) == 0.25);
  CHECK(erasure_fraction(5.0, 4.0) == 1.0);          // clamps: cannot divert more than all
  CHECK_THROWS_AS(erasure_fraction(1.0, 0.0), infeasible_energy);
}

namespace {

JointFadeTable two_by_two_table() {
  const MarginalFading a{{1.0, 2.0}, {0.5, 0.5}};
  const MarginalFading b{{0.5, 1.5}, {0.25, 0.75}};
  return joint_states({a, b});
}

PolicyTable uniform_policy(const JointFadeTable& t, double w0, double w1) {
  PolicyTable p;
  p.users = t.users;
  p.states = t.states;
  p.powers.resize(t.states * t.users);
  for (std::size_t s = 0; s < t.states; ++s) {
    p.powers[s * 2 + 0] = w0;
    p.powers[s * 2 + 1] = w1;
  }
  return p;
}

}  // namespace

TEST_CASE("delivered RF power is the gain-weighted policy mean times eta") {
  const JointFadeTable t = two_by_two_table();
  const PolicyTable p = uniform_policy(t, 2.0, 4.0);
  // E[H0] = 1.5, E[H1] = 1.25
  CHECK_THAT(delivered_rf_power(t, p, 0.5), Catch::Matchers::WithinRel(0.5 * (1.5 * 2.0 + 1.25 * 4.0), 1e-15));
  CHECK_THROWS_AS(delivered_rf_power(t, p, 0.0), invalid_parameter);
  CHECK_THROWS_AS(delivered_rf_power(t, p, 1.5), invalid_parameter);
}

TEST_CASE("ergodic bounds are monotone and subadditive over subsets") {
  const JointFadeTable t = two_by_two_table();
  const PolicyTable p = uniform_policy(t, 1.7, 0.6);
  for (ReceiverModel m :
       {ReceiverModel::Ideal, ReceiverModel::TimeSwitching, ReceiverModel::PowerSplitting}) {
    const std::vector<double> b = ergodic_bounds(t, p, 0.8, m, 0.3);
    REQUIRE(b.size() == 3);
    CHECK(b[0] > 0.0);
    CHECK(b[1] > 0.0);
    CHECK(b[2] >= b[0]);            // adding a user cannot shrink the bound
    CHECK(b[2] >= b[1]);
    CHECK(b[2] <= b[0] + b[1]);     // log(1 + a + b) <= log(1+a) + log(1+b)
  }
}

TEST_CASE("region membership checks every subset inequality") {
  const std::vector<double> bounds = {1.0, 0.8, 1.5};
  const std::vector<double> rho = {0.1, 0.2};

  CHECK(region_contains({0.9, 0.55}, bounds, rho));
  CHECK_FALSE(region_contains({1.05, 0.2}, bounds, rho));     // single-user bound
  CHECK_FALSE(region_contains({0.9, 0.7}, bounds, rho));      // sum bound
  CHECK_FALSE(region_contains({0.05, 0.5}, bounds, rho));     // below minimum rate
  CHECK(region_contains({1.0005, 0.2}, bounds, rho, 1e-3));   // tolerance on either side
  CHECK(region_contains({0.0995, 0.5}, bounds, rho, 1e-3));

  CHECK_THROWS_AS(region_contains({1.0}, bounds, rho), invalid_parameter);
  CHECK_THROWS_AS(region_contains({0.5, 0.5}, {1.0}, rho), invalid_parameter);
}

TEST_CASE("per-state minimum-rate feasibility binds on the sum constraint") {
  const double h[] = {2.0, 2.0};
  const double t[] = {1.0, 1.0};
  const double c1 = state_capacity(0b01, h, t, 2, 1.0, ReceiverModel::Ideal);
  const double c12 = state_capacity(0b11, h, t, 2, 1.0, ReceiverModel::Ideal);

  CHECK(feasible_min_rates(h, t, {0.0, 0.0}, 1.0, ReceiverModel::Ideal));
  CHECK(feasible_min_rates(h, t, {0.45 * c12, 0.45 * c12}, 1.0, ReceiverModel::Ideal));
  // each rate fits alone but the pair exceeds the sum capacity
  CHECK(2 * 0.9 * c1 > c12);
  CHECK_FALSE(feasible_min_rates(h, t, {0.9 * c1, 0.9 * c1}, 1.0, ReceiverModel::Ideal));
  CHECK_FALSE(feasible_min_rates(h, t, {1.1 * c1, 0.0}, 1.0, ReceiverModel::Ideal));
}
