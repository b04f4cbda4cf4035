#pragma once

#include <stdexcept>
#include <string>

namespace swiptmac {

// Bad argument values, malformed tables, out-of-range sizes.
class invalid_parameter : public std::invalid_argument {
 public:
  explicit invalid_parameter(const std::string& what) : std::invalid_argument(what) {}
};

// Malformed or contradictory configuration input.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// The energy deficit cannot be covered by any admissible policy.
class infeasible_energy : public std::runtime_error {
 public:
  explicit infeasible_energy(const std::string& what) : std::runtime_error(what) {}
};

// Per-state minimum rates are unreachable within the power caps.
class infeasible_min_rate : public std::runtime_error {
 public:
  explicit infeasible_min_rate(const std::string& what) : std::runtime_error(what) {}
};

// Average-power budgets cannot support the minimum rates.
class infeasible_scenario : public std::runtime_error {
 public:
  explicit infeasible_scenario(const std::string& what) : std::runtime_error(what) {}
};

// Per-state Lagrangian has no finite maximizer (power reward exceeds its price).
class unbounded_objective : public std::runtime_error {
 public:
  explicit unbounded_objective(const std::string& what) : std::runtime_error(what) {}
};

// Damped erasure-fraction iteration did not converge.
class no_fixed_point : public std::runtime_error {
 public:
  explicit no_fixed_point(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace swiptmac
