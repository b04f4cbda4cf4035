// Command-line front end: traces rate regions, sweeps scenario parameters,
// rolls out policies slot by slot, and cross-checks the solver. All file
// outputs are deterministic; diagnostics go to stderr via SWIPTMAC_LOG.

#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "swiptmac/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"minimum-rate capacity regions for energy-harvesting MAC with wireless power"};
  app.require_subcommand(1);

  swiptmac::RegionArgs region;
  CLI::App* reg = app.add_subcommand("region", "trace the rate-region boundary");
  reg->add_option("--config", region.config_path, "scenario config file")->required();
  reg->add_option("--out", region.out_dir, "output directory")->required();
  reg->add_option("--model", region.models, "receiver models (ideal|ts|ps)");
  reg->add_option("--mu-grid", region.mu_grid, "number of reward directions");
  reg->add_option("--epsilon", region.epsilon, "transmit budget backoff fraction");

  swiptmac::SweepArgs sweep;
  CLI::App* swp = app.add_subcommand("sweep", "sum-rate sweep over a scenario parameter");
  swp->add_option("--config", sweep.config_path, "scenario config file")->required();
  swp->add_option("--out", sweep.out_dir, "output directory")->required();
  swp->add_option("--axis", sweep.axis, "deficit_watts|eta|rho_scale");
  swp->add_option("--values", sweep.values, "axis values")->required()->delimiter(',');
  swp->add_option("--epsilon", sweep.epsilon, "transmit budget backoff fraction");

  swiptmac::SimulateArgs sim;
  CLI::App* s = app.add_subcommand("simulate", "slot-by-slot policy rollout");
  s->add_option("--config", sim.config_path, "scenario config file")->required();
  s->add_option("--out", sim.out_dir, "output directory")->required();
  s->add_option("--model", sim.model, "receiver model (ideal|ts|ps)");
  s->add_option("--theta", sim.theta, "reward direction, two users: mu = (theta, 1-theta)");
  s->add_option("--seed", sim.seed, "random seed");
  s->add_option("--horizon", sim.horizon, "number of slots");
  s->add_option("--rule", sim.rule, "time-switching rule (threshold|bernoulli)");
  s->add_option("--xi", sim.xi, "receiver RF energy model (expectation|sampled)");
  s->add_option("--epsilon", sim.epsilon, "transmit budget backoff fraction");
  s->add_flag("--ps-strict", sim.ps_strict, "erasure slots bank only the split fraction");
  s->add_flag("--constant-policy", sim.constant_policy,
              "spend E[Y](1-epsilon) flat instead of solving");

  swiptmac::ValidateArgs val;
  CLI::App* v = app.add_subcommand("validate", "randomized solver cross-checks");
  v->add_option("--instances", val.instances, "number of random instances");
  v->add_option("--seed", val.seed, "random seed");
  v->add_option("--tol", val.tol, "objective tolerance in bits");

  CLI11_PARSE(app, argc, argv);

  try {
    if (reg->parsed()) return swiptmac::cmd_region(region);
    if (swp->parsed()) return swiptmac::cmd_sweep(sweep);
    if (s->parsed()) return swiptmac::cmd_simulate(sim);
    if (v->parsed()) return swiptmac::cmd_validate(val);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
