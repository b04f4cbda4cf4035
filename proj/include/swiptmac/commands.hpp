#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "swiptmac/config.hpp"
#include "swiptmac/csv.hpp"
#include "swiptmac/optimizer.hpp"
#include "swiptmac/simulator.hpp"
#include "swiptmac/svg.hpp"
#include "swiptmac/validation.hpp"
#include "swiptmac/version.hpp"

namespace swiptmac {

/// Diagnostics go to stderr, gated by the SWIPTMAC_LOG environment variable
/// (0 = quiet, 1 = progress, 2 = detail). Data outputs never go to stderr.
inline int log_level() {
  static const int lvl = [] {
    const char* e = std::getenv("SWIPTMAC_LOG");
    return e ? std::atoi(e) : 0;
  }();
  return lvl;
}

inline void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[swiptmac] " << msg << "\n";
}

inline void log_debug(const std::string& msg) {
  if (log_level() >= 2) std::cerr << "[swiptmac] " << msg << "\n";
}

inline ReceiverModel parse_model(const std::string& name) {
  if (name == "ideal") return ReceiverModel::Ideal;
  if (name == "ts") return ReceiverModel::TimeSwitching;
  if (name == "ps") return ReceiverModel::PowerSplitting;
  throw invalid_parameter("unknown receiver model '" + name + "' (expected ideal|ts|ps)");
}

namespace detail {

inline std::string hash_hex(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[h & 0xf];
    h >>= 4;
  }
  return s;
}

// Run provenance without wall-clock state: reruns with the same inputs must
// produce byte-identical files.
inline void write_manifest(const std::filesystem::path& out_dir, const std::string& command,
                           const ScenarioConfig& cfg, const nlohmann::json& params) {
  nlohmann::json m;
  m["command"] = command;
  m["config_hash"] = hash_hex(config_hash(cfg));
  m["params"] = params;
  m["tool_version"] = kVersion;
  std::ofstream f(out_dir / "manifest.json", std::ios::binary);
  if (!f) throw invalid_parameter("cannot write manifest in '" + out_dir.string() + "'");
  f << m.dump(2) << "\n";
}

inline std::vector<std::string> boundary_header(std::size_t users) {
  std::vector<std::string> h{"theta"};
  for (std::size_t i = 1; i <= users; ++i) h.push_back("mu" + std::to_string(i));
  for (std::size_t i = 1; i <= users; ++i) h.push_back("R" + std::to_string(i));
  h.push_back("pi_e");
  for (std::size_t i = 1; i <= users; ++i) h.push_back("lambda" + std::to_string(i));
  h.push_back("lambda_r");
  return h;
}

}  // namespace detail

struct RegionArgs {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> models = {"ideal", "ts", "ps"};
  int mu_grid = 21;
  double epsilon = 0.0;
  SolverOptions solver;
};

/// Traces the weighted-rate boundary for each requested receiver model and
/// writes boundary_<model>.csv, the per-subset rate bounds of the
/// uniform-weight point to bounds_<model>.csv, a combined plot, and the run
/// manifest. Reward directions whose subproblem is infeasible keep their
/// theta/mu columns and leave the solution columns empty.
inline int cmd_region(const RegionArgs& args) {
  const ScenarioConfig cfg = load_config(args.config_path);
  Scenario sc = build_scenario(cfg);
  const std::size_t L = sc.users();
  std::filesystem::create_directories(args.out_dir);
  const std::filesystem::path out(args.out_dir);

  SolverOptions opts = args.solver;
  opts.epsilon_frac = args.epsilon;

  SvgPlot plot("rate boundary", "R1 (bits/use)", "R2 (bits/use)");
  for (const std::string& mname : args.models) {
    const ReceiverModel model = parse_model(mname);
    log_info("tracing boundary: model=" + mname);
    const std::vector<TracePoint> trace = trace_boundary(sc, model, args.mu_grid, opts);

    CsvTable table(detail::boundary_header(L));
    std::vector<double> xs, ys;
    for (const TracePoint& tp : trace) {
      std::vector<std::string> row;
      row.push_back(csv_number(tp.theta));
      for (std::size_t i = 0; i < L; ++i) row.push_back(csv_number(tp.mu[i]));
      if (tp.point) {
        const BoundaryPoint& bp = *tp.point;
        for (std::size_t i = 0; i < L; ++i) row.push_back(csv_number(bp.avg_rates[i]));
        row.push_back(csv_number(bp.pi_e));
        for (std::size_t i = 0; i < L; ++i)
          row.push_back(csv_number(bp.multipliers.lambda_s[i]));
        row.push_back(csv_number(bp.multipliers.lambda_r));
        if (L == 2) {
          xs.push_back(bp.avg_rates[0]);
          ys.push_back(bp.avg_rates[1]);
        }
      } else {
        log_debug("direction theta=" + csv_number(tp.theta) + " infeasible: " + tp.error);
        for (std::size_t i = 0; i < 2 * L + 2; ++i) row.emplace_back();
      }
      table.add_row(std::move(row));
    }
    table.write((out / ("boundary_" + mname + ".csv")).string());
    if (L == 2 && !xs.empty()) plot.add_series(mname, xs, ys);

    // per-subset ergodic bounds at the uniform-weight policy
    const std::vector<double> mu(L, 1.0 / static_cast<double>(L));
    CsvTable bounds_table({"subset_mask", "capacity_bound", "min_rate_sum"});
    try {
      const BoundaryPoint bp = dual_solve(sc, model, mu, opts);
      const std::vector<double> bounds =
          ergodic_bounds(sc.fading, bp.policy, sc.sigma2, model, bp.pi_e);
      for (std::uint32_t mask = 1; mask < (1u << L); ++mask) {
        double rsum = 0.0;
        for (std::size_t i = 0; i < L; ++i)
          if (mask & (1u << i)) rsum += sc.rho[i];
        bounds_table.add_row(
            {std::to_string(mask), csv_number(bounds[mask - 1]), csv_number(rsum)});
      }
    } catch (const std::runtime_error& e) {
      log_info("uniform-weight point unsolvable for " + mname + ": " + e.what());
    }
    bounds_table.write((out / ("bounds_" + mname + ".csv")).string());
  }
  if (L == 2) plot.write((out / "region.svg").string());

  nlohmann::json params;
  params["models"] = args.models;
  params["mu_grid"] = args.mu_grid;
  params["epsilon"] = args.epsilon;
  detail::write_manifest(out, "region", cfg, params);
  return 0;
}

struct SweepArgs {
  std::string config_path;
  std::string out_dir;
  std::string axis = "deficit_watts";  // deficit_watts | eta | rho_scale
  std::vector<double> values;
  double epsilon = 0.0;
  SolverOptions solver;
};

/// Sum-rate sweep over one scenario parameter for all three receiver models.
/// Values that make a model infeasible leave that cell empty.
inline int cmd_sweep(const SweepArgs& args) {
  const ScenarioConfig base = load_config(args.config_path);
  if (args.values.empty()) throw invalid_parameter("sweep: need at least one value");
  std::filesystem::create_directories(args.out_dir);
  const std::filesystem::path out(args.out_dir);

  SolverOptions opts = args.solver;
  opts.epsilon_frac = args.epsilon;

  CsvTable table({"param", "sum_rate_ideal", "sum_rate_ps", "sum_rate_ts"});
  std::vector<double> xs;
  std::vector<std::vector<double>> series(3);
  const ReceiverModel order[3] = {ReceiverModel::Ideal, ReceiverModel::PowerSplitting,
                                  ReceiverModel::TimeSwitching};
  for (const double v : args.values) {
    ScenarioConfig cfg = base;
    if (args.axis == "deficit_watts") {
      cfg.rx_consumption_watts = cfg.rx_harvest_watts + v;
    } else if (args.axis == "eta") {
      cfg.eta = v;
    } else if (args.axis == "rho_scale") {
      for (double& r : cfg.rho) r *= v;
    } else {
      throw invalid_parameter("sweep: unknown axis '" + args.axis +
                              "' (expected deficit_watts|eta|rho_scale)");
    }
    const Scenario sc = build_scenario(cfg);
    std::vector<std::string> row{csv_number(v)};
    xs.push_back(v);
    for (int k = 0; k < 3; ++k) {
      log_info("sweep " + args.axis + "=" + csv_number(v) + " model=" + model_name(order[k]));
      try {
        const double s = sum_rate(sc, order[k], opts);
        row.push_back(csv_number(s));
        series[k].push_back(s);
      } catch (const std::runtime_error& e) {
        log_debug(std::string("infeasible: ") + e.what());
        row.emplace_back();
        series[k].push_back(std::numeric_limits<double>::quiet_NaN());
      }
    }
    table.add_row(std::move(row));
  }
  table.write((out / "sweep.csv").string());

  SvgPlot plot("sum rate vs " + args.axis, args.axis, "sum rate (bits/use)");
  plot.add_series("ideal", xs, series[0]);
  plot.add_series("ps", xs, series[1]);
  plot.add_series("ts", xs, series[2]);
  plot.write((out / "sweep.svg").string());

  nlohmann::json params;
  params["axis"] = args.axis;
  params["values"] = args.values;
  params["epsilon"] = args.epsilon;
  detail::write_manifest(out, "sweep", base, params);
  return 0;
}

struct SimulateArgs {
  std::string config_path;
  std::string out_dir;
  std::string model = "ts";
  double theta = 0.5;
  std::uint64_t seed = 1;
  std::uint64_t horizon = 100000;
  std::string rule = "threshold";     // threshold | bernoulli
  std::string xi = "expectation";     // expectation | sampled
  double epsilon = 1e-3;              // transmit budget backoff for the policy
  bool ps_strict = false;
  bool constant_policy = false;       // skip the solver, spend E[Y](1-eps) flat
};

/// Solves one operating point (or builds a flat-power policy), rolls it out
/// slot by slot, and writes simulation.csv plus a design-versus-simulation
/// comparison table.
inline int cmd_simulate(const SimulateArgs& args) {
  const ScenarioConfig cfg = load_config(args.config_path);
  const Scenario sc = build_scenario(cfg);
  const std::size_t L = sc.users();
  const ReceiverModel model = parse_model(args.model);
  std::filesystem::create_directories(args.out_dir);
  const std::filesystem::path out(args.out_dir);

  SimOptions sopts;
  sopts.horizon = args.horizon;
  sopts.seed = args.seed;
  sopts.ps_strict_fraction = args.ps_strict;
  if (args.xi == "expectation")
    sopts.xi_mode = XiMode::Expectation;
  else if (args.xi == "sampled")
    sopts.xi_mode = XiMode::Sampled;
  else
    throw invalid_parameter("simulate: xi must be expectation|sampled");
  if (args.rule == "threshold")
    sopts.ts_rule = TsRule::Threshold;
  else if (args.rule == "bernoulli")
    sopts.ts_rule = TsRule::Bernoulli;
  else
    throw invalid_parameter("simulate: rule must be threshold|bernoulli");

  PolicyBundle bundle;
  std::vector<double> design_rates(L, 0.0);
  std::vector<double> design_power(L, 0.0);
  double design_pi = 0.0;
  if (args.constant_policy) {
    std::vector<double> t(L);
    for (std::size_t i = 0; i < L; ++i) {
      t[i] = sc.harvest_mean[i] * (1.0 - args.epsilon);
      design_power[i] = t[i];
    }
    double draw = 0.0;
    for (std::size_t i = 0; i < L; ++i) draw += marginal_mean(sc.fading, i) * t[i];
    design_pi = model == ReceiverModel::Ideal
                    ? 0.0
                    : erasure_fraction(sc.energy_deficit(), sc.rx.eta * draw);
    bundle = make_constant_bundle(sc, t, model, design_pi);
  } else {
    SolverOptions opts;
    opts.epsilon_frac = args.epsilon;
    const std::vector<double> mu =
        L == 2 ? std::vector<double>{args.theta, 1.0 - args.theta}
               : std::vector<double>(L, 1.0 / static_cast<double>(L));
    log_info("solving operating point for simulation");
    const BoundaryPoint bp = dual_solve(sc, model, mu, opts);
    design_rates = bp.avg_rates;
    design_power = bp.avg_power;
    design_pi = bp.pi_e;
    bundle = make_policy_bundle(sc, bp, model);
  }

  log_info("simulating " + std::to_string(args.horizon) + " slots");
  const SimStats st = run_simulation(sc, bundle, sopts);

  CsvTable sim({"metric", "value"});
  sim.add_row({"model", args.model});
  sim.add_row({"rule", args.rule});
  sim.add_row({"xi_mode", args.xi});
  sim.add_row({"horizon", std::to_string(st.horizon)});
  sim.add_row({"seed", std::to_string(args.seed)});
  sim.add_row({"epsilon", csv_number(args.epsilon)});
  sim.add_row({"pi_design", csv_number(design_pi)});
  sim.add_row({"erasure_fraction", csv_number(st.erasure_fraction)});
  sim.add_row({"rx_outage_fraction", csv_number(st.rx_outage_fraction)});
  sim.add_row({"clip_fraction", csv_number(st.clip_fraction)});
  sim.add_row({"delivered_rf", csv_number(st.delivered_rf)});
  sim.add_row({"deficit", csv_number(sc.energy_deficit())});
  sim.add_row({"mean_xi", csv_number(st.mean_xi)});
  sim.add_row({"final_rx_buffer", csv_number(st.final_rx_buffer)});
  sim.add_row({"conservation_ok", st.conservation_ok ? "1" : "0"});
  for (std::size_t i = 0; i < L; ++i) {
    const std::string n = std::to_string(i + 1);
    sim.add_row({"mean_power_" + n, csv_number(st.mean_power[i])});
    sim.add_row({"mean_rate_" + n, csv_number(st.mean_rate[i])});
    sim.add_row({"final_tx_buffer_" + n, csv_number(st.final_tx_buffer[i])});
  }
  sim.write((out / "simulation.csv").string());

  CsvTable cmp({"metric", "design", "simulated"});
  for (std::size_t i = 0; i < L; ++i) {
    const std::string n = std::to_string(i + 1);
    cmp.add_row({"power_" + n, csv_number(design_power[i]), csv_number(st.mean_power[i])});
    cmp.add_row({"rate_" + n, csv_number(design_rates[i]), csv_number(st.mean_rate[i])});
  }
  cmp.add_row({"erasure_fraction", csv_number(design_pi), csv_number(st.erasure_fraction)});
  cmp.add_row(
      {"delivered_rf", csv_number(sc.energy_deficit()), csv_number(st.delivered_rf)});
  cmp.write((out / "comparison.csv").string());

  nlohmann::json params;
  params["model"] = args.model;
  params["theta"] = args.theta;
  params["seed"] = args.seed;
  params["horizon"] = args.horizon;
  params["rule"] = args.rule;
  params["xi"] = args.xi;
  params["epsilon"] = args.epsilon;
  params["constant_policy"] = args.constant_policy;
  detail::write_manifest(out, "simulate", cfg, params);
  return 0;
}

struct ValidateArgs {
  int instances = 1000;
  std::uint64_t seed = 7;
  double tol = 1e-3;
};

/// Randomized solver cross-checks; prints one summary line per check family
/// and fails (nonzero) when any instance violates its tolerance.
inline int cmd_validate(const ValidateArgs& args) {
  const ValidationOutcome v = validate_solver(args.instances, args.seed, args.tol);
  std::cout << "instances=" << v.instances << " infeasible=" << v.infeasible_instances << "\n";
  std::cout << "equal_grid_mismatches=" << v.equal_grid_mismatches << "\n";
  std::cout << "max_gap_below_bits=" << csv_number(v.max_gap_below) << "\n";
  std::cout << "max_gap_above_bits=" << csv_number(v.max_gap_above) << "\n";
  std::cout << "max_water_fill_gap_steps=" << csv_number(v.max_wf_gap) << "\n";
  std::cout << "failures=" << v.failures << "\n";
  return v.failures == 0 && v.equal_grid_mismatches == 0 ? 0 : 1;
}

}  // namespace swiptmac
