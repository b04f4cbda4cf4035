#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "swiptmac/errors.hpp"
#include "swiptmac/fading.hpp"
#include "swiptmac/scenario.hpp"

namespace swiptmac {

/// Scenario description as read from disk. Powers are kept in watts here and
/// scaled to joules per slot when the Scenario is built, so configs stay in
/// datasheet units while the solver works in per-slot energies.
struct ScenarioConfig {
  std::size_t users = 0;
  std::string fading = "rayleigh";  // "rayleigh" | "constant"
  std::vector<double> rayleigh_scale;
  double rayleigh_step = 0.1;
  double rayleigh_max = 5.0;
  std::vector<double> constant_gain;
  std::string harvest = "exponential";  // constant | exponential | uniform | two_point
  std::vector<double> harvest_mean_watts;
  std::vector<double> rho;  // bits per channel use
  double noise_watts = 1.0;
  double rx_consumption_watts = 0.0;
  double rx_harvest_watts = 0.0;
  double eta = 1.0;
  double slot_seconds = 1e-6;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline double parse_number(std::string_view v, int line) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw config_error("line " + std::to_string(line) + ": bad number '" + std::string(v) + "'");
  return out;
}

inline std::vector<double> parse_array(std::string_view v, int line) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    std::size_t comma = v.find(',', start);
    if (comma == std::string_view::npos) comma = v.size();
    const std::string_view item = trim(v.substr(start, comma - start));
    if (item.empty())
      throw config_error("line " + std::to_string(line) + ": empty array element");
    out.push_back(parse_number(item, line));
    start = comma + 1;
  }
  return out;
}

inline double dbm_to_watts(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }

inline std::vector<double> dbm_to_watts(const std::vector<double>& dbm) {
  std::vector<double> w(dbm.size());
  for (std::size_t i = 0; i < dbm.size(); ++i) w[i] = dbm_to_watts(dbm[i]);
  return w;
}

// Shortest representation that parses back to the same double; keeps the
// canonical serialization (and therefore the config hash) exact.
inline std::string shortest(double v) {
  char buf[40];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

inline std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += shortest(v[i]);
  }
  return out;
}

}  // namespace detail

inline ScenarioConfig parse_config(const std::string& text) {
  ScenarioConfig cfg;
  bool saw_users = false, saw_harvest_mean = false, saw_rho = false;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view s(raw);
    if (const std::size_t hash = s.find('#'); hash != std::string_view::npos)
      s = s.substr(0, hash);
    s = detail::trim(s);
    if (s.empty()) continue;
    const std::size_t eq = s.find('=');
    if (eq == std::string_view::npos)
      throw config_error("line " + std::to_string(line) + ": expected key = value");
    const std::string key(detail::trim(s.substr(0, eq)));
    const std::string_view val = detail::trim(s.substr(eq + 1));
    if (val.empty()) throw config_error("line " + std::to_string(line) + ": empty value");

    if (key == "users") {
      const double u = detail::parse_number(val, line);
      if (u < 1 || u != std::floor(u))
        throw config_error("line " + std::to_string(line) + ": users must be a positive integer");
      cfg.users = static_cast<std::size_t>(u);
      saw_users = true;
    } else if (key == "fading") {
      cfg.fading = std::string(val);
      if (cfg.fading != "rayleigh" && cfg.fading != "constant")
        throw config_error("line " + std::to_string(line) + ": fading must be rayleigh|constant");
    } else if (key == "rayleigh_scale") {
      cfg.rayleigh_scale = detail::parse_array(val, line);
    } else if (key == "rayleigh_step") {
      cfg.rayleigh_step = detail::parse_number(val, line);
    } else if (key == "rayleigh_max") {
      cfg.rayleigh_max = detail::parse_number(val, line);
    } else if (key == "constant_gain") {
      cfg.constant_gain = detail::parse_array(val, line);
    } else if (key == "harvest") {
      cfg.harvest = std::string(val);
      if (cfg.harvest != "constant" && cfg.harvest != "exponential" &&
          cfg.harvest != "uniform" && cfg.harvest != "two_point")
        throw config_error("line " + std::to_string(line) +
                           ": harvest must be constant|exponential|uniform|two_point");
    } else if (key == "harvest_mean_watts") {
      cfg.harvest_mean_watts = detail::parse_array(val, line);
      saw_harvest_mean = true;
    } else if (key == "harvest_mean_dbm") {
      cfg.harvest_mean_watts = detail::dbm_to_watts(detail::parse_array(val, line));
      saw_harvest_mean = true;
    } else if (key == "rho") {
      cfg.rho = detail::parse_array(val, line);
      saw_rho = true;
    } else if (key == "noise_watts") {
      cfg.noise_watts = detail::parse_number(val, line);
    } else if (key == "noise_dbm") {
      cfg.noise_watts = detail::dbm_to_watts(detail::parse_number(val, line));
    } else if (key == "rx_consumption_watts") {
      cfg.rx_consumption_watts = detail::parse_number(val, line);
    } else if (key == "rx_consumption_dbm") {
      cfg.rx_consumption_watts = detail::dbm_to_watts(detail::parse_number(val, line));
    } else if (key == "rx_harvest_watts") {
      cfg.rx_harvest_watts = detail::parse_number(val, line);
    } else if (key == "rx_harvest_dbm") {
      cfg.rx_harvest_watts = detail::dbm_to_watts(detail::parse_number(val, line));
    } else if (key == "eta") {
      cfg.eta = detail::parse_number(val, line);
    } else if (key == "slot_seconds") {
      cfg.slot_seconds = detail::parse_number(val, line);
    } else {
      throw config_error("line " + std::to_string(line) + ": unknown key '" + key + "'");
    }
  }
  if (!saw_users) throw config_error("missing required key 'users'");
  if (!saw_harvest_mean) throw config_error("missing required key 'harvest_mean_watts'");
  if (!saw_rho) throw config_error("missing required key 'rho'");
  return cfg;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

/// Canonical text form: fixed key order, powers in watts, shortest
/// round-trip numbers. parse_config(serialize_config(c)) reproduces every
/// field bit for bit, and the config hash is taken over this string.
inline std::string serialize_config(const ScenarioConfig& cfg) {
  std::string out;
  out += "users = " + std::to_string(cfg.users) + "\n";
  out += "fading = " + cfg.fading + "\n";
  if (cfg.fading == "rayleigh") {
    out += "rayleigh_scale = " + detail::join(cfg.rayleigh_scale) + "\n";
    out += "rayleigh_step = " + detail::shortest(cfg.rayleigh_step) + "\n";
    out += "rayleigh_max = " + detail::shortest(cfg.rayleigh_max) + "\n";
  } else {
    out += "constant_gain = " + detail::join(cfg.constant_gain) + "\n";
  }
  out += "harvest = " + cfg.harvest + "\n";
  out += "harvest_mean_watts = " + detail::join(cfg.harvest_mean_watts) + "\n";
  out += "rho = " + detail::join(cfg.rho) + "\n";
  out += "noise_watts = " + detail::shortest(cfg.noise_watts) + "\n";
  out += "rx_consumption_watts = " + detail::shortest(cfg.rx_consumption_watts) + "\n";
  out += "rx_harvest_watts = " + detail::shortest(cfg.rx_harvest_watts) + "\n";
  out += "eta = " + detail::shortest(cfg.eta) + "\n";
  out += "slot_seconds = " + detail::shortest(cfg.slot_seconds) + "\n";
  return out;
}

/// FNV-1a over the canonical serialization.
inline std::uint64_t config_hash(const ScenarioConfig& cfg) {
  const std::string s = serialize_config(cfg);
  std::uint64_t h = 14695981039346656037ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace detail {

inline std::vector<double> broadcast(std::vector<double> v, std::size_t users,
                                     const char* what) {
  if (v.size() == 1 && users > 1) v.assign(users, v[0]);
  if (v.size() != users)
    throw config_error(std::string(what) + ": expected 1 or " + std::to_string(users) +
                       " values, got " + std::to_string(v.size()));
  return v;
}

}  // namespace detail

inline Scenario build_scenario(const ScenarioConfig& cfg) {
  if (cfg.users == 0) throw config_error("users must be positive");
  if (!(cfg.slot_seconds > 0.0)) throw config_error("slot_seconds must be positive");
  Scenario sc;
  std::vector<MarginalFading> marginals;
  if (cfg.fading == "rayleigh") {
    const std::vector<double> scale =
        detail::broadcast(cfg.rayleigh_scale.empty() ? std::vector<double>{1.0}
                                                     : cfg.rayleigh_scale,
                          cfg.users, "rayleigh_scale");
    for (std::size_t i = 0; i < cfg.users; ++i)
      marginals.push_back(quantize_rayleigh(scale[i], cfg.rayleigh_step, cfg.rayleigh_max));
  } else if (cfg.fading == "constant") {
    const std::vector<double> g = detail::broadcast(cfg.constant_gain, cfg.users, "constant_gain");
    for (std::size_t i = 0; i < cfg.users; ++i) marginals.push_back(constant_gain(g[i]));
  } else {
    throw config_error("fading must be rayleigh|constant");
  }
  sc.fading = joint_states(marginals);

  if (cfg.harvest == "constant")
    sc.harvest_kind = HarvestKind::Constant;
  else if (cfg.harvest == "exponential")
    sc.harvest_kind = HarvestKind::Exponential;
  else if (cfg.harvest == "uniform")
    sc.harvest_kind = HarvestKind::Uniform;
  else if (cfg.harvest == "two_point")
    sc.harvest_kind = HarvestKind::TwoPoint;
  else
    throw config_error("harvest must be constant|exponential|uniform|two_point");

  const double j = cfg.slot_seconds;  // watts -> joules per slot
  sc.harvest_mean = detail::broadcast(cfg.harvest_mean_watts, cfg.users, "harvest_mean_watts");
  for (double& v : sc.harvest_mean) v *= j;
  sc.rho = detail::broadcast(cfg.rho, cfg.users, "rho");
  sc.sigma2 = cfg.noise_watts * j;
  sc.rx.rx_consumption = cfg.rx_consumption_watts * j;
  sc.rx.rx_harvest = cfg.rx_harvest_watts * j;
  sc.rx.eta = cfg.eta;
  sc.slot_seconds = cfg.slot_seconds;
  sc.validate();
  return sc;
}

}  // namespace swiptmac
