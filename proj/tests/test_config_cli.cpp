#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "swiptmac/commands.hpp"
#include "swiptmac/config.hpp"
#include "swiptmac/errors.hpp"

using namespace swiptmac;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinRel;

namespace {

std::string config_path(const char* name) {
  return std::string(SWIPTMAC_CONFIG_DIR) + "/" + name;
}

const char* kMinimal =
    "users = 2\n"
    "harvest_mean_watts = 5.0, 3.0\n"
    "rho = 0.3, 0.2\n";

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SWIPTMAC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  return std::system(cmd.c_str());
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("minimal config picks up documented defaults") {
  const ScenarioConfig cfg = parse_config(kMinimal);
  REQUIRE(cfg.users == 2);
  REQUIRE(cfg.fading == "rayleigh");
  REQUIRE(cfg.rayleigh_step == 0.1);
  REQUIRE(cfg.rayleigh_max == 5.0);
  REQUIRE(cfg.harvest == "exponential");
  REQUIRE(cfg.harvest_mean_watts == std::vector<double>{5.0, 3.0});
  REQUIRE(cfg.rho == std::vector<double>{0.3, 0.2});
  REQUIRE(cfg.noise_watts == 1.0);
  REQUIRE(cfg.rx_consumption_watts == 0.0);
  REQUIRE(cfg.rx_harvest_watts == 0.0);
  REQUIRE(cfg.eta == 1.0);
  REQUIRE(cfg.slot_seconds == 1e-6);
}

TEST_CASE("comments, blank lines and whitespace are ignored") {
  const ScenarioConfig cfg = parse_config(
      "# leading comment\n"
      "\n"
      "  users   =  2   # trailing comment\n"
      "harvest_mean_watts = 1.0\n"
      "rho = 0.1\n");
  REQUIRE(cfg.users == 2);
  REQUIRE(cfg.harvest_mean_watts == std::vector<double>{1.0});
}

TEST_CASE("dbm keys convert to watts") {
  REQUIRE_THAT(detail::dbm_to_watts(10.0), WithinRel(0.01, 1e-12));
  REQUIRE_THAT(detail::dbm_to_watts(0.0), WithinRel(1e-3, 1e-12));
  const ScenarioConfig cfg = parse_config(
      "users = 1\n"
      "harvest_mean_dbm = 30\n"
      "rho = 0.1\n"
      "noise_dbm = 0\n");
  REQUIRE_THAT(cfg.harvest_mean_watts[0], WithinRel(1.0, 1e-12));
  REQUIRE_THAT(cfg.noise_watts, WithinRel(1e-3, 1e-12));
}

TEST_CASE("config parse errors carry the offending line") {
  REQUIRE_THROWS_WITH(parse_config("users = 2\nrho = abc\nharvest_mean_watts = 1\n"),
                      ContainsSubstring("line 2") && ContainsSubstring("bad number"));
  REQUIRE_THROWS_WITH(parse_config("users = 2\nwhatever = 1\n"),
                      ContainsSubstring("unknown key 'whatever'"));
  REQUIRE_THROWS_WITH(parse_config("users =\n"), ContainsSubstring("empty value"));
  REQUIRE_THROWS_WITH(parse_config("users 2\n"), ContainsSubstring("expected key = value"));
  REQUIRE_THROWS_WITH(parse_config("users = 2.5\n"),
                      ContainsSubstring("positive integer"));
  REQUIRE_THROWS_WITH(parse_config("harvest_mean_watts = 1\nrho = 0.1\n"),
                      ContainsSubstring("users"));
  REQUIRE_THROWS_WITH(parse_config("users = 1\nrho = 0.1\n"),
                      ContainsSubstring("harvest_mean_watts"));
  REQUIRE_THROWS_WITH(parse_config("users = 1\nharvest_mean_watts = 1\n"),
                      ContainsSubstring("rho"));
  REQUIRE_THROWS_WITH(parse_config("users = 1\nfading = rice\n"),
                      ContainsSubstring("rayleigh|constant"));
  REQUIRE_THROWS_WITH(parse_config("users = 1\nharvest = pareto\n"),
                      ContainsSubstring("constant|exponential|uniform|two_point"));
  REQUIRE_THROWS_AS(load_config("/nonexistent/path.cfg"), config_error);
}

TEST_CASE("scenario build converts watts to joules per slot") {
  const ScenarioConfig cfg = load_config(config_path("reference.cfg"));
  const Scenario sc = build_scenario(cfg);
  REQUIRE(sc.users() == 2);
  REQUIRE(sc.fading.states == 50 * 50);
  REQUIRE(sc.harvest_kind == HarvestKind::Exponential);
  REQUIRE(sc.harvest_mean[0] == 5.0 * 1e-6);
  REQUIRE(sc.harvest_mean[1] == 3.0 * 1e-6);
  REQUIRE(sc.sigma2 == 1.0 * 1e-6);
  REQUIRE(sc.rx.rx_consumption == 2e-5 * 1e-6);
  REQUIRE(sc.rx.rx_harvest == 1e-5 * 1e-6);
  REQUIRE(sc.rx.eta == 1e-5);
  REQUIRE(sc.rho == std::vector<double>{0.3, 0.2});
  // 10 uW deficit over a microsecond slot
  REQUIRE_THAT(sc.energy_deficit(), WithinRel(1e-11, 1e-12));
}

TEST_CASE("single values broadcast across users") {
  const ScenarioConfig cfg = parse_config(
      "users = 3\n"
      "fading = constant\n"
      "constant_gain = 0.8\n"
      "harvest_mean_watts = 4.0\n"
      "rho = 0.1\n");
  const Scenario sc = build_scenario(cfg);
  REQUIRE(sc.users() == 3);
  REQUIRE(sc.fading.states == 1);
  for (std::size_t i = 0; i < 3; ++i) {
    REQUIRE(sc.fading.gain[i] == 0.8);
    REQUIRE(sc.harvest_mean[i] == 4.0 * 1e-6);
    REQUIRE(sc.rho[i] == 0.1);
  }

  ScenarioConfig bad = cfg;
  bad.rho = {0.1, 0.2};  // neither 1 nor 3 values
  REQUIRE_THROWS_WITH(build_scenario(bad), ContainsSubstring("rho"));
}

TEST_CASE("canonical serialization and hash are frozen") {
  const ScenarioConfig cfg = load_config(config_path("reference.cfg"));
  const std::string canon =
      "users = 2\n"
      "fading = rayleigh\n"
      "rayleigh_scale = 1,1\n"
      "rayleigh_step = 0.1\n"
      "rayleigh_max = 5\n"
      "harvest = exponential\n"
      "harvest_mean_watts = 5,3\n"
      "rho = 0.3,0.2\n"
      "noise_watts = 1\n"
      "rx_consumption_watts = 2e-05\n"
      "rx_harvest_watts = 1e-05\n"
      "eta = 1e-05\n"
      "slot_seconds = 1e-06\n";
  REQUIRE(serialize_config(cfg) == canon);
  // FNV-1a over the canonical text, cross-checked externally
  REQUIRE(config_hash(cfg) == 0xb73d38c2be812f0cULL);
  REQUIRE(detail::hash_hex(config_hash(cfg)) == "b73d38c2be812f0c");

  ScenarioConfig tweaked = cfg;
  tweaked.eta = 2e-5;
  REQUIRE(config_hash(tweaked) != config_hash(cfg));
}

TEST_CASE("serialization round-trips every field bit for bit") {
  for (const char* name : {"reference.cfg", "small.cfg", "infeasible_energy.cfg"}) {
    const ScenarioConfig a = load_config(config_path(name));
    const ScenarioConfig b = parse_config(serialize_config(a));
    REQUIRE(serialize_config(b) == serialize_config(a));
    REQUIRE(a.users == b.users);
    REQUIRE(a.fading == b.fading);
    REQUIRE(a.rayleigh_scale == b.rayleigh_scale);
    REQUIRE(a.rayleigh_step == b.rayleigh_step);
    REQUIRE(a.rayleigh_max == b.rayleigh_max);
    REQUIRE(a.constant_gain == b.constant_gain);
    REQUIRE(a.harvest == b.harvest);
    REQUIRE(a.harvest_mean_watts == b.harvest_mean_watts);
    REQUIRE(a.rho == b.rho);
    REQUIRE(a.noise_watts == b.noise_watts);
    REQUIRE(a.rx_consumption_watts == b.rx_consumption_watts);
    REQUIRE(a.rx_harvest_watts == b.rx_harvest_watts);
    REQUIRE(a.eta == b.eta);
    REQUIRE(a.slot_seconds == b.slot_seconds);
    REQUIRE(config_hash(a) == config_hash(b));
  }
}

TEST_CASE("cli rejects malformed invocations") {
  REQUIRE(run_cli("nonsense") != 0);
  REQUIRE(run_cli("simulate --out cli_out_bad") != 0);   // missing --config
  REQUIRE(run_cli("sweep --config " + config_path("small.cfg") + " --out cli_out_bad") !=
          0);  // missing --values
}

TEST_CASE("cli simulate is reproducible byte for byte") {
  const std::string cfg = config_path("small.cfg");
  std::filesystem::remove_all("cli_out_a");
  std::filesystem::remove_all("cli_out_b");
  std::filesystem::remove_all("cli_out_c");
  const std::string args = " --model ts --constant-policy --horizon 20000 --seed 5 --config " +
                           cfg + " --out ";
  REQUIRE(run_cli("simulate" + args + "cli_out_a") == 0);
  REQUIRE(run_cli("simulate" + args + "cli_out_b") == 0);
  for (const char* f : {"simulation.csv", "comparison.csv", "manifest.json"}) {
    CAPTURE(f);
    REQUIRE(slurp(std::filesystem::path("cli_out_a") / f) ==
            slurp(std::filesystem::path("cli_out_b") / f));
  }
  // a different seed must change the rollout
  REQUIRE(run_cli("simulate --model ts --constant-policy --horizon 20000 --seed 6 --config " +
                  cfg + " --out cli_out_c") == 0);
  REQUIRE(slurp("cli_out_a/simulation.csv") != slurp("cli_out_c/simulation.csv"));
}

TEST_CASE("cli region writes boundary tables and a manifest") {
  const std::string cfg = config_path("small.cfg");
  std::filesystem::remove_all("cli_out_region");
  REQUIRE(run_cli("region --config " + cfg +
                  " --out cli_out_region --model ideal --mu-grid 3") == 0);
  const std::string boundary = slurp("cli_out_region/boundary_ideal.csv");
  REQUIRE(std::count(boundary.begin(), boundary.end(), '\n') == 4);  // header + 3 directions
  REQUIRE_THAT(boundary, ContainsSubstring("theta,mu1,mu2,R1,R2,pi_e,lambda1,lambda2,lambda_r"));
  REQUIRE(std::filesystem::exists("cli_out_region/bounds_ideal.csv"));
  REQUIRE(std::filesystem::exists("cli_out_region/region.svg"));

  const nlohmann::json m = nlohmann::json::parse(slurp("cli_out_region/manifest.json"));
  REQUIRE(m.size() == 4);  // command, config hash, params, tool version; no timestamps
  REQUIRE(m.at("command") == "region");
  REQUIRE(m.at("config_hash") == detail::hash_hex(config_hash(load_config(cfg))));
  REQUIRE(m.at("params").at("mu_grid") == 3);
}

TEST_CASE("cli validate runs a short cross-check batch") {
  REQUIRE(run_cli("validate --instances 5 --seed 3") == 0);
}
