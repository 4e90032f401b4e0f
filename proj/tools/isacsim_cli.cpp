// Command-line front end: Monte Carlo campaigns, scenario feasibility
// checks, and the brute-force oracle suites.

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "isacsim/io.hpp"
#include "isacsim/oracles.hpp"

namespace {

std::vector<isacsim::Strategy> parse_strategies(const std::string& csv) {
  std::vector<isacsim::Strategy> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(isacsim::strategy_from_name(item));
  }
  if (out.empty()) throw std::invalid_argument("no strategies given");
  return out;
}

int cmd_run(const isacsim::RunManifest& manifest) {
  try {
    const auto aggs = isacsim::run_manifest(manifest);
    for (const auto& agg : aggs) {
      std::cout << isacsim::strategy_name(agg.strategy) << ": loc_rmse=" << agg.loc_rmse
                << " m, vel_rmse=" << agg.vel_rmse << " m/s, mean_pcrb=" << agg.mean_pcrb
                << ", violations=" << agg.violations << ", fallbacks=" << agg.fallbacks << "\n";
    }
    std::cout << "wrote trajectories.csv, bandwidth.csv, pcrb.csv, summary.json to "
              << manifest.out_dir << "\n";
    return 0;
  } catch (const isacsim::ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return 3;
  }
}

int cmd_validate(const std::string& scenario_path) {
  try {
    const isacsim::Scenario sc = isacsim::load_scenario(scenario_path);
    const double d_th = isacsim::control_radius_dth(sc);
    const auto rep = isacsim::check_feasibility(sc.uav_initial_positions, sc);
    std::cout << "d_th = " << d_th << " m\n";
    std::cout << "max-min rate R_c* = " << rep.max_min_rate << " bit/s (threshold "
              << sc.rate_threshold_bps << ")\n";
    std::cout << "association:";
    for (size_t m = 0; m < rep.association.bs_of_uav.size(); ++m)
      std::cout << " uav" << m << "->bs" << rep.association.bs_of_uav[m];
    std::cout << "\n" << (rep.feasible ? "FEASIBLE" : "INFEASIBLE") << "\n";
    return rep.feasible ? 0 : 1;
  } catch (const isacsim::ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "validate failed: " << e.what() << "\n";
    return 3;
  }
}

int cmd_oracle(const std::string& suite, std::uint64_t seed) {
  std::vector<isacsim::OracleReport> reports;
  const bool all = suite == "all";
  if (all || suite == "maxmin-bandwidth") reports.push_back(isacsim::oracle_maxmin_bandwidth(seed, 100));
  if (all || suite == "association") reports.push_back(isacsim::oracle_association(seed, 100));
  if (all || suite == "gradient") reports.push_back(isacsim::oracle_gradients(seed, 100));
  if (all || suite == "single-uav-grid") reports.push_back(isacsim::oracle_single_uav_grid(seed, 20));
  if (reports.empty()) {
    std::cerr << "unknown suite '" << suite
              << "' (expected all|maxmin-bandwidth|association|gradient|single-uav-grid)\n";
    return 2;
  }
  bool all_pass = true;
  for (const auto& r : reports) {
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-UAV ISAC target-tracking simulator"};
  app.require_subcommand(1);

  isacsim::RunManifest manifest;
  std::string strategy_csv = "proposed";
  std::uint64_t seed_flag = 0;
  bool seed_given = false;
  double epsilon = 0.0, delta_omega = 0.0;

  auto* run = app.add_subcommand("run", "run a Monte Carlo campaign and write CSV/JSON outputs");
  run->add_option("--scenario", manifest.scenario_path, "scenario JSON file")->required();
  run->add_option("--strategy", strategy_csv, "comma list of proposed|sd|aba|crb");
  run->add_option("--runs", manifest.runs, "number of paired Monte Carlo runs");
  auto* seed_opt = run->add_option("--seed", seed_flag, "override the scenario seed");
  run->add_option("--out", manifest.out_dir, "output directory");
  run->add_flag("--trace", manifest.trace, "dump per-interval solver diagnostics (trace.jsonl)");
  auto* eps_opt = run->add_option("--epsilon", epsilon, "relative-decrease stopping threshold");
  auto* dw_opt = run->add_option("--delta-omega", delta_omega, "line-search grid resolution");
  run->add_option("--mc-window", manifest.mc_window, "first interval of the error-metric window");
  run->add_flag("--noiseless", manifest.noiseless, "disable process/measurement noise");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "feasibility check of a scenario");
  validate->add_option("--scenario", validate_path, "scenario JSON file")->required();

  std::string suite = "all";
  std::uint64_t oracle_seed = 7;
  auto* oracle = app.add_subcommand("oracle", "run the brute-force oracle suites");
  oracle->add_option("--suite", suite, "all|maxmin-bandwidth|association|gradient|single-uav-grid");
  oracle->add_option("--seed", oracle_seed, "oracle instance seed");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    seed_given = seed_opt->count() > 0;
    if (seed_given) manifest.seed = seed_flag;
    if (eps_opt->count() > 0) manifest.epsilon = epsilon;
    if (dw_opt->count() > 0) manifest.delta_omega = delta_omega;
    try {
      manifest.strategies = parse_strategies(strategy_csv);
    } catch (const std::exception& e) {
      std::cerr << e.what() << "\n";
      return 2;
    }
    return cmd_run(manifest);
  }
  if (validate->parsed()) return cmd_validate(validate_path);
  if (oracle->parsed()) return cmd_oracle(suite, oracle_seed);
  return 0;
}
