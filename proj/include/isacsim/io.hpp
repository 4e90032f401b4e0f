#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "isacsim/scenario.hpp"
#include "isacsim/simulator.hpp"

namespace isacsim {

struct RunManifest {
  std::string scenario_path;
  std::vector<Strategy> strategies{Strategy::Proposed};
  int runs = 1;
  std::optional<std::uint64_t> seed;  // overrides the scenario's seed
  std::string out_dir = "results";
  bool trace = false;
  std::optional<double> epsilon;
  std::optional<double> delta_omega;
  int mc_window = 5;  // first interval of the error-metric window
  bool noiseless = false;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace detail

inline void write_trajectories_csv(const std::string& path,
                                   const std::vector<StrategyAggregate>& aggs) {
  std::ofstream out(path);
  out << "# isacsim csv schema v1\n";
  out << "strategy,run,interval,uav,uav_x_m,uav_y_m,target_x_m,target_y_m,"
         "target_pred_x_m,target_pred_y_m,target_est_x_m,target_est_y_m\n";
  for (const auto& agg : aggs) {
    for (const auto& run : agg.run_summaries) {
      for (const auto& rec : run.steps) {
        for (size_t u = 0; u < rec.positions.size(); ++u) {
          out << strategy_name(agg.strategy) << ',' << run.run_index << ',' << rec.interval << ','
              << u << ',' << detail::fmt(rec.positions[u].x()) << ','
              << detail::fmt(rec.positions[u].y()) << ',' << detail::fmt(rec.truth[0]) << ','
              << detail::fmt(rec.truth[1]) << ',' << detail::fmt(rec.predicted[0]) << ','
              << detail::fmt(rec.predicted[1]) << ',' << detail::fmt(rec.estimate[0]) << ','
              << detail::fmt(rec.estimate[1]) << '\n';
        }
      }
    }
  }
}

inline void write_bandwidth_csv(const std::string& path,
                                const std::vector<StrategyAggregate>& aggs) {
  std::ofstream out(path);
  out << "# isacsim csv schema v1\n";
  out << "strategy,run,interval,uav,share,rate_bps,bs_index\n";
  for (const auto& agg : aggs) {
    for (const auto& run : agg.run_summaries) {
      for (const auto& rec : run.steps) {
        for (int u = 0; u < rec.eta.size(); ++u) {
          out << strategy_name(agg.strategy) << ',' << run.run_index << ',' << rec.interval << ','
              << u << ',' << detail::fmt(rec.eta[u]) << ',' << detail::fmt(rec.rates[u]) << ','
              << rec.association.bs_of_uav[u] << '\n';
        }
      }
    }
  }
}

inline void write_pcrb_csv(const std::string& path, const std::vector<StrategyAggregate>& aggs) {
  std::ofstream out(path);
  out << "# isacsim csv schema v1\n";
  out << "strategy,run,interval,pcrb_trace,pcrb_pos_trace,loc_error_m,vel_error_mps,nees,"
         "feasible,fallback\n";
  for (const auto& agg : aggs) {
    for (const auto& run : agg.run_summaries) {
      for (const auto& rec : run.steps) {
        const double loc = (position_of(rec.estimate) - position_of(rec.truth)).norm();
        const double vel = (velocity_of(rec.estimate) - velocity_of(rec.truth)).norm();
        out << strategy_name(agg.strategy) << ',' << run.run_index << ',' << rec.interval << ','
            << detail::fmt(rec.pcrb_trace) << ',' << detail::fmt(rec.pcrb_pos_trace) << ','
            << detail::fmt(loc) << ',' << detail::fmt(vel) << ',' << detail::fmt(rec.nees) << ','
            << (rec.feasible ? 1 : 0) << ',' << (rec.used_fallback ? 1 : 0) << '\n';
      }
    }
  }
}

inline void write_trace_jsonl(const std::string& path,
                              const std::vector<StrategyAggregate>& aggs) {
  std::ofstream out(path);
  for (const auto& agg : aggs) {
    for (const auto& run : agg.run_summaries) {
      for (const auto& rec : run.steps) {
        nlohmann::json j;
        j["strategy"] = strategy_name(agg.strategy);
        j["run"] = run.run_index;
        j["interval"] = rec.interval;
        j["objective"] = rec.strategy_objective;
        j["ao_iterations"] = rec.diag.ao_iterations;
        j["sca_rounds"] = rec.diag.sca_rounds;
        j["coupled_solves"] = rec.diag.coupled_solves;
        j["coupled_iterations"] = rec.diag.coupled_iterations;
        j["restorations"] = rec.diag.restorations;
        j["hit_iteration_cap"] = rec.diag.hit_iteration_cap;
        j["kkt_primal"] = rec.diag.kkt_primal;
        j["kkt_dual"] = rec.diag.kkt_dual;
        j["ao_objective_trace"] = rec.diag.ao_objective_trace;
        out << j.dump() << '\n';
      }
    }
  }
}

inline nlohmann::json aggregate_to_json(const StrategyAggregate& agg, int mc_window) {
  nlohmann::json j;
  j["strategy"] = strategy_name(agg.strategy);
  j["runs"] = agg.runs;
  j["metric_window_start_interval"] = mc_window;
  j["loc_rmse_m"] = agg.loc_rmse;
  j["vel_rmse_mps"] = agg.vel_rmse;
  j["per_run_loc_rmse_mean_m"] = agg.mean_run_loc_rmse;
  j["per_run_loc_rmse_std_m"] = agg.std_run_loc_rmse;
  j["per_run_vel_rmse_mean_mps"] = agg.mean_run_vel_rmse;
  j["per_run_vel_rmse_std_mps"] = agg.std_run_vel_rmse;
  j["mean_pcrb_trace"] = agg.mean_pcrb;
  j["mean_pcrb_per_interval"] = agg.mean_pcrb_per_interval;
  j["constraint_violations"] = agg.violations;
  j["fallback_intervals"] = agg.fallbacks;
  j["mean_step_ms"] = agg.mean_step_ms;
  return j;
}

/// Executes a manifest end to end and writes trajectories.csv, bandwidth.csv,
/// pcrb.csv and summary.json (plus trace.jsonl when tracing) into the output
/// directory. Identical manifests produce byte-identical CSV files.
inline std::vector<StrategyAggregate> run_manifest(const RunManifest& manifest) {
  Scenario sc = load_scenario(manifest.scenario_path);
  if (manifest.seed) sc.seed = *manifest.seed;
  if (manifest.epsilon) sc.solver.epsilon = *manifest.epsilon;
  if (manifest.delta_omega) sc.solver.delta_omega = *manifest.delta_omega;

  EpisodeOptions opt;
  opt.noiseless = manifest.noiseless;
  opt.warmup_start = manifest.mc_window;
  opt.keep_traces = manifest.trace;

  const auto aggs = monte_carlo(sc, manifest.strategies, manifest.runs, opt);

  namespace fs = std::filesystem;
  fs::create_directories(manifest.out_dir);
  const auto dir = fs::path(manifest.out_dir);
  write_trajectories_csv((dir / "trajectories.csv").string(), aggs);
  write_bandwidth_csv((dir / "bandwidth.csv").string(), aggs);
  write_pcrb_csv((dir / "pcrb.csv").string(), aggs);
  if (manifest.trace) write_trace_jsonl((dir / "trace.jsonl").string(), aggs);

  nlohmann::json summary;
  summary["schema_version"] = 1;
  summary["csv_schema_version"] = 1;
  summary["scenario"] = scenario_to_json(sc);
  summary["runs"] = manifest.runs;
  summary["noiseless"] = manifest.noiseless;
  summary["strategies"] = nlohmann::json::array();
  for (const auto& agg : aggs) summary["strategies"].push_back(aggregate_to_json(agg, manifest.mc_window));
  std::ofstream out(dir / "summary.json");
  out << summary.dump(2) << '\n';

  return aggs;
}

}  // namespace isacsim
