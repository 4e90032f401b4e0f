#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <future>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "isacsim/estimation.hpp"
#include "isacsim/optimizer.hpp"
#include "isacsim/rng.hpp"
#include "isacsim/scenario.hpp"

namespace isacsim {

enum class Strategy { Proposed, StaticDeployment, EqualBandwidth, MeasurementOnlyCrb };

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Proposed: return "proposed";
    case Strategy::StaticDeployment: return "sd";
    case Strategy::EqualBandwidth: return "aba";
    case Strategy::MeasurementOnlyCrb: return "crb";
  }
  return "?";
}

inline Strategy strategy_from_name(const std::string& name) {
  if (name == "proposed") return Strategy::Proposed;
  if (name == "sd") return Strategy::StaticDeployment;
  if (name == "aba") return Strategy::EqualBandwidth;
  if (name == "crb") return Strategy::MeasurementOnlyCrb;
  throw std::invalid_argument("unknown strategy '" + name + "' (expected proposed|sd|aba|crb)");
}

/// Everything logged for one interval of one run.
struct StepRecord {
  int interval = 0;  // 1-based
  TargetState truth = TargetState::Zero();
  TargetState predicted = TargetState::Zero();
  TargetState estimate = TargetState::Zero();
  Mat4 prior_fim = Mat4::Zero();  // information prior the decision saw
  SwarmPositions positions;
  VecX eta;
  Association association;
  double pcrb_trace = 0.0;      // tr((J_S + J_M)^-1) at the decision
  double pcrb_pos_trace = 0.0;  // position block of the same PCRB matrix
  double strategy_objective = 0.0;
  VecX rates;  // per-UAV achieved rate, bit/s
  MeasurementSet measurements;
  double nees = 0.0;  // posterior normalized estimation error squared
  bool feasible = false;
  bool used_fallback = false;
  SolveDiagnostics diag;
};

struct RunSummary {
  Strategy strategy = Strategy::Proposed;
  int run_index = 0;
  std::vector<StepRecord> steps;
  double loc_rmse = 0.0;  // over the post-warmup window
  double vel_rmse = 0.0;
  double mean_pcrb = 0.0;  // post-warmup mean of pcrb_trace
  long violations = 0;     // decisions failing the exact validators
  long fallbacks = 0;
  double mean_step_ms = 0.0;
};

struct EpisodeOptions {
  bool noiseless = false;   // exact motion, exact measurements, exact initial belief
  int warmup_start = 5;     // first interval included in the error metrics (1-based)
  bool keep_traces = false; // retain solver objective traces in the records
};

namespace detail {

inline SwarmDecision decide(Strategy strategy, const BeliefState& pred,
                            const SwarmPositions& q_prev, const VecX& eta_prev,
                            const Scenario& sc) {
  AoOptions opt;
  Mat4 prior = pred.prior_fim.J;
  VecX eta0 = eta_prev;
  switch (strategy) {
    case Strategy::Proposed:
      break;
    case Strategy::StaticDeployment:
      opt.optimize_positions = false;
      break;
    case Strategy::EqualBandwidth:
      opt.optimize_bandwidth = false;
      eta0 = VecX::Constant(sc.num_uavs(), 1.0 / sc.num_uavs());
      break;
    case Strategy::MeasurementOnlyCrb:
      if (2 * sc.num_uavs() < 4)
        throw SingularMatrixError(
            "measurement-only objective needs at least two UAVs to localize");
      prior = 1e-9 * Mat4::Identity();
      break;
  }
  return alternating_optimize(prior, pred.mean, q_prev, eta0, sc, opt);
}

}  // namespace detail

/// Runs the closed loop over the horizon: predict, decide, move and sense,
/// update. Infeasible intervals fall back to the communication-optimal
/// decision and are counted, not fatal.
inline RunSummary run_episode(const Scenario& sc, Strategy strategy, int run_index,
                              const EpisodeOptions& opt = {}) {
  const int n_steps = sc.num_steps();
  const int m = sc.num_uavs();
  const TransitionModel model = TransitionModel::from(sc);

  RngStream process_rng(sc.seed, "process_noise", run_index);
  RngStream meas_rng(sc.seed, "measurement_noise", run_index);
  RngStream init_rng(sc.seed, "belief_init", run_index);

  // Initial belief: the truth perturbed by the documented prior covariance.
  Mat4 p0 = Mat4::Zero();
  p0(0, 0) = p0(1, 1) = sc.belief_init_pos_var;
  p0(2, 2) = p0(3, 3) = sc.belief_init_vel_var;
  BeliefState belief;
  belief.mean = sc.target_initial_state;
  if (!opt.noiseless) {
    belief.mean[0] += std::sqrt(p0(0, 0)) * init_rng.gaussian();
    belief.mean[1] += std::sqrt(p0(1, 1)) * init_rng.gaussian();
    belief.mean[2] += std::sqrt(p0(2, 2)) * init_rng.gaussian();
    belief.mean[3] += std::sqrt(p0(3, 3)) * init_rng.gaussian();
  }
  belief.covariance = p0;
  belief.prior_fim.J = spd_inverse4(p0, "run_episode: initial prior");

  TargetState truth = sc.target_initial_state;
  SwarmPositions q = sc.uav_initial_positions;
  VecX eta;
  {
    const Association a0 = solve_association(q, sc);
    eta = comm_optimal_bandwidth(q, a0, sc).first;
  }

  RunSummary summary;
  summary.strategy = strategy;
  summary.run_index = run_index;
  summary.steps.reserve(n_steps);
  double total_ms = 0.0;

  for (int n = 1; n <= n_steps; ++n) {
    const auto t0 = std::chrono::steady_clock::now();

    const BeliefState pred = predict(belief, model);

    SwarmDecision decision;
    const FeasibilityReport rep = check_feasibility(q, sc);
    if (rep.feasible) {
      decision = detail::decide(strategy, pred,
                                strategy == Strategy::StaticDeployment ? sc.uav_initial_positions
                                                                       : q,
                                eta, sc);
    } else {
      decision = comm_fallback_decision(q, sc, pred.prior_fim.J, pred.mean);
    }
    if (strategy == Strategy::StaticDeployment) decision.positions = sc.uav_initial_positions;

    // Ground truth evolves and the UAVs measure from their new placements.
    if (opt.noiseless) {
      for (int i = 0; i < 4; ++i) process_rng.gaussian();  // keep streams aligned
      truth = model.F * truth;
    } else {
      truth = evolve_state(truth, model, process_rng);
    }
    const MeasurementSet meas =
        noisy_measurement(truth, decision.positions, decision.eta, sc, meas_rng, opt.noiseless);
    belief = ekf_update(pred, meas, decision.positions, decision.eta, sc);

    StepRecord rec;
    rec.interval = n;
    rec.truth = truth;
    rec.predicted = pred.mean;
    rec.estimate = belief.mean;
    rec.prior_fim = pred.prior_fim.J;
    rec.positions = decision.positions;
    rec.eta = decision.eta;
    rec.association = decision.association;
    rec.strategy_objective = decision.objective;
    {
      const Mat4 c = pcrb_matrix(pred.prior_fim.J, pred.mean, decision.positions, decision.eta, sc);
      rec.pcrb_trace = c.trace();
      rec.pcrb_pos_trace = c(0, 0) + c(1, 1);
    }
    rec.rates.resize(m);
    for (int i = 0; i < m; ++i)
      rec.rates[i] = rate(decision.positions[i],
                          sc.bs_positions[decision.association.bs_of_uav[i]], decision.eta[i], sc);
    rec.measurements = meas;
    {
      // via the posterior information matrix, which stays accurate at every
      // noise scale (the covariance's strong directions drown in roundoff)
      const Vec4 err = belief.mean - truth;
      rec.nees = err.dot(belief.prior_fim.J * err);
    }
    rec.used_fallback = decision.diag.used_fallback;
    const bool positions_are_decisions = strategy != Strategy::StaticDeployment;
    const auto violations =
        validate_decision(decision.positions, decision.eta, decision.association, q,
                          position_of(pred.mean), sc, 1e-6, positions_are_decisions);
    rec.feasible = violations.empty();
    summary.violations += static_cast<long>(violations.size());
    summary.fallbacks += decision.diag.used_fallback ? 1 : 0;
    rec.diag = std::move(decision.diag);
    if (!opt.keep_traces) {
      rec.diag.ao_objective_trace.clear();
      rec.diag.trajectory_traces.clear();
      rec.diag.bandwidth_traces.clear();
    }

    q = decision.positions;
    eta = decision.eta;

    total_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
    summary.steps.push_back(std::move(rec));
  }

  // Post-warmup error metrics.
  double loc_sq = 0.0, vel_sq = 0.0, pcrb_sum = 0.0;
  int count = 0;
  for (const auto& rec : summary.steps) {
    if (rec.interval < opt.warmup_start) continue;
    loc_sq += (position_of(rec.estimate) - position_of(rec.truth)).squaredNorm();
    vel_sq += (velocity_of(rec.estimate) - velocity_of(rec.truth)).squaredNorm();
    pcrb_sum += rec.pcrb_trace;
    ++count;
  }
  if (count > 0) {
    summary.loc_rmse = std::sqrt(loc_sq / count);
    summary.vel_rmse = std::sqrt(vel_sq / count);
    summary.mean_pcrb = pcrb_sum / count;
  }
  summary.mean_step_ms = total_ms / n_steps;
  return summary;
}

struct StrategyAggregate {
  Strategy strategy = Strategy::Proposed;
  int runs = 0;
  double loc_rmse = 0.0;  // pooled over runs and post-warmup steps
  double vel_rmse = 0.0;
  double mean_run_loc_rmse = 0.0;
  double std_run_loc_rmse = 0.0;
  double mean_run_vel_rmse = 0.0;
  double std_run_vel_rmse = 0.0;
  std::vector<double> mean_pcrb_per_interval;  // across runs, all intervals
  double mean_pcrb = 0.0;                      // post-warmup pooled mean
  long violations = 0;
  long fallbacks = 0;
  double mean_step_ms = 0.0;
  std::vector<RunSummary> run_summaries;
};

/// Paired-seed Monte Carlo: every strategy replays the same per-run noise
/// streams, so differences are attributable to the strategy alone. Runs are
/// distributed over hardware threads; aggregation is a fixed-order reduction
/// independent of completion order.
inline std::vector<StrategyAggregate> monte_carlo(const Scenario& sc,
                                                  const std::vector<Strategy>& strategies,
                                                  int runs, const EpisodeOptions& opt = {},
                                                  bool keep_run_summaries = true) {
  if (runs < 1) throw std::invalid_argument("monte_carlo: runs must be >= 1");
  const int n_steps = sc.num_steps();

  std::vector<std::vector<RunSummary>> results(strategies.size());
  for (auto& v : results) v.resize(runs);

  const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::future<void>> futures;
  futures.reserve(workers);
  std::atomic<int> next_run{0};
  for (unsigned w = 0; w < workers; ++w) {
    futures.push_back(std::async(std::launch::async, [&]() {
      for (;;) {
        const int r = next_run.fetch_add(1);
        if (r >= runs) return;
        for (size_t s = 0; s < strategies.size(); ++s)
          results[s][r] = run_episode(sc, strategies[s], r, opt);
      }
    }));
  }
  for (auto& f : futures) f.get();

  std::vector<StrategyAggregate> out;
  out.reserve(strategies.size());
  for (size_t s = 0; s < strategies.size(); ++s) {
    StrategyAggregate agg;
    agg.strategy = strategies[s];
    agg.runs = runs;
    agg.mean_pcrb_per_interval.assign(n_steps, 0.0);
    double loc_sq = 0.0, vel_sq = 0.0, pcrb_sum = 0.0;
    long pooled_count = 0;
    double rmse_sum = 0.0, rmse_sq = 0.0, vrmse_sum = 0.0, vrmse_sq = 0.0, ms_sum = 0.0;
    for (const auto& run : results[s]) {
      for (const auto& rec : run.steps) {
        agg.mean_pcrb_per_interval[rec.interval - 1] += rec.pcrb_trace / runs;
        if (rec.interval < opt.warmup_start) continue;
        loc_sq += (position_of(rec.estimate) - position_of(rec.truth)).squaredNorm();
        vel_sq += (velocity_of(rec.estimate) - velocity_of(rec.truth)).squaredNorm();
        pcrb_sum += rec.pcrb_trace;
        ++pooled_count;
      }
      rmse_sum += run.loc_rmse;
      rmse_sq += run.loc_rmse * run.loc_rmse;
      vrmse_sum += run.vel_rmse;
      vrmse_sq += run.vel_rmse * run.vel_rmse;
      ms_sum += run.mean_step_ms;
      agg.violations += run.violations;
      agg.fallbacks += run.fallbacks;
    }
    if (pooled_count > 0) {
      agg.loc_rmse = std::sqrt(loc_sq / pooled_count);
      agg.vel_rmse = std::sqrt(vel_sq / pooled_count);
      agg.mean_pcrb = pcrb_sum / pooled_count;
    }
    agg.mean_run_loc_rmse = rmse_sum / runs;
    agg.std_run_loc_rmse = std::sqrt(std::max(0.0, rmse_sq / runs - agg.mean_run_loc_rmse * agg.mean_run_loc_rmse));
    agg.mean_run_vel_rmse = vrmse_sum / runs;
    agg.std_run_vel_rmse = std::sqrt(std::max(0.0, vrmse_sq / runs - agg.mean_run_vel_rmse * agg.mean_run_vel_rmse));
    agg.mean_step_ms = ms_sum / runs;
    if (keep_run_summaries) agg.run_summaries = std::move(results[s]);
    out.push_back(std::move(agg));
  }
  return out;
}

}  // namespace isacsim
