#include <gtest/gtest.h>

#include "isacsim/simulator.hpp"

using namespace isacsim;

namespace {
Scenario baseline() { return make_baseline_scenario(); }
}  // namespace

TEST(RunEpisode, SixtyIntervalsOnBaselineHorizon) {
  const Scenario sc = baseline();
  const RunSummary run = run_episode(sc, Strategy::StaticDeployment, 0);
  ASSERT_EQ(run.steps.size(), 60u);
  for (size_t i = 0; i < run.steps.size(); ++i) {
    EXPECT_EQ(run.steps[i].interval, static_cast<int>(i) + 1);
    EXPECT_GT(run.steps[i].pcrb_trace, 0.0);
  }
}

TEST(RunEpisode, DeterministicForIdenticalSeeds) {
  const Scenario sc = baseline();
  const RunSummary a = run_episode(sc, Strategy::StaticDeployment, 3);
  const RunSummary b = run_episode(sc, Strategy::StaticDeployment, 3);
  ASSERT_EQ(a.steps.size(), b.steps.size());
  for (size_t i = 0; i < a.steps.size(); ++i) {
    EXPECT_EQ(a.steps[i].truth, b.steps[i].truth);
    EXPECT_EQ(a.steps[i].estimate, b.steps[i].estimate);
    EXPECT_EQ(a.steps[i].eta, b.steps[i].eta);
    for (size_t u = 0; u < a.steps[i].positions.size(); ++u)
      EXPECT_EQ(a.steps[i].positions[u], b.steps[i].positions[u]);
  }
  EXPECT_EQ(a.loc_rmse, b.loc_rmse);
}

TEST(RunEpisode, NoiselessLoopTracksExactly) {
  Scenario sc = baseline();
  sc.process_noise_intensity = 0.0;
  sc.finalize();
  EpisodeOptions opt;
  opt.noiseless = true;
  const RunSummary run = run_episode(sc, Strategy::StaticDeployment, 0, opt);
  for (const auto& rec : run.steps) {
    EXPECT_LT((rec.estimate - rec.truth).norm(), 1e-6);
    EXPECT_LT((rec.predicted - rec.truth).norm(), 1e-6);
  }
}

TEST(RunEpisode, PairedSeedsShareGroundTruthAcrossStrategies) {
  const Scenario sc = baseline();
  const RunSummary a = run_episode(sc, Strategy::StaticDeployment, 5);
  const RunSummary b = run_episode(sc, Strategy::EqualBandwidth, 5);
  for (size_t i = 0; i < a.steps.size(); ++i) EXPECT_EQ(a.steps[i].truth, b.steps[i].truth);
}

TEST(RunEpisode, KinematicsNeverViolated) {
  const Scenario sc = baseline();
  for (Strategy s : {Strategy::Proposed, Strategy::EqualBandwidth}) {
    const RunSummary run = run_episode(sc, s, 1);
    SwarmPositions prev = sc.uav_initial_positions;
    for (const auto& rec : run.steps) {
      for (size_t u = 0; u < rec.positions.size(); ++u)
        EXPECT_LE((rec.positions[u] - prev[u]).norm(), sc.v_max_mps * sc.step_s + 1e-9);
      prev = rec.positions;
    }
  }
}

TEST(RunEpisode, LoggedPcrbRecomputesExactly) {
  const Scenario sc = baseline();
  const RunSummary run = run_episode(sc, Strategy::Proposed, 2);
  for (const auto& rec : run.steps) {
    const double again =
        pcrb_trace(rec.prior_fim, rec.predicted, rec.positions, rec.eta, sc);
    EXPECT_NEAR(again, rec.pcrb_trace, 1e-12 * std::abs(rec.pcrb_trace));
  }
}

TEST(RunEpisode, StaticDeploymentNeverMoves) {
  const Scenario sc = baseline();
  const RunSummary run = run_episode(sc, Strategy::StaticDeployment, 4);
  for (const auto& rec : run.steps)
    for (size_t u = 0; u < rec.positions.size(); ++u)
      EXPECT_EQ(rec.positions[u], sc.uav_initial_positions[u]);
}

TEST(RunEpisode, EqualBandwidthKeepsUniformShares) {
  const Scenario sc = baseline();
  const RunSummary run = run_episode(sc, Strategy::EqualBandwidth, 4);
  for (const auto& rec : run.steps)
    for (int u = 0; u < rec.eta.size(); ++u) EXPECT_NEAR(rec.eta[u], 1.0 / 3.0, 1e-12);
}

TEST(RunEpisode, CrbStrategyRequiresTwoUavs) {
  Scenario sc = baseline();
  sc.uav_initial_positions = {Vec2(1500.0, 2300.0)};
  sc.finalize();
  EXPECT_THROW(run_episode(sc, Strategy::MeasurementOnlyCrb, 0), SingularMatrixError);
}

TEST(RunEpisode, RatesMeetThresholdOnFeasibleSteps) {
  const Scenario sc = baseline();
  const RunSummary run = run_episode(sc, Strategy::Proposed, 6);
  for (const auto& rec : run.steps) {
    if (!rec.feasible) continue;
    for (int u = 0; u < rec.rates.size(); ++u)
      EXPECT_GE(rec.rates[u], sc.rate_threshold_bps * (1.0 - 1e-6));
  }
}

TEST(MonteCarlo, SingleRunAggregatesEqualEpisode) {
  const Scenario sc = baseline();
  const auto aggs = monte_carlo(sc, {Strategy::StaticDeployment}, 1);
  ASSERT_EQ(aggs.size(), 1u);
  const RunSummary solo = run_episode(sc, Strategy::StaticDeployment, 0);
  EXPECT_EQ(aggs[0].loc_rmse, solo.loc_rmse);
  EXPECT_EQ(aggs[0].vel_rmse, solo.vel_rmse);
  EXPECT_EQ(aggs[0].mean_pcrb, solo.mean_pcrb);
  ASSERT_EQ(aggs[0].mean_pcrb_per_interval.size(), 60u);
}

TEST(MonteCarlo, StrategyNamesRoundTrip) {
  for (Strategy s : {Strategy::Proposed, Strategy::StaticDeployment, Strategy::EqualBandwidth,
                     Strategy::MeasurementOnlyCrb})
    EXPECT_EQ(strategy_from_name(strategy_name(s)), s);
  EXPECT_THROW(strategy_from_name("bogus"), std::invalid_argument);
}
