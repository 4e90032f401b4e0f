#include <gtest/gtest.h>

#include "isacsim/estimation.hpp"
#include "isacsim/oracles.hpp"
#include "isacsim/rng.hpp"

using namespace isacsim;

namespace {

Scenario baseline() { return make_baseline_scenario(); }

/// Baseline radio but with error coefficients scaled into a regime where the
/// measurement noise is meters / tenths of m/s, comfortably inside the
/// filter's linearization envelope.
Scenario meter_noise_scenario() {
  Scenario sc = make_baseline_scenario();
  sc.alpha_distance *= 9e16;
  sc.alpha_velocity *= 1e4;
  sc.finalize();
  return sc;
}

double chi2_quantile(double p, double k) {
  // Wilson-Hilferty; ample accuracy for the large dof used here.
  const double z = (p == 0.975) ? 1.959963984540054 : (p == 0.025 ? -1.959963984540054 : 0.0);
  const double a = 2.0 / (9.0 * k);
  const double c = 1.0 - a + z * std::sqrt(a);
  return k * c * c * c;
}

}  // namespace

TEST(Predict, NoiselessPropagation) {
  const TransitionModel m = TransitionModel::from(1.0, 0.0);
  BeliefState b;
  b.mean = TargetState(1.0, 2.0, 3.0, 4.0);
  b.covariance = Mat4::Identity();
  b.prior_fim.J = Mat4::Identity();
  const BeliefState p = predict(b, m);
  EXPECT_EQ(p.mean, m.F * b.mean);
  EXPECT_LT((p.covariance - m.F * m.F.transpose()).norm(), 1e-14);
}

TEST(Predict, InformationAndCovarianceRoutesAgree) {
  const TransitionModel m = TransitionModel::from(1.0, 0.5);
  RngStream rng(3, "predict");
  for (int t = 0; t < 50; ++t) {
    BeliefState b;
    b.covariance = oracles::random_prior(rng, -2.0, 2.0);
    b.prior_fim.J = spd_inverse4(b.covariance, "test");
    const BeliefState p = predict(b, m);
    const Mat4 via_cov = spd_inverse4(p.covariance, "test");
    const double rel = (p.prior_fim.J - via_cov).norm() / via_cov.norm();
    EXPECT_LT(rel, 1e-9);
  }
}

TEST(Predict, ProcessNoiseInflatesCovariance) {
  const TransitionModel m = TransitionModel::from(1.0, 0.5);
  BeliefState b;
  b.covariance = Mat4::Identity();
  b.prior_fim.J = Mat4::Identity();
  const BeliefState p = predict(b, m);
  const Mat4 bare = m.F * b.covariance * m.F.transpose();
  EXPECT_GE(p.covariance.trace(), bare.trace());
}

TEST(Predict, SingularPriorThrows) {
  const TransitionModel m = TransitionModel::from(1.0, 0.5);
  BeliefState b;
  b.prior_fim.J = Mat4::Zero();
  EXPECT_THROW(predict(b, m), SingularMatrixError);
}

TEST(MeasurementFim, NoUavsGivesZero) {
  const Scenario sc = baseline();
  const TargetState x(600.0, 1600.0, 30.0, 0.0);
  const Mat4 jm = measurement_fim(x, {}, VecX(0), sc);
  EXPECT_EQ(jm, Mat4::Zero());
}

TEST(MeasurementFim, MatchesExplicitGramProduct) {
  const Scenario sc = baseline();
  RngStream rng(5, "fim");
  for (int t = 0; t < 100; ++t) {
    const auto inst = oracles::random_pcrb_instance(rng, 3, 100.0, 1500.0);
    const Mat4 jm = measurement_fim(inst.x_pred, inst.q, inst.eta, sc);
    // independent route: assemble H and R and multiply
    const MatX h = measurement_jacobian(inst.x_pred, inst.q);
    VecX rdiag(6);
    for (int i = 0; i < 3; ++i) {
      const double d = (position_of(inst.x_pred) - inst.q[i]).norm();
      const auto [vd, vv] = measurement_variances(d, inst.eta[i], sc);
      rdiag[i] = vd;
      rdiag[3 + i] = vv;
    }
    const Mat4 explicit_jm = h.transpose() * rdiag.cwiseInverse().asDiagonal() * h;
    EXPECT_LT((jm - explicit_jm).norm() / explicit_jm.norm(), 1e-12);
    // PSD: Cholesky of J_M + tiny ridge succeeds
    EXPECT_NO_THROW(spd_cholesky<4>(Mat4(jm + 1e-12 * explicit_jm.trace() * Mat4::Identity()),
                                    "psd"));
  }
}

TEST(MeasurementFim, LinearInInverseVariances) {
  Scenario sc = baseline();
  RngStream rng(6, "fim_scale");
  const auto inst = oracles::random_pcrb_instance(rng, 2, 200.0, 900.0);
  const Mat4 jm1 = measurement_fim(inst.x_pred, inst.q, inst.eta, sc);
  const double c = 3.7;
  sc.alpha_distance *= c;  // scales every variance by c
  sc.alpha_velocity *= c;
  sc.finalize();
  const Mat4 jm2 = measurement_fim(inst.x_pred, inst.q, inst.eta, sc);
  EXPECT_LT((jm2 * c - jm1).norm() / jm1.norm(), 1e-12);
}

TEST(PcrbTrace, NoMeasurementsReducesToPrior) {
  const Scenario sc = baseline();
  RngStream rng(7, "pcrb0");
  const Mat4 prior = oracles::random_prior(rng);
  const TargetState x(600.0, 1600.0, 30.0, 0.0);
  const double f = pcrb_trace(prior, x, {}, VecX(0), sc);
  EXPECT_NEAR(f, spd_inverse4(prior, "test").trace(), 1e-12 * f);
}

TEST(PcrbTrace, InformationMonotonicity) {
  const Scenario sc = baseline();
  RngStream rng(8, "pcrb_mono");
  for (int t = 0; t < 100; ++t) {
    const auto inst = oracles::random_pcrb_instance(rng, 1 + t % 3, 50.0, 2000.0);
    const double with_meas = pcrb_trace(inst.prior, inst.x_pred, inst.q, inst.eta, sc);
    const double prior_only = spd_inverse4(inst.prior, "test").trace();
    EXPECT_LE(with_meas, prior_only * (1.0 + 1e-12));
  }
}

TEST(PcrbTrace, MirroredGeometryHasEqualAxisBounds) {
  const Scenario sc = baseline();
  // two UAVs mirrored about the target along the diagonal, target velocity on
  // the diagonal, axis-symmetric prior: the x and y position bounds coincide
  const TargetState x(1000.0, 1000.0, 10.0, 10.0);
  const Vec2 offset = 300.0 * Vec2(std::sqrt(0.5), std::sqrt(0.5));
  const SwarmPositions q = {position_of(x) + offset, position_of(x) - offset};
  VecX eta(2);
  eta << 0.5, 0.5;
  Mat4 prior = Mat4::Zero();
  prior.diagonal() << 0.02, 0.02, 0.8, 0.8;
  const Mat4 c = pcrb_matrix(prior, x, q, eta, sc);
  EXPECT_NEAR(c(0, 0) / c(1, 1), 1.0, 1e-9);
}

TEST(PcrbTrace, InvariantUnderUavRelabeling) {
  const Scenario sc = baseline();
  RngStream rng(9, "pcrb_perm");
  const auto inst = oracles::random_pcrb_instance(rng, 3, 100.0, 1200.0);
  const double f = pcrb_trace(inst.prior, inst.x_pred, inst.q, inst.eta, sc);
  const SwarmPositions q2 = {inst.q[2], inst.q[0], inst.q[1]};
  VecX eta2(3);
  eta2 << inst.eta[2], inst.eta[0], inst.eta[1];
  const double f2 = pcrb_trace(inst.prior, inst.x_pred, q2, eta2, sc);
  EXPECT_NEAR(f2 / f, 1.0, 1e-9);  // sequential conditioning is order-dependent at float level
}

TEST(PcrbGradients, MoreBandwidthNeverHurts) {
  const Scenario sc = baseline();
  RngStream rng(10, "grad_sign");
  for (int t = 0; t < 100; ++t) {
    const auto inst = oracles::random_pcrb_instance(rng, 2 + t % 2, 50.0, 2000.0);
    const PcrbGradients g = pcrb_gradients(inst.prior, inst.x_pred, inst.q, inst.eta, sc);
    for (int i = 0; i < g.d_eta.size(); ++i) EXPECT_LT(g.d_eta[i], 0.0);
  }
}

TEST(PcrbGradients, FiniteDifferenceAgreement) {
  const OracleReport rep = oracle_gradients(123, 40);
  EXPECT_TRUE(rep.pass) << rep.detail;
}

TEST(PcrbGradients, TranslationInvariance) {
  const Scenario sc = baseline();
  RngStream rng(11, "grad_shift");
  const auto inst = oracles::random_pcrb_instance(rng, 3, 100.0, 900.0);
  const PcrbGradients g1 = pcrb_gradients(inst.prior, inst.x_pred, inst.q, inst.eta, sc);
  const double f1 = pcrb_trace(inst.prior, inst.x_pred, inst.q, inst.eta, sc);
  const Vec2 shift(312.0, -87.0);
  TargetState x2 = inst.x_pred;
  x2[0] += shift.x();
  x2[1] += shift.y();
  SwarmPositions q2 = inst.q;
  for (auto& p : q2) p += shift;
  const PcrbGradients g2 = pcrb_gradients(inst.prior, x2, q2, inst.eta, sc);
  const double f2 = pcrb_trace(inst.prior, x2, q2, inst.eta, sc);
  EXPECT_NEAR(f2 / f1, 1.0, 1e-9);
  EXPECT_LT((g1.d_positions - g2.d_positions).norm() / g1.d_positions.norm(), 1e-9);
}

TEST(EkfUpdate, UninformativeMeasurementLimit) {
  Scenario sc = meter_noise_scenario();
  sc.alpha_distance *= 1e12;  // blow the variances up
  sc.alpha_velocity *= 1e12;
  sc.finalize();
  BeliefState pred;
  pred.mean = TargetState(600.0, 1600.0, 30.0, 0.0);
  pred.covariance = Mat4::Identity();
  pred.prior_fim.J = Mat4::Identity();
  const SwarmPositions q = {Vec2(807.0, 1100.0), Vec2(1500.0, 2300.0)};
  VecX eta(2);
  eta << 0.5, 0.5;
  RngStream rng(12, "ekf_r");
  const MeasurementSet ms = noisy_measurement(pred.mean, q, eta, sc, rng);
  const BeliefState post = ekf_update(pred, ms, q, eta, sc);
  EXPECT_LT((post.mean - pred.mean).norm(), 1e-4);
  EXPECT_NEAR(post.covariance.trace() / pred.covariance.trace(), 1.0, 1e-4);
}

TEST(EkfUpdate, ZeroInnovationKeepsMeanShrinksCovariance) {
  const Scenario sc = meter_noise_scenario();
  BeliefState pred;
  pred.mean = TargetState(600.0, 1600.0, 30.0, 0.0);
  pred.covariance = Mat4::Identity();
  pred.prior_fim.J = Mat4::Identity();
  const SwarmPositions q = {Vec2(807.0, 1100.0), Vec2(1500.0, 2300.0)};
  VecX eta(2);
  eta << 0.5, 0.5;
  RngStream rng(13, "ekf_zero");
  MeasurementSet ms = noisy_measurement(pred.mean, q, eta, sc, rng, /*zero_noise=*/true);
  const BeliefState post = ekf_update(pred, ms, q, eta, sc);
  EXPECT_LT((post.mean - pred.mean).norm(), 1e-10);
  EXPECT_LT(post.covariance.trace(), pred.covariance.trace());
}

TEST(EkfUpdate, MatchesTextbookKalmanOracle) {
  Scenario sc = meter_noise_scenario();
  sc.ekf_iterations = 1;  // the plain single-linearization update
  BeliefState pred;
  pred.mean = TargetState(620.0, 1580.0, 28.0, 3.0);
  pred.covariance = Mat4::Identity() * 2.0;
  pred.covariance(0, 2) = pred.covariance(2, 0) = 0.3;
  pred.prior_fim.J = spd_inverse4(pred.covariance, "test");
  const SwarmPositions q = {Vec2(807.0, 1100.0), Vec2(1500.0, 2300.0), Vec2(100.0, 1700.0)};
  VecX eta(3);
  eta << 0.4, 0.3, 0.3;
  RngStream rng(14, "ekf_lin");
  const MeasurementSet ms =
      noisy_measurement(pred.mean + Vec4(0.5, -0.3, 0.1, 0.2), q, eta, sc, rng);

  const BeliefState post = ekf_update(pred, ms, q, eta, sc);

  // independent textbook route with H, R at the predicted mean
  const MatX h = measurement_jacobian(pred.mean, q);
  VecX rdiag(6);
  for (int i = 0; i < 3; ++i) {
    const double d = (position_of(pred.mean) - q[i]).norm();
    const auto [vd, vv] = measurement_variances(d, eta[i], sc);
    rdiag[i] = vd;
    rdiag[3 + i] = vv;
  }
  const MatX s = h * pred.covariance * h.transpose() + MatX(rdiag.asDiagonal());
  const MatX k = pred.covariance * h.transpose() * s.inverse();
  const VecX innovation = ms.stacked() - true_measurement(pred.mean, q);
  const Vec4 mean_ref = pred.mean + k * innovation;
  const Mat4 cov_ref = (Mat4::Identity() - k * h) * pred.covariance;

  EXPECT_LT((post.mean - mean_ref).norm() / mean_ref.norm(), 1e-9);
  EXPECT_LT((post.covariance - cov_ref).norm() / cov_ref.norm(), 1e-9);
}

TEST(EkfUpdate, PosteriorNeverExceedsPredictedCovariance) {
  const Scenario sc = meter_noise_scenario();
  RngStream rng(15, "ekf_shrink");
  for (int t = 0; t < 50; ++t) {
    const auto inst = oracles::random_pcrb_instance(rng, 3, 100.0, 1500.0);
    BeliefState pred;
    pred.mean = inst.x_pred;
    pred.covariance = oracles::random_prior(rng, -1.0, 1.0);
    pred.prior_fim.J = spd_inverse4(pred.covariance, "test");
    const MeasurementSet ms = noisy_measurement(inst.x_pred, inst.q, inst.eta, sc, rng);
    const BeliefState post = ekf_update(pred, ms, inst.q, inst.eta, sc);
    EXPECT_LE(post.covariance.trace(), pred.covariance.trace() * (1.0 + 1e-9));
  }
}

TEST(EkfUpdate, EnsembleNeesInsideChiSquareBand) {
  const Scenario sc = meter_noise_scenario();
  const SwarmPositions q = {Vec2(807.0, 1100.0), Vec2(1500.0, 2300.0), Vec2(2193.0, 1100.0)};
  VecX eta(3);
  eta << 1.0 / 3, 1.0 / 3, 1.0 / 3;
  Mat4 p0 = Mat4::Zero();
  p0.diagonal() << 100.0, 100.0, 25.0, 25.0;
  const Mat4 p0_sqrt = spd_cholesky<4>(p0, "test");

  const int runs = 500;
  double nees_sum = 0.0;
  double mse_pos = 0.0, pcrb_pos = 0.0;
  RngStream rng(16, "ekf_nees");
  for (int r = 0; r < runs; ++r) {
    const TargetState truth(1400.0, 1700.0, 20.0, -10.0);
    Vec4 n;
    for (int i = 0; i < 4; ++i) n[i] = rng.gaussian();
    BeliefState pred;
    pred.mean = truth + p0_sqrt * n;
    pred.covariance = p0;
    pred.prior_fim.J = spd_inverse4(p0, "test");
    const MeasurementSet ms = noisy_measurement(truth, q, eta, sc, rng);
    const BeliefState post = ekf_update(pred, ms, q, eta, sc);
    const Vec4 err = post.mean - truth;
    nees_sum += err.dot(spd_solve<4>(post.covariance, err, "test"));
    mse_pos += err.head<2>().squaredNorm() / runs;
    const Mat4 c =
        spd_inverse4(Mat4(pred.prior_fim.J + measurement_fim(pred.mean, q, eta, sc)), "test");
    pcrb_pos += (c(0, 0) + c(1, 1)) / runs;
  }
  const double mean_nees = nees_sum / runs;
  const double lo = chi2_quantile(0.025, 4.0 * runs) / runs;
  const double hi = chi2_quantile(0.975, 4.0 * runs) / runs;
  EXPECT_GT(mean_nees, lo);
  EXPECT_LT(mean_nees, hi);
  EXPECT_GE(mse_pos, 0.85 * pcrb_pos);
}

TEST(FisherMatrix, PcrbOnDemand) {
  FisherMatrix f;
  f.J = Mat4::Identity() * 4.0;
  EXPECT_NEAR(f.pcrb_trace(), 1.0, 1e-14);
  f.J = Mat4::Zero();
  EXPECT_THROW(f.pcrb(), SingularMatrixError);
}
