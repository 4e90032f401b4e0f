#pragma once

#include <cmath>
#include <quadmath.h>
#include <utility>
#include <vector>

#include "isacsim/linalg.hpp"
#include "isacsim/sensing_model.hpp"

namespace isacsim {

/// Posterior Fisher information of the target state; the inverse is the
/// PCRB matrix.
struct FisherMatrix {
  Mat4 J = Mat4::Zero();

  Mat4 pcrb() const { return spd_inverse4(J, "FisherMatrix::pcrb"); }
  double pcrb_trace() const { return pcrb().trace(); }
};

/// Filter state between intervals. The prior FIM is kept equal to the
/// inverse of the EKF covariance so the information recursion and the filter
/// stay coupled.
struct BeliefState {
  TargetState mean = TargetState::Zero();
  Mat4 covariance = Mat4::Identity();
  FisherMatrix prior_fim{Mat4::Identity()};
};

/// Time update: mean and covariance through the motion model, prior FIM
/// through J' = (F J^-1 F^T + W)^-1. The loop keeps J equal to the inverse
/// posterior covariance, so J^-1 is taken from the covariance field; the
/// prior FIM itself is still required to be positive definite. Because W is
/// added before the final inversion, the predicted information is well
/// conditioned even when the posterior information spans extreme scales.
inline BeliefState predict(const BeliefState& belief, const TransitionModel& model) {
  for (int i = 0; i < 4; ++i) {
    if (!(belief.prior_fim.J(i, i) > 0.0) || !std::isfinite(belief.prior_fim.J(i, i)))
      throw SingularMatrixError("predict: prior FIM not invertible");
  }
  BeliefState out;
  out.mean = model.F * belief.mean;
  out.covariance = model.F * belief.covariance * model.F.transpose() + model.W;
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  out.prior_fim.J = spd_inverse4(out.covariance, "predict: propagated covariance");
  return out;
}

namespace detail {

/// Per-UAV ingredients of the measurement FIM, evaluated at a predicted
/// target state: information weights (inverse variances) and the two
/// Jacobian rows as 4-vectors.
struct FimChannel {
  double d = 0.0;     // horizontal range
  Vec2 u;             // unit line-of-sight, target minus UAV
  Vec2 w;             // position part of the rate row: (vel - v u) / d
  double v = 0.0;     // range rate
  double c_d = 0.0;   // 1 / var_d
  double c_v = 0.0;   // 1 / var_v
  Vec4 g_d;           // range row
  Vec4 g_v;           // rate row
};

inline FimChannel fim_channel(const TargetState& x_pred, const Vec2& uav_pos, double eta,
                              const Scenario& sc) {
  FimChannel ch;
  const Vec2 p = position_of(x_pred) - uav_pos;
  ch.d = p.norm();
  if (ch.d <= 0.0) throw GeometryError("measurement FIM: target coincides with a UAV");
  ch.u = p / ch.d;
  const Vec2 vel = velocity_of(x_pred);
  ch.v = ch.u.dot(vel);
  ch.w = (vel - ch.v * ch.u) / ch.d;
  const auto [vd, vv] = measurement_variances(ch.d, eta, sc);
  ch.c_d = 1.0 / vd;
  ch.c_v = 1.0 / vv;
  ch.g_d << ch.u.x(), ch.u.y(), 0.0, 0.0;
  ch.g_v << ch.w.x(), ch.w.y(), ch.u.x(), ch.u.y();
  return ch;
}

}  // namespace detail

/// Measurement FIM J_M = H^T R^-1 H assembled as a sum of rank-one terms.
inline Mat4 measurement_fim(const TargetState& x_pred, const SwarmPositions& uav_positions,
                            const VecX& bandwidth_shares, const Scenario& sc) {
  Mat4 jm = Mat4::Zero();
  for (int m = 0; m < static_cast<int>(uav_positions.size()); ++m) {
    const auto ch = detail::fim_channel(x_pred, uav_positions[m], bandwidth_shares[m], sc);
    jm += ch.c_d * ch.g_d * ch.g_d.transpose() + ch.c_v * ch.g_v * ch.g_v.transpose();
  }
  return jm;
}

namespace detail {

/// Covariance square root C = S S^T, conditioned on scalar measurement
/// channels by Potter rank-one updates. Directly forming J_prior + J_M and
/// inverting would cancel catastrophically here: the information weights
/// span tens of orders of magnitude between range and rate channels, and the
/// collapsed covariance directions fall far below the double-precision
/// subtraction floor of a full-matrix update. The square root keeps every
/// direction at its own sigma scale, and the extended-precision accumulator
/// pushes the rank-one subtraction floor below the smallest sigmas that
/// occur at the highest echo SNRs.
struct SqrtCovariance {
  using Scalar = long double;
  using MatL = Eigen::Matrix<Scalar, 4, 4>;
  using VecL = Eigen::Matrix<Scalar, 4, 1>;

  MatL s = MatL::Zero();

  static SqrtCovariance from_information(const Mat4& info, const char* context) {
    return SqrtCovariance{spd_cholesky<4>(spd_inverse4(info, context), context).cast<Scalar>()};
  }

  /// Condition on one scalar channel with information weight (1/variance).
  void condition(const Vec4& g, double weight) {
    if (!(weight > 0.0)) return;
    const VecL gl = g.cast<Scalar>();
    const VecL a = s.transpose() * gl;
    const Scalar alpha = a.squaredNorm();
    const Scalar r = Scalar(1.0) / Scalar(weight);
    const Scalar gamma = Scalar(1.0) / (alpha + r + std::sqrt(r * (alpha + r)));
    s -= gamma * (s * a) * a.transpose();
  }

  Mat4 covariance() const { return (s * s.transpose()).cast<double>(); }
  double trace() const { return static_cast<double>(s.squaredNorm()); }
  double position_trace() const {
    return static_cast<double>(s.row(0).squaredNorm() + s.row(1).squaredNorm());
  }
  Vec4 times(const Vec4& g) const {
    return (s * (s.transpose() * g.cast<Scalar>())).cast<double>();  // C g
  }
};

inline SqrtCovariance pcrb_sqrt(const Mat4& prior_fim, const TargetState& x_pred,
                                const SwarmPositions& uav_positions,
                                const VecX& bandwidth_shares, const Scenario& sc) {
  auto sq = SqrtCovariance::from_information(prior_fim, "pcrb: prior information");
  for (int m = 0; m < static_cast<int>(uav_positions.size()); ++m) {
    const auto ch = fim_channel(x_pred, uav_positions[m], bandwidth_shares[m], sc);
    sq.condition(ch.g_d, ch.c_d);
    sq.condition(ch.g_v, ch.c_v);
  }
  return sq;
}

/// Quad-precision variant of the square-root cascade, used only where full
/// relative accuracy of C g products is required across the entire
/// information dynamic range (the analytic gradient assembly). Gradients are
/// evaluated once per surrogate round, so the extra cost is immaterial.
struct QuadSqrtCovariance {
  __float128 s[4][4] = {};

  static QuadSqrtCovariance from_information(const Mat4& info, const char* context) {
    const Mat4 l = spd_cholesky<4>(spd_inverse4(info, context), context);
    QuadSqrtCovariance out;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) out.s[i][j] = l(i, j);
    return out;
  }

  void condition(const Vec4& g, double weight) {
    if (!(weight > 0.0)) return;
    __float128 a[4];
    for (int k = 0; k < 4; ++k) {
      a[k] = 0;
      for (int i = 0; i < 4; ++i) a[k] += s[i][k] * __float128(g[i]);
    }
    __float128 alpha = 0;
    for (int k = 0; k < 4; ++k) alpha += a[k] * a[k];
    const __float128 r = __float128(1.0) / __float128(weight);
    const __float128 gamma = __float128(1.0) / (alpha + r + sqrtq(r * (alpha + r)));
    __float128 sa[4];
    for (int i = 0; i < 4; ++i) {
      sa[i] = 0;
      for (int k = 0; k < 4; ++k) sa[i] += s[i][k] * a[k];
    }
    for (int i = 0; i < 4; ++i)
      for (int k = 0; k < 4; ++k) s[i][k] -= gamma * sa[i] * a[k];
  }

  /// C g in quad precision.
  void times(const Vec4& g, __float128 out[4]) const {
    __float128 a[4];
    for (int k = 0; k < 4; ++k) {
      a[k] = 0;
      for (int i = 0; i < 4; ++i) a[k] += s[i][k] * __float128(g[i]);
    }
    for (int i = 0; i < 4; ++i) {
      out[i] = 0;
      for (int k = 0; k < 4; ++k) out[i] += s[i][k] * a[k];
    }
  }
};

}  // namespace detail

/// Predicted PCRB matrix (J_prior + J_M)^-1, built by conditioning the prior
/// covariance on each measurement channel in turn.
inline Mat4 pcrb_matrix(const Mat4& prior_fim, const TargetState& x_pred,
                        const SwarmPositions& uav_positions, const VecX& bandwidth_shares,
                        const Scenario& sc) {
  return detail::pcrb_sqrt(prior_fim, x_pred, uav_positions, bandwidth_shares, sc).covariance();
}

/// Predicted-PCRB objective f(Q, eta) = tr((J_prior + J_M)^-1).
inline double pcrb_trace(const Mat4& prior_fim, const TargetState& x_pred,
                         const SwarmPositions& uav_positions, const VecX& bandwidth_shares,
                         const Scenario& sc) {
  return detail::pcrb_sqrt(prior_fim, x_pred, uav_positions, bandwidth_shares, sc).trace();
}

/// Position block (x, y) of the predicted PCRB matrix.
inline double pcrb_position_trace(const Mat4& prior_fim, const TargetState& x_pred,
                                  const SwarmPositions& uav_positions,
                                  const VecX& bandwidth_shares, const Scenario& sc) {
  const auto sq = detail::pcrb_sqrt(prior_fim, x_pred, uav_positions, bandwidth_shares, sc);
  return sq.position_trace();
}

/// Trace of the predicted PCRB together with its position block. Each part
/// is accurate relative to its own scale, which matters when they sit many
/// orders of magnitude apart: bandwidth reallocation moves only the position
/// block, and at high echo SNR that block is invisible inside the total.
struct PcrbValue {
  double total = 0.0;
  double position = 0.0;

  /// Strictly better: smaller total beyond float-noise resolution, or a
  /// smaller position block when the totals tie at that resolution.
  bool better_than(const PcrbValue& other, double rel_window = 1e-9) const {
    const double scale = std::max(other.total, 1e-300);
    if (total < other.total - rel_window * scale) return true;
    if (total > other.total + rel_window * scale) return false;
    return position < other.position;
  }
};

inline PcrbValue pcrb_value(const Mat4& prior_fim, const TargetState& x_pred,
                            const SwarmPositions& uav_positions, const VecX& bandwidth_shares,
                            const Scenario& sc) {
  const auto sq = detail::pcrb_sqrt(prior_fim, x_pred, uav_positions, bandwidth_shares, sc);
  return PcrbValue{sq.trace(), sq.position_trace()};
}

struct PcrbGradients {
  MatX d_positions;  // M x 2
  VecX d_eta;        // M
};

/// Analytic gradients of the predicted-PCRB objective with respect to UAV
/// positions and bandwidth shares, via d tr(J^-1) = -tr(J^-1 dJ J^-1).
/// Checked against central finite differences in the test suite.
inline PcrbGradients pcrb_gradients(const Mat4& prior_fim, const TargetState& x_pred,
                                    const SwarmPositions& uav_positions,
                                    const VecX& bandwidth_shares, const Scenario& sc) {
  const int m = static_cast<int>(uav_positions.size());
  std::vector<detail::FimChannel> channels;
  channels.reserve(m);
  auto sq = detail::QuadSqrtCovariance::from_information(prior_fim, "pcrb_gradients: prior");
  for (int i = 0; i < m; ++i) {
    channels.push_back(detail::fim_channel(x_pred, uav_positions[i], bandwidth_shares[i], sc));
    const auto& ch = channels.back();
    sq.condition(ch.g_d, ch.c_d);
    sq.condition(ch.g_v, ch.c_v);
  }

  auto qdot = [](const __float128 a[4], const __float128 b[4]) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3];
  };

  PcrbGradients out;
  out.d_positions = MatX::Zero(m, 2);
  out.d_eta = VecX::Zero(m);
  for (int i = 0; i < m; ++i) {
    const auto& ch = channels[i];
    __float128 cgd[4], cgv[4];
    sq.times(ch.g_d, cgd);
    sq.times(ch.g_v, cgv);
    const __float128 qd = qdot(cgd, cgd);  // g_d^T C^2 g_d
    const __float128 qv = qdot(cgv, cgv);

    out.d_eta[i] = static_cast<double>(
        __float128(-(2.0 * ch.c_d / bandwidth_shares[i])) * qd);

    for (int a = 0; a < 2; ++a) {
      const Vec2 ea = (a == 0) ? Vec2(1.0, 0.0) : Vec2(0.0, 1.0);
      const double dc_d = 4.0 * ch.c_d / ch.d * ch.u[a];
      const double dc_v = 4.0 * ch.c_v / ch.d * ch.u[a];
      const Vec2 du = -(ea - ch.u[a] * ch.u) / ch.d;
      const Vec2 dw = (ch.w[a] / ch.d) * ch.u + (ch.v / (ch.d * ch.d)) * (ea - ch.u[a] * ch.u) +
                      (ch.u[a] / ch.d) * ch.w;
      Vec4 dg_d, dg_v;
      dg_d << du.x(), du.y(), 0.0, 0.0;
      dg_v << dw.x(), dw.y(), du.x(), du.y();
      __float128 cdgd[4], cdgv[4];
      sq.times(dg_d, cdgd);
      sq.times(dg_v, cdgv);
      const __float128 dj_quad = __float128(dc_d) * qd +
                                 __float128(2.0 * ch.c_d) * qdot(cdgd, cgd) +
                                 __float128(dc_v) * qv +
                                 __float128(2.0 * ch.c_v) * qdot(cdgv, cgv);
      out.d_positions(i, a) = static_cast<double>(-dj_quad);
    }
  }
  return out;
}

/// Measurement update. The noise covariance is diagonal, so the channels
/// are processed sequentially with scalar gains (each scalar innovation
/// variance h^T P h + r is well conditioned even when r is tiny), which is
/// algebraically the batch update. The measurement function is relinearized
/// up to scenario.ekf_iterations times (Gauss-Newton); with a single
/// iteration this is the textbook EKF step, and for linear measurement
/// functions every iteration is a no-op. H and R are evaluated at the
/// current linearization point, starting from the predicted mean.
///
/// The posterior information is rebuilt as J_pred + H^T R^-1 H at the final
/// linearization: an exact PSD sum, accurate at every scale, and equal to
/// the inverse posterior covariance in exact arithmetic.
inline BeliefState ekf_update(const BeliefState& belief_pred, const MeasurementSet& meas,
                              const SwarmPositions& uav_positions, const VecX& bandwidth_shares,
                              const Scenario& sc) {
  const int m = meas.num_uavs();
  const VecX y = meas.stacked();
  using VecL = detail::SqrtCovariance::VecL;

  const detail::SqrtCovariance sqrt_pred{
      spd_cholesky<4>(belief_pred.covariance, "ekf_update: predicted covariance")
          .cast<long double>()};

  TargetState x_lin = belief_pred.mean;
  TargetState x_post = belief_pred.mean;
  Mat4 p_post = belief_pred.covariance;
  for (int iter = 0; iter < sc.ekf_iterations; ++iter) {
    const MatX h = measurement_jacobian(x_lin, uav_positions);
    VecX rdiag(2 * m);
    for (int i = 0; i < m; ++i) {
      const double d = (position_of(x_lin) - uav_positions[i]).norm();
      const auto [vd, vv] = measurement_variances(d, bandwidth_shares[i], sc);
      rdiag[i] = vd;
      rdiag[m + i] = vv;
    }
    const VecX y_lin = true_measurement(x_lin, uav_positions);

    // Sequential scalar conditioning on the square-root factor: the scalar
    // innovation variance ||S^T h||^2 + r stays positive by construction.
    detail::SqrtCovariance sq = sqrt_pred;
    VecL x = belief_pred.mean.cast<long double>();
    for (int ch = 0; ch < 2 * m; ++ch) {
      const Vec4 hrow = h.row(ch);
      if (!(rdiag[ch] > 0.0))
        throw SingularMatrixError("ekf_update: nonpositive channel variance");
      const VecL hl = hrow.cast<long double>();
      const VecL a = sq.s.transpose() * hl;
      const long double alpha = a.squaredNorm();
      const long double r = rdiag[ch];
      const long double s_inno = alpha + r;
      const VecL sa = sq.s * a;
      const long double innovation =
          (long double)(y[ch] - y_lin[ch]) - hl.dot(x - x_lin.cast<long double>());
      x += sa * (innovation / s_inno);
      const long double gamma = 1.0L / (s_inno + std::sqrt(r * s_inno));
      sq.s -= gamma * sa * a.transpose();
    }
    x_post = x.cast<double>();
    p_post = sq.covariance();

    const double step = (x_post - x_lin).norm();
    x_lin = x_post;
    if (step <= 1e-12 * (1.0 + x_lin.norm())) break;
  }

  BeliefState out;
  out.mean = x_post;
  out.covariance = p_post;
  // information sum at the final linearization
  out.prior_fim.J = belief_pred.prior_fim.J;
  {
    const MatX h = measurement_jacobian(x_lin, uav_positions);
    for (int i = 0; i < m; ++i) {
      const double d = (position_of(x_lin) - uav_positions[i]).norm();
      const auto [vd, vv] = measurement_variances(d, bandwidth_shares[i], sc);
      const Vec4 gd = h.row(i);
      const Vec4 gv = h.row(m + i);
      out.prior_fim.J += gd * gd.transpose() / vd + gv * gv.transpose() / vv;
    }
  }
  return out;
}

}  // namespace isacsim
