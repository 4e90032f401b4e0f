#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "isacsim/errors.hpp"
#include "isacsim/rng.hpp"
#include "isacsim/scenario.hpp"
#include "isacsim/types.hpp"

namespace isacsim {

/// Constant-velocity state transition x' = F x + w, w ~ N(0, W), with the
/// white-noise-acceleration covariance W = kappa [[dt^3/3, dt^2/2],
/// [dt^2/2, dt]] (x) I2.
struct TransitionModel {
  Mat4 F = Mat4::Identity();
  Mat4 W = Mat4::Zero();
  Mat4 W_sqrt = Mat4::Zero();  // lower-triangular factor, zero when kappa = 0

  static TransitionModel from(double dt, double kappa) {
    TransitionModel m;
    m.F(0, 2) = dt;
    m.F(1, 3) = dt;
    const double a = dt * dt * dt / 3.0;
    const double b = dt * dt / 2.0;
    for (int axis = 0; axis < 2; ++axis) {
      m.W(axis, axis) = kappa * a;
      m.W(axis, axis + 2) = kappa * b;
      m.W(axis + 2, axis) = kappa * b;
      m.W(axis + 2, axis + 2) = kappa * dt;
    }
    // Analytic Cholesky of kappa * [[dt^3/3, dt^2/2], [dt^2/2, dt]]:
    // L = sqrt(kappa) [[sqrt(dt^3/3), 0], [sqrt(3 dt)/2, sqrt(dt)/2]].
    const double sk = std::sqrt(kappa);
    const double l11 = sk * std::sqrt(a);
    const double l21 = sk * std::sqrt(3.0 * dt) / 2.0;
    const double l22 = sk * std::sqrt(dt) / 2.0;
    for (int axis = 0; axis < 2; ++axis) {
      m.W_sqrt(axis, axis) = l11;
      m.W_sqrt(axis + 2, axis) = l21;
      m.W_sqrt(axis + 2, axis + 2) = l22;
    }
    return m;
  }

  static TransitionModel from(const Scenario& sc) {
    return from(sc.step_s, sc.process_noise_intensity);
  }
};

/// One interval of target motion. Always consumes exactly four gaussian
/// draws so paired runs stay aligned regardless of kappa.
inline TargetState evolve_state(const TargetState& x, const TransitionModel& model,
                                RngStream& rng) {
  Vec4 n;
  for (int i = 0; i < 4; ++i) n[i] = rng.gaussian();
  return model.F * x + model.W_sqrt * n;
}

/// Range and range-rate measurements of one interval, with the per-channel
/// noise variances actually used to generate them. Stacked ordering is
/// (d_1..d_M, v_1..v_M).
struct MeasurementSet {
  VecX ranges;             // m
  VecX radial_velocities;  // m/s, signed range rate
  VecX var_d;              // m^2
  VecX var_v;              // (m/s)^2

  int num_uavs() const { return static_cast<int>(ranges.size()); }

  VecX stacked() const {
    const int m = num_uavs();
    VecX y(2 * m);
    y.head(m) = ranges;
    y.tail(m) = radial_velocities;
    return y;
  }

  VecX covariance_diagonal() const {
    const int m = num_uavs();
    VecX r(2 * m);
    r.head(m) = var_d;
    r.tail(m) = var_v;
    return r;
  }
};

/// Noise-free measurement function h(x): horizontal range and signed range
/// rate to each UAV.
inline VecX true_measurement(const TargetState& x, const SwarmPositions& uav_positions) {
  const int m = static_cast<int>(uav_positions.size());
  VecX y(2 * m);
  const Vec2 pos = position_of(x);
  const Vec2 vel = velocity_of(x);
  for (int i = 0; i < m; ++i) {
    const Vec2 p = pos - uav_positions[i];
    const double d = p.norm();
    if (d <= 0.0)
      throw GeometryError("true_measurement: target coincides with UAV " + std::to_string(i));
    y[i] = d;
    y[m + i] = p.dot(vel) / d;
  }
  return y;
}

/// Echo SNR of the sensing return at horizontal range d:
/// lambda^2 P_t^u sigma_RCS / ((4 pi)^3 d^4 sigma0^2).
inline double echo_snr(double distance_m, const Scenario& sc) {
  if (!(distance_m > 0.0)) throw GeometryError("echo_snr: distance must be > 0");
  const double d2 = distance_m * distance_m;
  return sc.echo_snr_1m / (d2 * d2);
}

/// Measurement noise variances at a given range and bandwidth share:
/// var_d = alpha_d / (SNR (eta B)^2), var_v = alpha_v / (SNR (T^s)^2).
inline std::pair<double, double> measurement_variances(double distance_m, double eta,
                                                       const Scenario& sc) {
  if (!(eta > 0.0))
    throw InfeasibleError("measurement_variances: bandwidth share must be > 0");
  const double snr = echo_snr(distance_m, sc);
  const double eb = eta * sc.total_bandwidth_hz;
  const double ts = sc.meas_duration();
  return {sc.alpha_distance / (snr * eb * eb), sc.alpha_velocity / (snr * ts * ts)};
}

/// Draws one noisy measurement set. Consumes exactly 2M gaussians in stacked
/// order.
inline MeasurementSet noisy_measurement(const TargetState& x, const SwarmPositions& uav_positions,
                                        const VecX& bandwidth_shares, const Scenario& sc,
                                        RngStream& rng, bool zero_noise = false) {
  const int m = static_cast<int>(uav_positions.size());
  const VecX truth = true_measurement(x, uav_positions);
  MeasurementSet out;
  out.ranges.resize(m);
  out.radial_velocities.resize(m);
  out.var_d.resize(m);
  out.var_v.resize(m);
  for (int i = 0; i < m; ++i) {
    const auto [vd, vv] = measurement_variances(truth[i], bandwidth_shares[i], sc);
    out.var_d[i] = vd;
    out.var_v[i] = vv;
  }
  VecX noise(2 * m);
  for (int i = 0; i < 2 * m; ++i) noise[i] = rng.gaussian();
  if (zero_noise) noise.setZero();
  for (int i = 0; i < m; ++i) {
    out.ranges[i] = truth[i] + std::sqrt(out.var_d[i]) * noise[i];
    out.radial_velocities[i] = truth[m + i] + std::sqrt(out.var_v[i]) * noise[m + i];
  }
  return out;
}

/// Analytic Jacobian of h at x, one row per channel in stacked order.
/// Range rows: [u^T, 0, 0] with u the unit line-of-sight vector; rate rows
/// via the quotient rule.
inline MatX measurement_jacobian(const TargetState& x, const SwarmPositions& uav_positions) {
  const int m = static_cast<int>(uav_positions.size());
  MatX h = MatX::Zero(2 * m, 4);
  const Vec2 pos = position_of(x);
  const Vec2 vel = velocity_of(x);
  for (int i = 0; i < m; ++i) {
    const Vec2 p = pos - uav_positions[i];
    const double d = p.norm();
    if (d <= 0.0)
      throw GeometryError("measurement_jacobian: target coincides with UAV " + std::to_string(i));
    const Vec2 u = p / d;
    const double v = p.dot(vel) / d;
    const Vec2 w = (vel - v * u) / d;
    h(i, 0) = u.x();
    h(i, 1) = u.y();
    h(m + i, 0) = w.x();
    h(m + i, 1) = w.y();
    h(m + i, 2) = u.x();
    h(m + i, 3) = u.y();
  }
  return h;
}

}  // namespace isacsim
