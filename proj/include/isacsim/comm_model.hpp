#pragma once

#include <cmath>
#include <limits>

#include "isacsim/errors.hpp"
#include "isacsim/scenario.hpp"
#include "isacsim/types.hpp"

namespace isacsim {

/// LoS channel power gain between a UAV and a BS:
/// beta0 / (||q - w||^2 + dH^2). Strictly decreasing in horizontal distance;
/// the altitude gap keeps the denominator positive.
inline double channel_gain(const Vec2& uav_pos, const Vec2& bs_pos, const Scenario& sc) {
  const double d2 = (uav_pos - bs_pos).squaredNorm() + sc.delta_h_m * sc.delta_h_m;
  return sc.beta0 / d2;
}

/// Uplink SNR of the UAV's data transmission to the BS.
inline double uplink_snr(const Vec2& uav_pos, const Vec2& bs_pos, const Scenario& sc) {
  return sc.uav_tx_power_w * channel_gain(uav_pos, bs_pos, sc) / sc.noise_power_w;
}

/// Downlink control SNR received by the UAV from the BS.
inline double control_snr(const Vec2& uav_pos, const Vec2& bs_pos, const Scenario& sc) {
  return sc.bs_tx_power_w * channel_gain(uav_pos, bs_pos, sc) / sc.noise_power_w;
}

/// Full-bandwidth achievable rate B * log2(1 + rho0 / (||q - w||^2 + dH^2)),
/// i.e. the rate at bandwidth share 1.
inline double rate_unit_share(const Vec2& uav_pos, const Vec2& bs_pos, const Scenario& sc) {
  return sc.total_bandwidth_hz * std::log2(1.0 + uplink_snr(uav_pos, bs_pos, sc));
}

/// Achievable rate with bandwidth share eta in [0, 1]; linear in eta.
inline double rate(const Vec2& uav_pos, const Vec2& bs_pos, double eta, const Scenario& sc) {
  return eta * rate_unit_share(uav_pos, bs_pos, sc);
}

/// Horizontal coverage radius around a BS inside which the control SNR meets
/// the threshold: d_th = sqrt(P_t^BS beta0 / (sigma0^2 Gamma_th) - dH^2).
inline double control_radius_dth(const Scenario& sc) {
  const double reach2 =
      sc.bs_tx_power_w * sc.beta0 / (sc.noise_power_w * sc.snr_threshold_linear);
  const double dh2 = sc.delta_h_m * sc.delta_h_m;
  if (!(reach2 > dh2)) {
    throw InfeasibleError(
        "control link cannot meet the SNR threshold at any horizontal distance "
        "(required power budget below the altitude-gap floor)");
  }
  return std::sqrt(reach2 - dh2);
}

/// Squared radius of the horizontal ball around the associated BS inside
/// which a UAV with bandwidth share eta achieves at least the rate threshold:
/// rho0 / (2^(R_th / (eta B)) - 1) - dH^2.
/// Returns +inf when the threshold is zero (no restriction) and a negative
/// value when the share is too small to meet the threshold anywhere.
inline double rate_ball_radius_sq(double eta, const Scenario& sc) {
  if (sc.rate_threshold_bps <= 0.0) return std::numeric_limits<double>::infinity();
  if (eta <= 0.0) return -std::numeric_limits<double>::infinity();
  const double exponent = sc.rate_threshold_bps / (eta * sc.total_bandwidth_hz);
  const double denom = std::exp2(exponent) - 1.0;
  if (!std::isfinite(denom) || denom <= 0.0) return -std::numeric_limits<double>::infinity();
  return sc.rho0 / denom - sc.delta_h_m * sc.delta_h_m;
}

}  // namespace isacsim
