#pragma once

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "isacsim/errors.hpp"
#include "isacsim/rng.hpp"
#include "isacsim/types.hpp"

namespace isacsim {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

/// Free-space reference channel gain at 1 m for carrier frequency f_c:
/// (c / (4 pi f_c))^2.
inline double default_beta0(double carrier_freq_hz) {
  if (!(carrier_freq_hz > 0.0)) throw ScenarioError("carrier_freq_hz: must be > 0");
  const double x = kSpeedOfLight / (4.0 * M_PI * carrier_freq_hz);
  return x * x;
}

inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double watt_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

/// Iteration caps and tolerances of the per-interval solver.
struct SolverParams {
  double epsilon = 1e-3;       // relative-decrease stop for AO and the inner descent loops
  double delta_omega = 0.01;   // step-size grid resolution of the line search
  int ao_max_iters = 20;
  int descent_max_iters = 15;  // trajectory / bandwidth descent iterations per AO pass
  int sca_max_iters = 30;
  double kkt_tol = 1e-8;       // stopping residual of the coupled splitting solver
  int admm_max_iters = 20000;
};

/// Full experiment configuration. Loaded once, immutable afterwards; all
/// downstream code consumes linear units. The original dB-valued inputs are
/// kept verbatim so that a save/load round trip is bit-exact.
struct Scenario {
  // geometry
  std::vector<Vec2> bs_positions;        // m, horizontal
  double bs_height_m = 15.0;
  std::vector<Vec2> uav_initial_positions;  // m, horizontal
  double uav_altitude_m = 100.0;
  int max_assoc_per_bs = 3;  // N_a

  // radio
  double total_bandwidth_hz = 20e6;   // B
  double carrier_freq_hz = 28e9;      // f_c
  double uav_tx_power_w = 0.1;        // P_t^u
  double bs_tx_power_w = 1.0;         // P_t^BS
  double noise_power_dbm = -130.0;    // sigma_0^2, as given
  double rcs_dbsm = -10.0;            // sigma_RCS, as given
  double snr_threshold_db = 11.0;     // Gamma_th, as given
  double rate_threshold_bps = 10e6;   // R_th
  std::optional<double> beta0_override;  // reference gain at 1 m; default from f_c

  // motion / sensing
  double v_max_mps = 25.0;
  double safety_distance_m = 30.0;       // D_s
  double process_noise_intensity = 0.5;  // kappa
  double alpha_distance = 3.6e-8;        // alpha_d
  double alpha_velocity = 1.4e-9;        // alpha_v
  std::optional<double> meas_duration_s;  // T^s; defaults to step_s

  // time
  double horizon_s = 60.0;  // T
  double step_s = 1.0;      // dt
  TargetState target_initial_state = TargetState(600.0, 1600.0, 30.0, 0.0);

  // filter
  int ekf_iterations = 8;               // Gauss-Newton refinements of the measurement update
  double belief_init_pos_var = 100.0;   // m^2, initial belief covariance (positions)
  double belief_init_vel_var = 25.0;    // (m/s)^2, initial belief covariance (velocities)

  std::uint64_t seed = 1;
  SolverParams solver;

  // --- derived, cached at load ---
  double noise_power_w = dbm_to_watt(-130.0);
  double rcs_m2 = db_to_linear(-10.0);
  double snr_threshold_linear = db_to_linear(11.0);
  double beta0 = default_beta0(28e9);
  double lambda_m = kSpeedOfLight / 28e9;
  double delta_h_m = 85.0;
  double rho0 = 0.0;          // P_t^u * beta0 / sigma_0^2
  double echo_snr_1m = 0.0;   // lambda^2 P_t^u rcs / ((4 pi)^3 sigma_0^2); echo SNR = this / d^4

  int num_uavs() const { return static_cast<int>(uav_initial_positions.size()); }
  int num_bs() const { return static_cast<int>(bs_positions.size()); }
  int num_steps() const { return static_cast<int>(std::llround(horizon_s / step_s)); }
  double meas_duration() const { return meas_duration_s.value_or(step_s); }

  void finalize() {
    noise_power_w = dbm_to_watt(noise_power_dbm);
    rcs_m2 = db_to_linear(rcs_dbsm);
    snr_threshold_linear = db_to_linear(snr_threshold_db);
    beta0 = beta0_override.value_or(default_beta0(carrier_freq_hz));
    lambda_m = kSpeedOfLight / carrier_freq_hz;
    delta_h_m = uav_altitude_m - bs_height_m;
    rho0 = uav_tx_power_w * beta0 / noise_power_w;
    const double four_pi_cubed = std::pow(4.0 * M_PI, 3);
    echo_snr_1m = lambda_m * lambda_m * uav_tx_power_w * rcs_m2 / (four_pi_cubed * noise_power_w);
  }

  void validate() const {
    auto require = [](bool ok, const std::string& msg) {
      if (!ok) throw ScenarioError(msg);
    };
    require(num_uavs() >= 1, "uav_initial_positions_m: need at least 1 UAV");
    require(num_bs() >= 1, "bs_positions_m: need at least 1 BS");
    require(max_assoc_per_bs >= 1, "max_assoc_per_bs: must be >= 1");
    require(static_cast<long long>(max_assoc_per_bs) * num_bs() >= num_uavs(),
            "max_assoc_per_bs: N_a * K >= M required, association otherwise infeasible");
    require(total_bandwidth_hz > 0.0, "total_bandwidth_hz: must be > 0");
    require(carrier_freq_hz > 0.0, "carrier_freq_hz: must be > 0");
    require(uav_tx_power_w > 0.0, "uav_tx_power_w: must be > 0");
    require(bs_tx_power_w > 0.0, "bs_tx_power_w: must be > 0");
    require(noise_power_w > 0.0, "noise_power_dbm: implied linear power must be > 0");
    require(rcs_m2 > 0.0, "rcs_dbsm: implied linear RCS must be > 0");
    require(rate_threshold_bps >= 0.0, "rate_threshold_bps: must be >= 0");
    require(v_max_mps > 0.0, "v_max_mps: must be > 0");
    require(safety_distance_m > 0.0, "safety_distance_m: must be > 0");
    require(process_noise_intensity >= 0.0, "process_noise_intensity: must be >= 0");
    require(alpha_distance > 0.0, "alpha_distance: must be > 0");
    require(alpha_velocity > 0.0, "alpha_velocity: must be > 0");
    require(step_s > 0.0, "step_s: must be > 0");
    require(horizon_s > 0.0, "horizon_s: must be > 0");
    const double steps = horizon_s / step_s;
    require(std::abs(steps - std::llround(steps)) < 1e-9,
            "horizon_s: must be an integer multiple of step_s");
    require(uav_altitude_m > bs_height_m, "uav_altitude_m: must exceed bs_height_m");
    require(meas_duration() > 0.0, "meas_duration_s: must be > 0");
    require(ekf_iterations >= 1, "ekf_iterations: must be >= 1");
    require(all_finite(target_initial_state), "target_initial_state: components must be finite");
    for (int i = 0; i < num_uavs(); ++i) {
      for (int j = i + 1; j < num_uavs(); ++j) {
        const double d = (uav_initial_positions[i] - uav_initial_positions[j]).norm();
        if (d < safety_distance_m) {
          std::ostringstream os;
          os << "uav_initial_positions_m: UAVs " << i << " and " << j << " are " << d
             << " m apart, below safety_distance_m = " << safety_distance_m;
          throw ScenarioError(os.str());
        }
      }
    }
  }
};

namespace detail {

inline double get_num(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ScenarioError(std::string(key) + ": missing required field");
  if (!j[key].is_number()) throw ScenarioError(std::string(key) + ": expected a number");
  return j[key].get<double>();
}

inline std::vector<Vec2> get_points(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array())
    throw ScenarioError(std::string(key) + ": expected an array of [x, y] pairs");
  std::vector<Vec2> out;
  for (const auto& p : j[key]) {
    if (!p.is_array() || p.size() != 2)
      throw ScenarioError(std::string(key) + ": each entry must be an [x, y] pair");
    out.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  return out;
}

}  // namespace detail

inline Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  s.bs_positions = detail::get_points(j, "bs_positions_m");
  s.uav_initial_positions = detail::get_points(j, "uav_initial_positions_m");
  s.bs_height_m = detail::get_num(j, "bs_height_m");
  s.uav_altitude_m = detail::get_num(j, "uav_altitude_m");
  s.max_assoc_per_bs = static_cast<int>(detail::get_num(j, "max_assoc_per_bs"));
  s.total_bandwidth_hz = detail::get_num(j, "total_bandwidth_hz");
  s.carrier_freq_hz = detail::get_num(j, "carrier_freq_hz");
  s.uav_tx_power_w = detail::get_num(j, "uav_tx_power_w");
  s.bs_tx_power_w = detail::get_num(j, "bs_tx_power_w");
  s.noise_power_dbm = detail::get_num(j, "noise_power_dbm");
  s.rcs_dbsm = detail::get_num(j, "rcs_dbsm");
  s.snr_threshold_db = detail::get_num(j, "snr_threshold_db");
  s.rate_threshold_bps = detail::get_num(j, "rate_threshold_bps");
  s.v_max_mps = detail::get_num(j, "v_max_mps");
  s.safety_distance_m = detail::get_num(j, "safety_distance_m");
  s.process_noise_intensity = detail::get_num(j, "process_noise_intensity");
  s.alpha_distance = detail::get_num(j, "alpha_distance");
  s.alpha_velocity = detail::get_num(j, "alpha_velocity");
  s.horizon_s = detail::get_num(j, "horizon_s");
  s.step_s = detail::get_num(j, "step_s");
  if (j.contains("ref_channel_gain")) s.beta0_override = j["ref_channel_gain"].get<double>();
  if (j.contains("meas_duration_s")) s.meas_duration_s = j["meas_duration_s"].get<double>();
  if (j.contains("ekf_iterations")) s.ekf_iterations = j["ekf_iterations"].get<int>();
  if (j.contains("belief_init_pos_var_m2"))
    s.belief_init_pos_var = j["belief_init_pos_var_m2"].get<double>();
  if (j.contains("belief_init_vel_var_m2s2"))
    s.belief_init_vel_var = j["belief_init_vel_var_m2s2"].get<double>();
  {
    const auto& t = j.at("target_initial_state");
    if (!t.is_array() || t.size() != 4)
      throw ScenarioError("target_initial_state: expected [x, y, vx, vy]");
    for (int i = 0; i < 4; ++i) s.target_initial_state[i] = t[i].get<double>();
  }
  if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("solver")) {
    const auto& o = j["solver"];
    if (o.contains("epsilon")) s.solver.epsilon = o["epsilon"].get<double>();
    if (o.contains("delta_omega")) s.solver.delta_omega = o["delta_omega"].get<double>();
    if (o.contains("ao_max_iters")) s.solver.ao_max_iters = o["ao_max_iters"].get<int>();
    if (o.contains("descent_max_iters")) s.solver.descent_max_iters = o["descent_max_iters"].get<int>();
    if (o.contains("sca_max_iters")) s.solver.sca_max_iters = o["sca_max_iters"].get<int>();
    if (o.contains("kkt_tol")) s.solver.kkt_tol = o["kkt_tol"].get<double>();
    if (o.contains("admm_max_iters")) s.solver.admm_max_iters = o["admm_max_iters"].get<int>();
  }
  // ISACSIM_SEED overrides the file's seed; nothing else is read from the
  // environment.
  if (const char* env = std::getenv("ISACSIM_SEED")) {
    s.seed = std::strtoull(env, nullptr, 10);
  }
  s.finalize();
  s.validate();
  return s;
}

inline nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json j;
  j["schema_version"] = 1;
  auto points = [](const std::vector<Vec2>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& p : v) a.push_back({p.x(), p.y()});
    return a;
  };
  j["bs_positions_m"] = points(s.bs_positions);
  j["uav_initial_positions_m"] = points(s.uav_initial_positions);
  j["bs_height_m"] = s.bs_height_m;
  j["uav_altitude_m"] = s.uav_altitude_m;
  j["max_assoc_per_bs"] = s.max_assoc_per_bs;
  j["total_bandwidth_hz"] = s.total_bandwidth_hz;
  j["carrier_freq_hz"] = s.carrier_freq_hz;
  j["uav_tx_power_w"] = s.uav_tx_power_w;
  j["bs_tx_power_w"] = s.bs_tx_power_w;
  j["noise_power_dbm"] = s.noise_power_dbm;
  j["rcs_dbsm"] = s.rcs_dbsm;
  j["snr_threshold_db"] = s.snr_threshold_db;
  j["rate_threshold_bps"] = s.rate_threshold_bps;
  if (s.beta0_override) j["ref_channel_gain"] = *s.beta0_override;
  j["v_max_mps"] = s.v_max_mps;
  j["safety_distance_m"] = s.safety_distance_m;
  j["process_noise_intensity"] = s.process_noise_intensity;
  j["alpha_distance"] = s.alpha_distance;
  j["alpha_velocity"] = s.alpha_velocity;
  if (s.meas_duration_s) j["meas_duration_s"] = *s.meas_duration_s;
  j["horizon_s"] = s.horizon_s;
  j["step_s"] = s.step_s;
  j["target_initial_state"] = {s.target_initial_state[0], s.target_initial_state[1],
                               s.target_initial_state[2], s.target_initial_state[3]};
  j["ekf_iterations"] = s.ekf_iterations;
  j["belief_init_pos_var_m2"] = s.belief_init_pos_var;
  j["belief_init_vel_var_m2s2"] = s.belief_init_vel_var;
  j["seed"] = s.seed;
  j["solver"] = {{"epsilon", s.solver.epsilon},
                 {"delta_omega", s.solver.delta_omega},
                 {"ao_max_iters", s.solver.ao_max_iters},
                 {"descent_max_iters", s.solver.descent_max_iters},
                 {"sca_max_iters", s.solver.sca_max_iters},
                 {"kkt_tol", s.solver.kkt_tol},
                 {"admm_max_iters", s.solver.admm_max_iters}};
  return j;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError("scenario parse error in " + path + ": " + e.what());
  }
  try {
    return scenario_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError("scenario field error in " + path + ": " + e.what());
  }
}

inline void save_scenario(const Scenario& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ScenarioError("cannot write scenario file: " + path);
  out << scenario_to_json(s).dump(2) << "\n";
}

/// The configuration shipped with the repo: a 3 km x 3 km region, five fixed
/// base stations, three UAVs, and a target crossing the region at 30 m/s.
inline Scenario make_baseline_scenario() {
  Scenario s;
  s.bs_positions = {Vec2(500.0, 500.0), Vec2(2500.0, 500.0), Vec2(1500.0, 1500.0),
                    Vec2(500.0, 2500.0), Vec2(2500.0, 2500.0)};
  s.uav_initial_positions = {Vec2(1500.0, 2300.0), Vec2(807.0, 1100.0), Vec2(2193.0, 1100.0)};
  s.finalize();
  s.validate();
  return s;
}

/// Seeded uniform BS placement over a rectangular region, with a minimum
/// pairwise spacing so layouts stay usable.
inline std::vector<Vec2> random_bs_layout(int count, double width_m, double height_m,
                                          RngStream& rng, double min_spacing_m = 200.0) {
  std::vector<Vec2> out;
  int attempts = 0;
  while (static_cast<int>(out.size()) < count && attempts < 10000) {
    ++attempts;
    Vec2 p(rng.uniform01() * width_m, rng.uniform01() * height_m);
    bool ok = true;
    for (const auto& q : out) {
      if ((p - q).norm() < min_spacing_m) {
        ok = false;
        break;
      }
    }
    if (ok) out.push_back(p);
  }
  if (static_cast<int>(out.size()) < count)
    throw ScenarioError("random_bs_layout: could not place BSs with requested spacing");
  return out;
}

}  // namespace isacsim
