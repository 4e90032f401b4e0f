#pragma once

// Brute-force reference computations kept deliberately independent of the
// library's solver paths: grid searches, exhaustive enumeration, and finite
// differences. Used by the test suites and exposed through the CLI so the
// checks can be rerun against any build.

#include <algorithm>
#include <quadmath.h>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "isacsim/optimizer.hpp"
#include "isacsim/rng.hpp"
#include "isacsim/simulator.hpp"

namespace isacsim {

struct OracleReport {
  std::string name;
  bool pass = false;
  int trials = 0;
  int matches = 0;
  double max_gap = 0.0;
  std::string detail;
};

namespace oracles {

/// Max-min rate over the share simplex by grid search at the given
/// resolution. Independent transcription of the rate formula.
inline double grid_max_min_rate(const std::vector<double>& unit_rates, double resolution) {
  const int m = static_cast<int>(unit_rates.size());
  const int steps = static_cast<int>(std::lround(1.0 / resolution));
  double best = -1.0;
  if (m == 1) return unit_rates[0];
  if (m == 2) {
    for (int i = 0; i <= steps; ++i) {
      const double e1 = i * resolution;
      const double v = std::min(e1 * unit_rates[0], (1.0 - e1) * unit_rates[1]);
      best = std::max(best, v);
    }
    return best;
  }
  if (m == 3) {
    for (int i = 0; i <= steps; ++i) {
      for (int j = 0; j <= steps - i; ++j) {
        const double e1 = i * resolution;
        const double e2 = j * resolution;
        const double e3 = 1.0 - e1 - e2;
        const double v =
            std::min({e1 * unit_rates[0], e2 * unit_rates[1], e3 * unit_rates[2]});
        best = std::max(best, v);
      }
    }
    return best;
  }
  throw std::invalid_argument("grid_max_min_rate supports up to 3 UAVs");
}

/// Minimum association cost over all capacity-feasible assignments, by
/// exhaustive enumeration (one BS per UAV).
inline double enumerate_association_cost(const MatX& cost, int cap) {
  const int m = static_cast<int>(cost.rows());
  const int k = static_cast<int>(cost.cols());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> pick(m, 0);
  for (;;) {
    std::vector<int> load(k, 0);
    bool ok = true;
    double c = 0.0;
    for (int i = 0; i < m; ++i) {
      if (++load[pick[i]] > cap) {
        ok = false;
        break;
      }
      c += cost(i, pick[i]);
    }
    if (ok) best = std::min(best, c);
    int idx = m - 1;
    while (idx >= 0 && ++pick[idx] == k) pick[idx--] = 0;
    if (idx < 0) break;
  }
  return best;
}

/// Quad-precision transcription of the predicted-PCRB objective: assemble
/// J_prior + J_M directly and invert by Gauss-Jordan. At 113-bit precision
/// the direct route is robust despite the extreme information scales, which
/// makes it a usable finite-difference reference: the objective's response
/// to a share perturbation sits ~17 decimal digits below the trace itself
/// and is invisible to any double-precision difference.
inline __float128 pcrb_trace_quad(const Mat4& prior, const TargetState& x_pred,
                                  const SwarmPositions& q, const VecX& eta, const Scenario& sc) {
  __float128 j[4][4];
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) j[r][c] = prior(r, c);

  const __float128 snr1m = sc.echo_snr_1m;
  const __float128 band = sc.total_bandwidth_hz;
  const __float128 ts = sc.meas_duration();
  for (size_t m = 0; m < q.size(); ++m) {
    const __float128 px = __float128(x_pred[0]) - __float128(q[m].x());
    const __float128 py = __float128(x_pred[1]) - __float128(q[m].y());
    const __float128 d2 = px * px + py * py;
    const __float128 d = sqrtq(d2);
    const __float128 ux = px / d, uy = py / d;
    const __float128 v = (px * __float128(x_pred[2]) + py * __float128(x_pred[3])) / d;
    const __float128 wx = (__float128(x_pred[2]) - v * ux) / d;
    const __float128 wy = (__float128(x_pred[3]) - v * uy) / d;
    const __float128 snr = snr1m / (d2 * d2);
    const __float128 eb = __float128(eta[m]) * band;
    const __float128 c_d = snr * eb * eb / __float128(sc.alpha_distance);
    const __float128 c_v = snr * ts * ts / __float128(sc.alpha_velocity);
    const __float128 gd[4] = {ux, uy, 0, 0};
    const __float128 gv[4] = {wx, wy, ux, uy};
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) j[r][c] += c_d * gd[r] * gd[c] + c_v * gv[r] * gv[c];
  }

  // Gauss-Jordan inversion with partial pivoting.
  __float128 inv[4][4] = {};
  for (int i = 0; i < 4; ++i) inv[i][i] = 1;
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r)
      if (fabsq(j[r][col]) > fabsq(j[piv][col])) piv = r;
    for (int c = 0; c < 4; ++c) {
      std::swap(j[piv][c], j[col][c]);
      std::swap(inv[piv][c], inv[col][c]);
    }
    const __float128 p = j[col][col];
    for (int c = 0; c < 4; ++c) {
      j[col][c] /= p;
      inv[col][c] /= p;
    }
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      const __float128 factor = j[r][col];
      for (int c = 0; c < 4; ++c) {
        j[r][c] -= factor * j[col][c];
        inv[r][c] -= factor * inv[col][c];
      }
    }
  }
  return inv[0][0] + inv[1][1] + inv[2][2] + inv[3][3];
}

/// Central finite difference of the predicted-PCRB objective in one
/// coordinate of one UAV position.
inline double fd_position_gradient(const Mat4& prior, const TargetState& x_pred,
                                   SwarmPositions q, const VecX& eta, const Scenario& sc, int uav,
                                   int axis) {
  const double d = (position_of(x_pred) - q[uav]).norm();
  const double h = 1e-5 * std::max(1.0, d);
  q[uav][axis] += h;
  const __float128 fp = pcrb_trace_quad(prior, x_pred, q, eta, sc);
  q[uav][axis] -= 2.0 * h;
  const __float128 fm = pcrb_trace_quad(prior, x_pred, q, eta, sc);
  return static_cast<double>((fp - fm) / (__float128(2.0) * __float128(h)));
}

inline double fd_eta_gradient(const Mat4& prior, const TargetState& x_pred,
                              const SwarmPositions& q, VecX eta, const Scenario& sc, int uav) {
  const double h = 1e-5 * eta[uav];
  eta[uav] += h;
  const __float128 fp = pcrb_trace_quad(prior, x_pred, q, eta, sc);
  eta[uav] -= 2.0 * h;
  const __float128 fm = pcrb_trace_quad(prior, x_pred, q, eta, sc);
  return static_cast<double>((fp - fm) / (__float128(2.0) * __float128(h)));
}

/// Random SPD prior with log-uniform spectrum and a random rotation.
inline Mat4 random_prior(RngStream& rng, double log10_min = -4.0, double log10_max = 2.0) {
  MatX g(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) g(i, j) = rng.gaussian();
  const Eigen::HouseholderQR<MatX> qr(g);
  const Mat4 qmat = qr.householderQ() * MatX::Identity(4, 4);
  Vec4 eig;
  for (int i = 0; i < 4; ++i)
    eig[i] = std::pow(10.0, log10_min + (log10_max - log10_min) * rng.uniform01());
  return qmat * eig.asDiagonal() * qmat.transpose();
}

struct PcrbInstance {
  Mat4 prior;
  TargetState x_pred;
  SwarmPositions q;
  VecX eta;
};

/// Random geometry with UAV ranges in [dmin, dmax] and shares inside
/// [share_min, share_max].
inline PcrbInstance random_pcrb_instance(RngStream& rng, int m, double dmin, double dmax,
                                         double share_min = 0.05, double share_max = 0.9) {
  PcrbInstance inst;
  inst.prior = random_prior(rng);
  inst.x_pred << 1500.0 + 200.0 * rng.gaussian(), 1500.0 + 200.0 * rng.gaussian(),
      30.0 * (2.0 * rng.uniform01() - 1.0), 30.0 * (2.0 * rng.uniform01() - 1.0);
  for (int i = 0; i < m; ++i) {
    const double d = dmin + (dmax - dmin) * rng.uniform01();
    const double az = 2.0 * M_PI * rng.uniform01();
    inst.q.push_back(position_of(inst.x_pred) + d * Vec2(std::cos(az), std::sin(az)));
  }
  inst.eta.resize(m);
  if (m == 1) {
    inst.eta[0] = 1.0;
    return inst;
  }
  for (;;) {
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
      inst.eta[i] = -std::log(1.0 - rng.uniform01());
      total += inst.eta[i];
    }
    inst.eta /= total;
    bool ok = true;
    for (int i = 0; i < m; ++i)
      if (inst.eta[i] < share_min || inst.eta[i] > share_max) ok = false;
    if (ok) break;
  }
  return inst;
}

}  // namespace oracles

/// Closed-form equal-rate split vs. simplex grid search, plus the equal-rate
/// property itself.
inline OracleReport oracle_maxmin_bandwidth(std::uint64_t seed, int trials) {
  OracleReport rep;
  rep.name = "maxmin-bandwidth";
  rep.trials = trials;
  const Scenario sc = make_baseline_scenario();
  RngStream rng(seed, "oracle_lemma1");
  const double resolution = 1e-3;
  for (int t = 0; t < trials; ++t) {
    const int m = (t % 2 == 0) ? 2 : 3;
    SwarmPositions q;
    Association assoc;
    std::vector<double> unit_rates;
    for (int i = 0; i < m; ++i) {
      q.push_back(Vec2(3000.0 * rng.uniform01(), 3000.0 * rng.uniform01()));
      assoc.bs_of_uav.push_back(static_cast<int>(rng.uniform01() * sc.num_bs()) % sc.num_bs());
      unit_rates.push_back(rate_unit_share(q.back(), sc.bs_positions[assoc.bs_of_uav.back()], sc));
    }
    const auto [eta, rc] = comm_optimal_bandwidth(q, assoc, sc);
    const double grid_rc = oracles::grid_max_min_rate(unit_rates, resolution);

    // The grid undershoots by at most one resolution step of the largest
    // per-UAV rate.
    const double tol = resolution * *std::max_element(unit_rates.begin(), unit_rates.end());
    const double gap = std::abs(rc - grid_rc);
    rep.max_gap = std::max(rep.max_gap, gap / rc);
    bool ok = rc >= grid_rc - 1e-9 * rc && gap <= tol;
    for (int i = 0; i < m; ++i) {
      const double ri = eta[i] * unit_rates[i];
      if (std::abs(ri - rc) / rc >= 1e-9) ok = false;
    }
    if (ok) ++rep.matches;
  }
  rep.pass = rep.matches == trials;
  std::ostringstream os;
  os << rep.matches << "/" << trials << " closed-form splits matched the grid (max rel gap "
     << rep.max_gap << ")";
  rep.detail = os.str();
  return rep;
}

/// Exact assignment vs. exhaustive enumeration, and the relax-and-round
/// variant with logged gaps.
inline OracleReport oracle_association(std::uint64_t seed, int trials) {
  OracleReport rep;
  rep.name = "association";
  rep.trials = trials;
  RngStream rng(seed, "oracle_association");
  int exact_matches = 0, rounded_matches = 0;
  double worst_round_gap = 0.0;
  for (int t = 0; t < trials; ++t) {
    Scenario sc = make_baseline_scenario();
    const int m = 2 + static_cast<int>(rng.uniform01() * 3);  // 2..4
    const int k = 2 + static_cast<int>(rng.uniform01() * 4);  // 2..5
    const int na_choices[3] = {1, 2, 3};
    int na = na_choices[t % 3];
    while (na * k < m) ++na;
    sc.bs_positions.clear();
    for (int j = 0; j < k; ++j)
      sc.bs_positions.push_back(Vec2(3000.0 * rng.uniform01(), 3000.0 * rng.uniform01()));
    sc.max_assoc_per_bs = na;
    sc.uav_initial_positions.clear();
    SwarmPositions q;
    for (int i = 0; i < m; ++i)
      q.push_back(Vec2(3000.0 * rng.uniform01(), 3000.0 * rng.uniform01()));
    sc.uav_initial_positions = q;
    sc.finalize();

    const MatX cost = detail::association_costs(q, sc);
    const double best = oracles::enumerate_association_cost(cost, na);

    const Association exact = solve_association(q, sc);
    double exact_cost = 0.0;
    for (int i = 0; i < m; ++i) exact_cost += cost(i, exact.bs_of_uav[i]);
    if (std::abs(exact_cost - best) <= 1e-12 * std::abs(best) &&
        exact.respects_capacity(k, na))
      ++exact_matches;

    const Association rounded = relax_and_round_association(q, sc);
    double rounded_cost = 0.0;
    for (int i = 0; i < m; ++i) rounded_cost += cost(i, rounded.bs_of_uav[i]);
    const bool capacity_ok = rounded.respects_capacity(k, na);
    const double gap = (rounded_cost - best) / best;
    if (capacity_ok && gap <= 1e-12) {
      ++rounded_matches;
    } else {
      worst_round_gap = std::max(worst_round_gap, capacity_ok ? gap : 1.0);
    }
  }
  rep.matches = exact_matches;
  rep.max_gap = worst_round_gap;
  rep.pass = exact_matches == trials && rounded_matches >= (trials * 95) / 100;
  std::ostringstream os;
  os << "exact " << exact_matches << "/" << trials << ", relax-and-round " << rounded_matches
     << "/" << trials << " (worst rounding gap " << worst_round_gap << ")";
  rep.detail = os.str();
  return rep;
}

/// Analytic gradients vs. central finite differences over random geometries.
inline OracleReport oracle_gradients(std::uint64_t seed, int trials, double tol = 1e-4) {
  OracleReport rep;
  rep.name = "gradients";
  rep.trials = trials;
  const Scenario sc = make_baseline_scenario();
  RngStream rng(seed, "oracle_gradients");
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const int m = 2 + t % 2;  // 2..3
    const auto inst = oracles::random_pcrb_instance(rng, m, 50.0, 2000.0);
    const PcrbGradients g = pcrb_gradients(inst.prior, inst.x_pred, inst.q, inst.eta, sc);
    bool ok = true;
    for (int i = 0; i < m; ++i) {
      for (int a = 0; a < 2; ++a) {
        const double fd =
            oracles::fd_position_gradient(inst.prior, inst.x_pred, inst.q, inst.eta, sc, i, a);
        const double rel = std::abs(g.d_positions(i, a) - fd) /
                           std::max(std::abs(fd), 1e-30);
        worst = std::max(worst, rel);
        if (rel >= tol) ok = false;
      }
      const double fd_eta =
          oracles::fd_eta_gradient(inst.prior, inst.x_pred, inst.q, inst.eta, sc, i);
      const double rel = std::abs(g.d_eta[i] - fd_eta) / std::max(std::abs(fd_eta), 1e-30);
      worst = std::max(worst, rel);
      if (rel >= tol) ok = false;
    }
    if (ok) ++rep.matches;
  }
  rep.max_gap = worst;
  rep.pass = rep.matches == trials;
  std::ostringstream os;
  os << rep.matches << "/" << trials << " instances under rel tol " << tol << " (worst " << worst
     << ")";
  rep.detail = os.str();
  return rep;
}

/// Single-UAV per-interval solve vs. a 5 m exhaustive grid over the feasible
/// step disk.
inline OracleReport oracle_single_uav_grid(std::uint64_t seed, int trials, double rel_tol = 0.02) {
  OracleReport rep;
  rep.name = "single-uav-grid";
  rep.trials = trials;
  RngStream rng(seed, "oracle_ao_grid");
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    Scenario sc = make_baseline_scenario();
    const Vec2 q_prev(1000.0 + 1000.0 * rng.uniform01(), 1000.0 + 1000.0 * rng.uniform01());
    sc.uav_initial_positions = {q_prev};
    sc.finalize();
    const double d = 60.0 + 540.0 * rng.uniform01();
    const double az = 2.0 * M_PI * rng.uniform01();
    TargetState x_pred;
    x_pred << q_prev.x() + d * std::cos(az), q_prev.y() + d * std::sin(az),
        30.0 * (2.0 * rng.uniform01() - 1.0), 30.0 * (2.0 * rng.uniform01() - 1.0);
    const Mat4 prior = oracles::random_prior(rng, -4.0, 0.0);
    VecX eta(1);
    eta << 1.0;

    const SwarmDecision dec =
        alternating_optimize(prior, x_pred, {q_prev}, eta, sc, AoOptions{});

    // Exhaustive 5 m grid over the step disk, filtered by the exact
    // constraints.
    const double step = sc.v_max_mps * sc.step_s;
    const double d_th = control_radius_dth(sc);
    double grid_best = std::numeric_limits<double>::infinity();
    for (double dx = -step; dx <= step + 1e-9; dx += 5.0) {
      for (double dy = -step; dy <= step + 1e-9; dy += 5.0) {
        const Vec2 p = q_prev + Vec2(dx, dy);
        if (Vec2(dx, dy).norm() > step) continue;
        if ((p - position_of(x_pred)).norm() < sc.safety_distance_m) continue;
        if (rate(p, sc.bs_positions[dec.association.bs_of_uav[0]], 1.0, sc) <
            sc.rate_threshold_bps)
          continue;
        double nearest = std::numeric_limits<double>::infinity();
        for (const auto& w : sc.bs_positions) nearest = std::min(nearest, (p - w).norm());
        if (nearest > d_th) continue;
        grid_best = std::min(grid_best, pcrb_trace(prior, x_pred, {p}, eta, sc));
      }
    }
    const double rel = (dec.objective - grid_best) / grid_best;
    worst = std::max(worst, rel);
    if (rel <= rel_tol) ++rep.matches;
  }
  rep.max_gap = worst;
  rep.pass = rep.matches == trials;
  std::ostringstream os;
  os << rep.matches << "/" << trials << " solves within " << rel_tol * 100.0
     << "% of the 5 m grid optimum (worst " << worst << ")";
  rep.detail = os.str();
  return rep;
}

}  // namespace isacsim
