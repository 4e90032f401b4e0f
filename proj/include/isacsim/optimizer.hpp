#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "isacsim/comm_model.hpp"
#include "isacsim/convex_step.hpp"
#include "isacsim/estimation.hpp"
#include "isacsim/scenario.hpp"

namespace isacsim {

/// UAV-to-BS association. Every UAV is matched to exactly one BS (an
/// unassociated UAV has zero rate and can never meet the rate threshold);
/// each BS serves at most max_assoc_per_bs UAVs.
struct Association {
  std::vector<int> bs_of_uav;

  int num_uavs() const { return static_cast<int>(bs_of_uav.size()); }

  MatX to_matrix(int num_bs) const {
    MatX a = MatX::Zero(num_uavs(), num_bs);
    for (int m = 0; m < num_uavs(); ++m) a(m, bs_of_uav[m]) = 1.0;
    return a;
  }

  bool respects_capacity(int num_bs, int cap) const {
    std::vector<int> load(num_bs, 0);
    for (int k : bs_of_uav) {
      if (k < 0 || k >= num_bs) return false;
      if (++load[k] > cap) return false;
    }
    return true;
  }
};

/// Equal-rate bandwidth split: eta_m proportional to 1/R~_m, which maximizes
/// the minimum per-UAV rate for fixed positions and association. Returns the
/// shares and the common rate 1 / sum_m (1 / R~_m).
inline std::pair<VecX, double> comm_optimal_bandwidth(const SwarmPositions& q,
                                                      const Association& assoc,
                                                      const Scenario& sc) {
  const int m = static_cast<int>(q.size());
  VecX inv_rates(m);
  for (int i = 0; i < m; ++i)
    inv_rates[i] = 1.0 / rate_unit_share(q[i], sc.bs_positions[assoc.bs_of_uav[i]], sc);
  const double total = inv_rates.sum();
  return {inv_rates / total, 1.0 / total};
}

namespace detail {

/// Min-cost bipartite assignment with BS capacities, by successive shortest
/// augmenting paths (Bellman-Ford on the residual graph; the instances are a
/// handful of nodes).
inline std::optional<std::vector<int>> min_cost_assignment(const MatX& cost, int cap) {
  const int m = static_cast<int>(cost.rows());
  const int k = static_cast<int>(cost.cols());
  const int source = 0, sink = m + k + 1, nodes = m + k + 2;

  struct Edge {
    int to, cap;
    double cost;
    int flow = 0;
  };
  std::vector<Edge> edges;
  std::vector<std::vector<int>> adj(nodes);
  auto add_edge = [&](int a, int b, int c, double w) {
    adj[a].push_back(static_cast<int>(edges.size()));
    edges.push_back({b, c, w});
    adj[b].push_back(static_cast<int>(edges.size()));
    edges.push_back({a, 0, -w});
  };
  for (int i = 0; i < m; ++i) add_edge(source, 1 + i, 1, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < k; ++j) add_edge(1 + i, 1 + m + j, 1, cost(i, j));
  for (int j = 0; j < k; ++j) add_edge(1 + m + j, sink, cap, 0.0);

  for (int unit = 0; unit < m; ++unit) {
    std::vector<double> dist(nodes, std::numeric_limits<double>::infinity());
    std::vector<int> via(nodes, -1);
    dist[source] = 0.0;
    for (int pass = 0; pass < nodes; ++pass) {
      bool changed = false;
      for (int u = 0; u < nodes; ++u) {
        if (!std::isfinite(dist[u])) continue;
        for (int ei : adj[u]) {
          const Edge& e = edges[ei];
          if (e.flow >= e.cap) continue;
          if (dist[u] + e.cost < dist[e.to] - 1e-15) {
            dist[e.to] = dist[u] + e.cost;
            via[e.to] = ei;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    if (!std::isfinite(dist[sink])) return std::nullopt;
    for (int v = sink; v != source;) {
      Edge& e = edges[via[v]];
      e.flow += 1;
      edges[via[v] ^ 1].flow -= 1;
      v = edges[via[v] ^ 1].to;
    }
  }

  std::vector<int> out(m, -1);
  for (int i = 0; i < m; ++i) {
    for (int ei : adj[1 + i]) {
      const Edge& e = edges[ei];
      if (e.to >= 1 + m && e.to < 1 + m + k && e.flow > 0) out[i] = e.to - 1 - m;
    }
  }
  return out;
}

inline MatX association_costs(const SwarmPositions& q_prev, const Scenario& sc) {
  const int m = static_cast<int>(q_prev.size());
  const int k = sc.num_bs();
  MatX b(m, k);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < k; ++j) b(i, j) = 1.0 / rate_unit_share(q_prev[i], sc.bs_positions[j], sc);
  return b;
}

}  // namespace detail

/// Communication-optimal association from the previous interval's positions:
/// minimize sum_m 1/R~_{m,k(m)} subject to the BS capacities. Solved exactly
/// as a capacitated min-cost assignment (the relaxed program's constraint
/// matrix is totally unimodular, so this is also the LP optimum).
inline Association solve_association(const SwarmPositions& q_prev, const Scenario& sc) {
  const int m = static_cast<int>(q_prev.size());
  if (static_cast<long long>(sc.max_assoc_per_bs) * sc.num_bs() < m)
    throw InfeasibleError("solve_association: N_a * K < M, no feasible association");
  const auto assignment =
      detail::min_cost_assignment(detail::association_costs(q_prev, sc), sc.max_assoc_per_bs);
  if (!assignment) throw InfeasibleError("solve_association: augmenting path search failed");
  return Association{*assignment};
}

/// Relax-and-round variant: take an optimal solution of the LP relaxation
/// (computed by the same exact assignment routine, which yields an optimal
/// basic solution of the relaxation) and set the largest entry of each row
/// to one. No capacity repair is applied, mirroring the plain rounding rule;
/// the comparison oracle logs any cost gap or capacity violation.
inline Association relax_and_round_association(const SwarmPositions& q_prev, const Scenario& sc) {
  const int m = static_cast<int>(q_prev.size());
  if (static_cast<long long>(sc.max_assoc_per_bs) * sc.num_bs() < m)
    throw InfeasibleError("relax_and_round_association: N_a * K < M");
  const auto assignment =
      detail::min_cost_assignment(detail::association_costs(q_prev, sc), sc.max_assoc_per_bs);
  if (!assignment) throw InfeasibleError("relax_and_round_association: no relaxed solution");
  MatX relaxed = Association{*assignment}.to_matrix(sc.num_bs());
  Association out;
  out.bs_of_uav.resize(m);
  for (int i = 0; i < m; ++i) {
    int best = 0;
    for (int j = 1; j < sc.num_bs(); ++j)
      if (relaxed(i, j) > relaxed(i, best)) best = j;
    out.bs_of_uav[i] = best;
  }
  return out;
}

/// Fly straight toward the associated BS at full speed, stopping on top of
/// it when reachable.
inline SwarmPositions comm_optimal_positions(const SwarmPositions& q_prev,
                                             const Association& assoc, const Scenario& sc) {
  const double step = sc.v_max_mps * sc.step_s;
  SwarmPositions out = q_prev;
  for (size_t m = 0; m < q_prev.size(); ++m) {
    const Vec2 w = sc.bs_positions[assoc.bs_of_uav[m]];
    const Vec2 d = w - q_prev[m];
    const double dist = d.norm();
    out[m] = (dist <= step) ? w : Vec2(q_prev[m] + step / dist * d);
  }
  return out;
}

struct FeasibilityReport {
  bool feasible = false;
  double max_min_rate = 0.0;  // R_c* at the communication-optimal point
  Association association;
  SwarmPositions comm_positions;
  VecX comm_eta;
};

/// Feasibility of the per-interval problem: the rate threshold is attainable
/// iff the communication-optimal solution (association, full-speed approach,
/// equal-rate split) reaches it.
inline FeasibilityReport check_feasibility(const SwarmPositions& q_prev, const Scenario& sc) {
  FeasibilityReport rep;
  rep.association = solve_association(q_prev, sc);
  rep.comm_positions = comm_optimal_positions(q_prev, rep.association, sc);
  auto [eta, rc] = comm_optimal_bandwidth(rep.comm_positions, rep.association, sc);
  rep.comm_eta = std::move(eta);
  rep.max_min_rate = rc;
  rep.feasible = rc >= sc.rate_threshold_bps;
  return rep;
}

// ---------------------------------------------------------------------------
// Constraint validators (exact, not surrogate)
// ---------------------------------------------------------------------------

struct ConstraintViolation {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
};

/// Checks a decision against the exact per-interval constraints at relative
/// tolerance rel_tol: rate floor, control-link coverage, bandwidth simplex,
/// association capacity, displacement limit, pairwise separation, and target
/// standoff. `positions_are_decisions` scopes the target-standoff check:
/// a bandwidth-only strategy does not choose positions, so the standoff to a
/// wandering target is a property of the environment rather than of its
/// decision.
inline std::vector<ConstraintViolation> validate_decision(
    const SwarmPositions& q, const VecX& eta, const Association& assoc,
    const SwarmPositions& q_prev, const Vec2& predicted_target, const Scenario& sc,
    double rel_tol = 1e-6, bool positions_are_decisions = true) {
  std::vector<ConstraintViolation> out;
  const int m = static_cast<int>(q.size());
  auto add = [&](const std::string& name, double value, double bound) {
    out.push_back({name, value, bound});
  };

  const double d_th = control_radius_dth(sc);
  for (int i = 0; i < m; ++i) {
    const double r = rate(q[i], sc.bs_positions[assoc.bs_of_uav[i]], eta[i], sc);
    if (r < sc.rate_threshold_bps * (1.0 - rel_tol))
      add("rate_floor[" + std::to_string(i) + "]", r, sc.rate_threshold_bps);
    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& w : sc.bs_positions) nearest = std::min(nearest, (q[i] - w).norm());
    if (nearest > d_th * (1.0 + rel_tol))
      add("control_link[" + std::to_string(i) + "]", nearest, d_th);
    if (eta[i] < -rel_tol || eta[i] > 1.0 + rel_tol)
      add("share_range[" + std::to_string(i) + "]", eta[i], 1.0);
    const double step = (q[i] - q_prev[i]).norm();
    const double step_max = sc.v_max_mps * sc.step_s;
    if (step > step_max * (1.0 + rel_tol))
      add("displacement[" + std::to_string(i) + "]", step, step_max);
    if (positions_are_decisions) {
      const double standoff = (q[i] - predicted_target).norm();
      if (standoff < sc.safety_distance_m * (1.0 - rel_tol))
        add("target_standoff[" + std::to_string(i) + "]", standoff, sc.safety_distance_m);
    }
    for (int j = i + 1; j < m; ++j) {
      const double sep = (q[i] - q[j]).norm();
      if (sep < sc.safety_distance_m * (1.0 - rel_tol))
        add("uav_separation[" + std::to_string(i) + "," + std::to_string(j) + "]", sep,
            sc.safety_distance_m);
    }
  }
  if (std::abs(eta.sum() - 1.0) > rel_tol) add("share_sum", eta.sum(), 1.0);
  if (!assoc.respects_capacity(sc.num_bs(), sc.max_assoc_per_bs))
    add("association_capacity", 0.0, sc.max_assoc_per_bs);
  return out;
}

// ---------------------------------------------------------------------------
// Per-interval solver
// ---------------------------------------------------------------------------

struct SolveDiagnostics {
  int ao_iterations = 0;
  int sca_rounds = 0;
  int coupled_solves = 0;
  int coupled_iterations = 0;
  int restorations = 0;
  bool hit_iteration_cap = false;
  bool used_fallback = false;
  double kkt_primal = 0.0;
  double kkt_dual = 0.0;
  std::vector<double> ao_objective_trace;                  // f after each AO iteration
  std::vector<std::vector<double>> trajectory_traces;      // inner objective per AO pass
  std::vector<std::vector<double>> bandwidth_traces;
};

struct SwarmDecision {
  SwarmPositions positions;
  VecX eta;
  Association association;
  double objective = 0.0;        // strategy objective at the decision
  double comm_rate_floor = 0.0;  // min per-UAV achieved rate, bit/s
  bool feasible = false;         // passed the exact validators
  SolveDiagnostics diag;
};

struct AoOptions {
  bool optimize_positions = true;
  bool optimize_bandwidth = true;
  Mat4 objective_prior = Mat4::Identity();  // prior information used in the objective
};

namespace detail {

struct IntervalContext {
  const Scenario& sc;
  const Mat4& prior;
  const TargetState& x_pred;
  const SwarmPositions& q_prev;
  const Association& assoc;
  Vec2 target_pos;
  Vec2 target_next;           // one-step-ahead predicted position
  double corridor_radius = 0.0;  // keep-out around target_next so the next
                                 // interval's standoff stays reachable: the
                                 // target can outrun the UAVs, and a UAV
                                 // parked in the prediction corridor would
                                 // face an infeasible standoff next interval
  double d_th = 0.0;
  double step_radius = 0.0;
  std::vector<int> nearest_bs_prev;
  std::vector<bool> control_active;  // control ball imposed (previous position near the edge)
  mutable std::vector<char> corridor_active;  // cleared per UAV when the keep-out is unreachable

  IntervalContext(const Scenario& s, const Mat4& p, const TargetState& x,
                  const SwarmPositions& qp, const Association& a)
      : sc(s), prior(p), x_pred(x), q_prev(qp), assoc(a) {
    target_pos = position_of(x_pred);
    d_th = control_radius_dth(sc);
    step_radius = sc.v_max_mps * sc.step_s;
    target_next = target_pos + velocity_of(x_pred) * sc.step_s;
    corridor_radius = std::max(0.0, sc.safety_distance_m - step_radius) + 5.0;
    const int m = static_cast<int>(q_prev.size());
    nearest_bs_prev.resize(m);
    control_active.resize(m);
    corridor_active.resize(m);
    for (int i = 0; i < m; ++i) {
      int best = 0;
      for (int k = 1; k < sc.num_bs(); ++k)
        if ((q_prev[i] - sc.bs_positions[k]).norm() < (q_prev[i] - sc.bs_positions[best]).norm())
          best = k;
      nearest_bs_prev[i] = best;
      const double dist = (q_prev[i] - sc.bs_positions[best]).norm();
      control_active[i] = dist > d_th - step_radius;
      corridor_active[i] =
          (q_prev[i] - target_next).norm() + step_radius >= corridor_radius + 2.0;
    }
  }

  double objective(const SwarmPositions& q, const VecX& eta) const {
    return pcrb_trace(prior, x_pred, q, eta, sc);
  }

  PcrbValue objective_value(const SwarmPositions& q, const VecX& eta) const {
    return pcrb_value(prior, x_pred, q, eta, sc);
  }

  /// Convex balls of one UAV: displacement, rate (for the given share), and
  /// the control-coverage ball when active. Returns nullopt when the rate
  /// ball is empty (share below the minimum for the threshold).
  std::optional<std::vector<Disk>> balls(int m, double eta_m) const {
    std::vector<Disk> disks;
    disks.push_back({q_prev[m], step_radius});
    const double r2 = rate_ball_radius_sq(eta_m, sc);
    if (std::isfinite(r2)) {
      if (r2 < 0.0) return std::nullopt;
      disks.push_back({sc.bs_positions[assoc.bs_of_uav[m]], std::sqrt(r2)});
    }
    if (control_active[m]) disks.push_back({sc.bs_positions[nearest_bs_prev[m]], d_th});
    return disks;
  }

  /// True-constraint feasibility of a candidate placement, used to filter
  /// line-search points; optionally also enforces the advisory corridor
  /// keep-out. Tolerances much tighter than the reporting validators.
  bool point_feasible(const SwarmPositions& q, const VecX& eta, bool with_corridor = true) const {
    const int m = static_cast<int>(q.size());
    const double ds = sc.safety_distance_m * (1.0 - 1e-12);
    for (int i = 0; i < m; ++i) {
      if ((q[i] - q_prev[i]).norm() > step_radius * (1.0 + 1e-12)) return false;
      if ((q[i] - target_pos).norm() < ds) return false;
      if (with_corridor && corridor_active[i] &&
          (q[i] - target_next).norm() < corridor_radius * (1.0 - 1e-9) - 1e-9)
        return false;
      for (int j = i + 1; j < m; ++j)
        if ((q[i] - q[j]).norm() < ds) return false;
      if (rate(q[i], sc.bs_positions[assoc.bs_of_uav[i]], eta[i], sc) <
          sc.rate_threshold_bps * (1.0 - 1e-9))
        return false;
      double nearest = std::numeric_limits<double>::infinity();
      for (const auto& w : sc.bs_positions) nearest = std::min(nearest, (q[i] - w).norm());
      if (nearest > d_th * (1.0 + 1e-12)) return false;
    }
    return true;
  }
};

inline HalfPlane standoff_plane(const Vec2& expansion, const Vec2& target, const Vec2& fallback_dir,
                                double safety_distance) {
  Vec2 a = expansion - target;
  if (a.norm() < 1e-9) a = (fallback_dir.norm() < 1e-9) ? Vec2(1.0, 0.0) : fallback_dir.normalized();
  // ||q_r - t||^2 + 2 a . (q - q_r) >= D^2  =>  2 a . q >= D^2 - ||a||^2 + 2 a . q_r
  const double b = safety_distance * safety_distance - a.squaredNorm() + 2.0 * a.dot(expansion);
  return HalfPlane::normalized(2.0 * a, b);
}

}  // namespace detail

/// One full descent-direction search for the trajectory block: linearize the
/// objective at q_expand, then iterate the convex subproblem (balls plus
/// first-order surrogates of the separation and standoff constraints) until
/// the surrogate expansion stabilizes. Each UAV subproblem is solved exactly
/// in the plane; when a pairwise surrogate couples the solutions, the joint
/// problem is re-solved by the splitting solver. Throws InfeasibleError when
/// the feasible region is empty even after standoff restoration.
inline SwarmPositions trajectory_descent_step(const SwarmPositions& q_expand, const VecX& eta,
                                              const detail::IntervalContext& ctx,
                                              SolveDiagnostics* diag = nullptr) {
  const auto& sc = ctx.sc;
  const int m = static_cast<int>(q_expand.size());
  const double ds = sc.safety_distance_m;

  const PcrbGradients grads = pcrb_gradients(ctx.prior, ctx.x_pred, q_expand, eta, sc);

  SwarmPositions q_r = q_expand;
  const double sca_tol = 1e-6 * std::max(1.0, ctx.step_radius);
  for (int round = 0; round < sc.solver.sca_max_iters; ++round) {
    if (diag) ++diag->sca_rounds;

    std::vector<std::vector<Disk>> disks(m);
    std::vector<std::vector<HalfPlane>> planes(m);
    for (int i = 0; i < m; ++i) {
      auto b = ctx.balls(i, eta[i]);
      if (!b) {
        throw InfeasibleError("trajectory step: rate ball empty for UAV " + std::to_string(i) +
                              " (share below the threshold minimum)");
      }
      disks[i] = std::move(*b);
      planes[i].push_back(
          detail::standoff_plane(q_r[i], ctx.target_pos, q_r[i] - ctx.q_prev[i], ds));
      if (ctx.corridor_active[i])
        planes[i].push_back(detail::standoff_plane(q_r[i], ctx.target_next,
                                                   q_r[i] - ctx.q_prev[i], ctx.corridor_radius));
    }

    std::vector<PairPlane> pair_planes;
    for (int i = 0; i < m; ++i) {
      for (int j = i + 1; j < m; ++j) {
        const Vec2 b = q_r[i] - q_r[j];
        if (b.norm() < 1e-9) {
          pair_planes.push_back({i, j, Vec2(1.0, 0.0), ds});
          continue;
        }
        // 2 b . (q_i - q_j) >= D^2 + ||b||^2
        const double off = (ds * ds + b.squaredNorm()) / (2.0 * b.norm());
        pair_planes.push_back({i, j, b.normalized(), off});
      }
    }

    // Decoupled exact solves; pairwise surrogates checked afterwards.
    SwarmPositions q_next(m);
    bool restored = false;
    for (int i = 0; i < m; ++i) {
      const Vec2 cost(grads.d_positions(i, 0), grads.d_positions(i, 1));
      auto sol = minimize_linear_2d(cost, disks[i], planes[i], 1e-9);
      if (!sol.feasible && ctx.corridor_active[i]) {
        // the lookahead keep-out is unreachable this interval, keep the hard
        // standoff only
        ctx.corridor_active[i] = 0;
        planes[i].resize(1);
        sol = minimize_linear_2d(cost, disks[i], planes[i], 1e-9);
      }
      if (sol.feasible) {
        q_next[i] = sol.point;
        continue;
      }
      // Standoff surrogate conflicts with the balls: move as far from the
      // predicted target as the balls allow and relinearize there.
      const auto flee = farthest_point_2d(ctx.target_pos, disks[i], 1e-9);
      if (!flee) {
        throw InfeasibleError("trajectory step: ball intersection empty for UAV " +
                              std::to_string(i));
      }
      q_next[i] = *flee;
      restored = true;
      if (diag) ++diag->restorations;
    }

    bool pairs_ok = true;
    for (const auto& pp : pair_planes) {
      if (pp.normal.dot(q_next[pp.i] - q_next[pp.j]) < pp.offset - 1e-9 * ctx.step_radius) {
        pairs_ok = false;
        break;
      }
    }
    if (!pairs_ok && !restored) {
      CoupledProblem prob;
      prob.num_uavs = m;
      prob.cost.resize(2 * m);
      for (int i = 0; i < m; ++i) {
        prob.cost[2 * i] = grads.d_positions(i, 0);
        prob.cost[2 * i + 1] = grads.d_positions(i, 1);
      }
      prob.disks = disks;
      prob.planes = planes;
      prob.pair_planes = pair_planes;
      VecX x0(2 * m);
      for (int i = 0; i < m; ++i) {
        x0[2 * i] = q_next[i].x();
        x0[2 * i + 1] = q_next[i].y();
      }
      const auto res = solve_coupled(prob, x0, sc.solver.kkt_tol, sc.solver.admm_max_iters);
      if (diag) {
        ++diag->coupled_solves;
        diag->coupled_iterations += res.iterations;
        diag->kkt_primal = std::max(diag->kkt_primal, res.primal_residual);
        diag->kkt_dual = std::max(diag->kkt_dual, res.dual_residual);
      }
      if (!res.feasible) {
        // Joint surrogate set empty (separation squeeze): the projection
        // limit point is the least-violating compromise; relinearize there.
        restored = true;
        if (diag) ++diag->restorations;
      }
      for (int i = 0; i < m; ++i) q_next[i] = Vec2(res.x[2 * i], res.x[2 * i + 1]);
    }

    double shift = 0.0;
    for (int i = 0; i < m; ++i) shift = std::max(shift, (q_next[i] - q_r[i]).norm());
    q_r = std::move(q_next);
    if (shift <= sca_tol && !restored) break;
  }
  return q_r;
}

struct LineSearchResult {
  bool found = false;
  double omega = 0.0;
  double objective = 0.0;
  PcrbValue value;
};

/// Grid search over the step size between the current iterate and the
/// subproblem solution, restricted to points satisfying the exact
/// constraints. The null step is on the grid, so whenever the current point
/// is feasible the objective cannot increase. Ties break to the smallest
/// step.
inline LineSearchResult line_search(const SwarmPositions& q_cur, const SwarmPositions& q_star,
                                    const VecX& eta, const detail::IntervalContext& ctx,
                                    SwarmPositions* q_out) {
  const int m = static_cast<int>(q_cur.size());
  const double dw = ctx.sc.solver.delta_omega;
  SwarmPositions q(m);
  // Prefer points honoring the advisory corridor keep-out; fall back to the
  // exact constraints alone when the corridor admits no step point.
  for (const bool with_corridor : {true, false}) {
    LineSearchResult best;
    for (double w = 0.0; w < 1.0 + 0.5 * dw; w += dw) {
      const double omega = std::min(w, 1.0);
      for (int i = 0; i < m; ++i) q[i] = q_cur[i] + omega * (q_star[i] - q_cur[i]);
      if (!ctx.point_feasible(q, eta, with_corridor)) continue;
      const PcrbValue f = ctx.objective_value(q, eta);
      if (!best.found || f.better_than(best.value)) {
        best.found = true;
        best.omega = omega;
        best.value = f;
        best.objective = f.total;
        *q_out = q;
      }
    }
    if (best.found) return best;
  }
  return {};
}

/// Minimizer of a linear objective over the share simplex with per-UAV
/// lower bounds: every share at its bound except the steepest-descent
/// coordinate, which takes the remainder. Ties break to the lowest index.
inline VecX bandwidth_vertex(const VecX& gradient, const VecX& lower_bounds) {
  if (lower_bounds.sum() > 1.0 + 1e-12) {
    std::ostringstream os;
    os << "bandwidth step: share lower bounds sum to " << lower_bounds.sum() << " > 1";
    throw InfeasibleError(os.str());
  }
  int star = 0;
  for (int i = 1; i < gradient.size(); ++i)
    if (gradient[i] < gradient[star]) star = i;
  VecX eta = lower_bounds;
  eta[star] = 1.0 - (lower_bounds.sum() - lower_bounds[star]);
  return eta;
}

/// Share lower bounds for the bandwidth block. The plain bounds come from
/// the rate threshold at the current positions; when the full anticipated
/// set still fits in the simplex, each bound is instead evaluated one
/// maximum displacement farther from the BS, so a share sitting at its bound
/// can never freeze the owner's motion in the next trajectory pass.
inline VecX bandwidth_lower_bounds(const SwarmPositions& q, const detail::IntervalContext& ctx) {
  const auto& sc = ctx.sc;
  const int m = static_cast<int>(q.size());
  VecX plain(m), roomy(m);
  for (int i = 0; i < m; ++i) {
    const Vec2 w = ctx.sc.bs_positions[ctx.assoc.bs_of_uav[i]];
    plain[i] = sc.rate_threshold_bps / rate_unit_share(q[i], w, sc);
    const double d_next = (q[i] - w).norm() + ctx.step_radius;
    const double snr = sc.rho0 / (d_next * d_next + sc.delta_h_m * sc.delta_h_m);
    roomy[i] = sc.rate_threshold_bps / (sc.total_bandwidth_hz * std::log2(1.0 + snr));
  }
  return (roomy.sum() <= 1.0 - 1e-9) ? roomy : plain;
}

/// One descent iteration of the bandwidth block: descend along the vertex
/// direction of the linearized problem, then the same step-size grid search
/// on the true objective.
inline VecX bandwidth_descent_step(const VecX& eta_cur, const SwarmPositions& q,
                                   const detail::IntervalContext& ctx, double* objective_out) {
  const auto& sc = ctx.sc;
  const int m = static_cast<int>(eta_cur.size());

  const VecX lower = bandwidth_lower_bounds(q, ctx);

  const PcrbGradients grads = pcrb_gradients(ctx.prior, ctx.x_pred, q, eta_cur, sc);
  const VecX eta_dir = bandwidth_vertex(grads.d_eta, lower);

  const double dw = sc.solver.delta_omega;
  bool found = false;
  PcrbValue best_f;
  VecX best_eta = eta_cur;
  for (double w = 0.0; w < 1.0 + 0.5 * dw; w += dw) {
    const double omega = std::min(w, 1.0);
    const VecX eta = eta_cur + omega * (eta_dir - eta_cur);
    bool ok = true;
    for (int i = 0; i < m; ++i)
      if (eta[i] < lower[i] * (1.0 - 1e-12) - 1e-15) ok = false;
    if (!ok) continue;
    const PcrbValue f = ctx.objective_value(q, eta);
    if (!found || f.better_than(best_f)) {
      found = true;
      best_f = f;
      best_eta = eta;
    }
  }
  if (objective_out) *objective_out = best_f.total;
  return best_eta;
}

/// Fallback decision for an interval whose optimization problem came out
/// empty: the communication-optimal motion and split.
inline SwarmDecision comm_fallback_decision(const SwarmPositions& q_prev, const Scenario& sc,
                                            const Mat4& objective_prior,
                                            const TargetState& x_pred) {
  const FeasibilityReport rep = check_feasibility(q_prev, sc);
  SwarmDecision d;
  d.positions = rep.comm_positions;
  d.eta = rep.comm_eta;
  d.association = rep.association;
  d.objective = pcrb_trace(objective_prior, x_pred, d.positions, d.eta, sc);
  d.comm_rate_floor = rep.max_min_rate;
  d.diag.used_fallback = true;
  d.feasible =
      validate_decision(d.positions, d.eta, d.association, q_prev, position_of(x_pred), sc).empty();
  return d;
}

/// Alternating optimization of trajectories and bandwidth for one interval.
/// The association is fixed from the previous positions; blocks run until
/// the relative objective decrease falls below epsilon or the iteration cap.
/// Falls back to the communication-optimal decision when a block reports an
/// empty feasible region.
inline SwarmDecision alternating_optimize(const Mat4& prior_for_objective,
                                          const TargetState& x_pred,
                                          const SwarmPositions& q_prev, const VecX& eta_prev,
                                          const Scenario& sc, const AoOptions& opt) {
  const Association assoc = solve_association(q_prev, sc);
  detail::IntervalContext ctx(sc, prior_for_objective, x_pred, q_prev, assoc);

  SwarmDecision d;
  d.association = assoc;
  d.positions = q_prev;
  d.eta = eta_prev;

  try {
    // Re-association may have moved a UAV's rate ball; restore the share
    // floor before the first trajectory pass if needed.
    {
      VecX lower(ctx.assoc.num_uavs());
      for (int i = 0; i < ctx.assoc.num_uavs(); ++i)
        lower[i] = sc.rate_threshold_bps /
                   rate_unit_share(q_prev[i], sc.bs_positions[assoc.bs_of_uav[i]], sc);
      if (lower.sum() > 1.0 + 1e-12)
        throw InfeasibleError("initial point: share lower bounds exceed the simplex");
      bool below = false;
      for (int i = 0; i < ctx.assoc.num_uavs(); ++i)
        if (d.eta[i] < lower[i] * (1.0 - 1e-12)) below = true;
      if (below) {
        if (!opt.optimize_bandwidth)
          throw InfeasibleError("initial point: fixed shares below the rate floor");
        d.eta = bandwidth_descent_step(d.eta, d.positions, ctx, nullptr);
      }
    }

    double f = ctx.objective(d.positions, d.eta);
    d.diag.ao_objective_trace.push_back(f);

    for (int ao = 0; ao < sc.solver.ao_max_iters; ++ao) {
      ++d.diag.ao_iterations;

      if (opt.optimize_positions) {
        std::vector<double> trace{f};
        for (int it = 0; it < sc.solver.descent_max_iters; ++it) {
          const SwarmPositions q_star = trajectory_descent_step(d.positions, d.eta, ctx, &d.diag);
          SwarmPositions q_new(d.positions.size());
          const LineSearchResult ls = line_search(d.positions, q_star, d.eta, ctx, &q_new);
          if (!ls.found) {
            // No grid point satisfies the exact constraints: the interval is
            // in a standoff squeeze. The subproblem solution is the best
            // legal attempt (it maximizes the violated standoff), so take it
            // rather than abandoning the interval.
            q_new = q_star;
          }
          const double f_new = ctx.objective(q_new, d.eta);
          d.positions = std::move(q_new);
          trace.push_back(f_new);
          const double rel = (f - f_new) / f;
          f = f_new;
          if (rel <= sc.solver.epsilon) break;
          if (it + 1 == sc.solver.descent_max_iters) d.diag.hit_iteration_cap = true;
        }
        d.diag.trajectory_traces.push_back(std::move(trace));
      }

      if (opt.optimize_bandwidth) {
        std::vector<double> trace{f};
        for (int it = 0; it < sc.solver.descent_max_iters; ++it) {
          double f_new = f;
          d.eta = bandwidth_descent_step(d.eta, d.positions, ctx, &f_new);
          trace.push_back(f_new);
          const double rel = (f - f_new) / f;
          f = f_new;
          if (rel <= sc.solver.epsilon) break;
          if (it + 1 == sc.solver.descent_max_iters) d.diag.hit_iteration_cap = true;
        }
        d.diag.bandwidth_traces.push_back(std::move(trace));
      }

      const double f_prev = d.diag.ao_objective_trace.back();
      d.diag.ao_objective_trace.push_back(f);
      if ((f_prev - f) / f_prev <= sc.solver.epsilon) break;
      if (ao + 1 == sc.solver.ao_max_iters) d.diag.hit_iteration_cap = true;
    }
    d.objective = f;
  } catch (const InfeasibleError&) {
    SwarmDecision fb = comm_fallback_decision(q_prev, sc, prior_for_objective, x_pred);
    fb.diag.ao_objective_trace = d.diag.ao_objective_trace;
    return fb;
  }

  double floor = std::numeric_limits<double>::infinity();
  for (int i = 0; i < ctx.assoc.num_uavs(); ++i)
    floor = std::min(floor, rate(d.positions[i], sc.bs_positions[assoc.bs_of_uav[i]], d.eta[i], sc));
  d.comm_rate_floor = floor;
  d.feasible =
      validate_decision(d.positions, d.eta, d.association, q_prev, ctx.target_pos, sc).empty();
  return d;
}

}  // namespace isacsim
