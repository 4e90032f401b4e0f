#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "isacsim/types.hpp"

namespace isacsim {

/// ||x - center|| <= radius
struct Disk {
  Vec2 center;
  double radius = 0.0;
};

/// normal . x >= offset, normal unit length
struct HalfPlane {
  Vec2 normal;
  double offset = 0.0;

  static HalfPlane normalized(const Vec2& n, double b) {
    const double len = n.norm();
    return HalfPlane{n / len, b / len};
  }
};

namespace geom {

inline bool in_disk(const Vec2& x, const Disk& d, double tol) {
  return (x - d.center).norm() <= d.radius + tol;
}

inline bool in_plane(const Vec2& x, const HalfPlane& h, double tol) {
  return h.normal.dot(x) >= h.offset - tol;
}

inline bool feasible(const Vec2& x, const std::vector<Disk>& disks,
                     const std::vector<HalfPlane>& planes, double tol) {
  for (const auto& d : disks)
    if (!in_disk(x, d, tol)) return false;
  for (const auto& h : planes)
    if (!in_plane(x, h, tol)) return false;
  return true;
}

inline void circle_circle(const Disk& a, const Disk& b, std::vector<Vec2>& out) {
  const Vec2 delta = b.center - a.center;
  const double d = delta.norm();
  if (d < 1e-12) return;  // concentric: no isolated intersection points
  if (d > a.radius + b.radius + 1e-9 * (a.radius + b.radius + 1.0)) return;
  if (d < std::abs(a.radius - b.radius) - 1e-9 * (a.radius + b.radius + 1.0)) return;
  const double t = (d * d + a.radius * a.radius - b.radius * b.radius) / (2.0 * d);
  const double h2 = std::max(0.0, a.radius * a.radius - t * t);
  const double h = std::sqrt(h2);
  const Vec2 e = delta / d;
  const Vec2 perp(-e.y(), e.x());
  out.push_back(a.center + t * e + h * perp);
  out.push_back(a.center + t * e - h * perp);
}

inline void circle_line(const Disk& a, const HalfPlane& h, std::vector<Vec2>& out) {
  const double t = h.offset - h.normal.dot(a.center);
  if (std::abs(t) > a.radius + 1e-9 * (a.radius + 1.0)) return;
  const Vec2 foot = a.center + t * h.normal;
  const double s2 = std::max(0.0, a.radius * a.radius - t * t);
  const double s = std::sqrt(s2);
  const Vec2 perp(-h.normal.y(), h.normal.x());
  out.push_back(foot + s * perp);
  out.push_back(foot - s * perp);
}

inline void line_line(const HalfPlane& a, const HalfPlane& b, std::vector<Vec2>& out) {
  const double det = a.normal.x() * b.normal.y() - a.normal.y() * b.normal.x();
  if (std::abs(det) < 1e-12) return;
  out.emplace_back((a.offset * b.normal.y() - b.offset * a.normal.y()) / det,
                   (a.normal.x() * b.offset - b.normal.x() * a.offset) / det);
}

}  // namespace geom

struct Lp2dResult {
  bool feasible = false;
  Vec2 point = Vec2::Zero();
  double value = 0.0;
};

/// Minimizes cost . x over an intersection of disks and half-planes in the
/// plane. Requires at least one disk (the step ball), which makes the region
/// compact, so the optimum sits on the boundary: either the cost-extreme
/// point of one circle or a pairwise intersection of constraint boundaries.
/// All such candidates are enumerated and the best feasible one returned.
/// With a (near-)zero cost any feasible point qualifies.
inline Lp2dResult minimize_linear_2d(const Vec2& cost, const std::vector<Disk>& disks,
                                     const std::vector<HalfPlane>& planes, double tol) {
  Vec2 c = cost;
  double cn = c.norm();
  double length_scale = 1.0;
  for (const auto& d : disks) length_scale = std::max(length_scale, d.radius);
  if (cn < 1e-300) {
    c = Vec2(1.0, 0.0);
    cn = 1.0;
  }
  c /= cn;

  std::vector<Vec2> candidates;
  candidates.reserve(8 + 2 * (disks.size() + planes.size()) * (disks.size() + planes.size()));
  for (const auto& d : disks) candidates.push_back(d.center - d.radius * c);
  for (size_t i = 0; i < disks.size(); ++i)
    for (size_t j = i + 1; j < disks.size(); ++j) geom::circle_circle(disks[i], disks[j], candidates);
  for (const auto& d : disks)
    for (const auto& h : planes) geom::circle_line(d, h, candidates);
  for (size_t i = 0; i < planes.size(); ++i)
    for (size_t j = i + 1; j < planes.size(); ++j) geom::line_line(planes[i], planes[j], candidates);

  Lp2dResult best;
  const double feas_tol = tol * length_scale;
  for (const auto& x : candidates) {
    if (!geom::feasible(x, disks, planes, feas_tol)) continue;
    const double v = c.dot(x);
    if (!best.feasible || v < best.value - 1e-15 * length_scale ||
        (std::abs(v - best.value) <= 1e-15 * length_scale &&
         (x.x() < best.point.x() || (x.x() == best.point.x() && x.y() < best.point.y())))) {
      best.feasible = true;
      best.point = x;
      best.value = v;
    }
  }
  if (best.feasible) best.value *= cn;
  return best;
}

/// Maximizes ||x - from|| over an intersection of disks (used to restore
/// standoff feasibility). The maximum of a convex function over a compact
/// convex set is attained at a boundary candidate.
inline std::optional<Vec2> farthest_point_2d(const Vec2& from, const std::vector<Disk>& disks,
                                             double tol) {
  double length_scale = 1.0;
  for (const auto& d : disks) length_scale = std::max(length_scale, d.radius);
  std::vector<Vec2> candidates;
  for (const auto& d : disks) {
    Vec2 dir = d.center - from;
    const double n = dir.norm();
    dir = (n < 1e-12) ? Vec2(1.0, 0.0) : Vec2(dir / n);
    candidates.push_back(d.center + d.radius * dir);
  }
  for (size_t i = 0; i < disks.size(); ++i)
    for (size_t j = i + 1; j < disks.size(); ++j) geom::circle_circle(disks[i], disks[j], candidates);

  std::optional<Vec2> best;
  double best_d = -1.0;
  for (const auto& x : candidates) {
    if (!geom::feasible(x, disks, {}, tol * length_scale)) continue;
    const double v = (x - from).norm();
    if (v > best_d) {
      best_d = v;
      best = x;
    }
  }
  return best;
}

/// Pairwise separation surrogate acting on two UAVs:
/// normal . (q_i - q_j) >= offset, normal unit length.
struct PairPlane {
  int i = 0;
  int j = 0;
  Vec2 normal;
  double offset = 0.0;
};

/// Linear objective over per-UAV disks/half-planes coupled by pairwise
/// half-spaces, in stacked coordinates (q_1, ..., q_M).
struct CoupledProblem {
  int num_uavs = 0;
  VecX cost;                                    // 2M
  std::vector<std::vector<Disk>> disks;         // per UAV
  std::vector<std::vector<HalfPlane>> planes;   // per UAV
  std::vector<PairPlane> pair_planes;
};

struct CoupledResult {
  bool converged = false;
  bool feasible = false;
  VecX x;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

/// Consensus ADMM over the constraint sets: one copy per disk, per
/// half-plane, and per pairwise plane, all with closed-form projections.
/// The caller provides a warm start; coordinates should already be on an
/// O(step-radius) scale. A final cyclic-projection polish returns a point
/// feasible to tight tolerance.
inline CoupledResult solve_coupled(const CoupledProblem& prob, const VecX& x0, double kkt_tol,
                                   int max_iters) {
  const int n = 2 * prob.num_uavs;
  double length_scale = 1.0;
  for (const auto& ds : prob.disks)
    for (const auto& d : ds) length_scale = std::max(length_scale, d.radius);

  struct Block {
    std::vector<int> coords;
    int kind = 0;  // 0 disk, 1 plane, 2 pair plane
    Disk disk;
    HalfPlane plane;
    VecX lifted_normal;  // unit, for pair planes
    double lifted_offset = 0.0;
  };
  std::vector<Block> blocks;
  for (int m = 0; m < prob.num_uavs; ++m) {
    for (const auto& d : prob.disks[m]) blocks.push_back({{2 * m, 2 * m + 1}, 0, d, {}, {}, 0.0});
    for (const auto& h : prob.planes[m]) blocks.push_back({{2 * m, 2 * m + 1}, 1, {}, h, {}, 0.0});
  }
  for (const auto& pp : prob.pair_planes) {
    Block b;
    b.coords = {2 * pp.i, 2 * pp.i + 1, 2 * pp.j, 2 * pp.j + 1};
    b.kind = 2;
    b.lifted_normal.resize(4);
    b.lifted_normal << pp.normal.x(), pp.normal.y(), -pp.normal.x(), -pp.normal.y();
    const double len = b.lifted_normal.norm();
    b.lifted_normal /= len;
    b.lifted_offset = pp.offset / len;
    blocks.push_back(std::move(b));
  }

  VecX cost = prob.cost;
  const double cnorm = cost.norm();
  if (cnorm > 1e-300) cost /= cnorm;

  std::vector<int> cover(n, 0);
  for (const auto& b : blocks)
    for (int j : b.coords) ++cover[j];

  std::vector<VecX> z(blocks.size()), u(blocks.size());
  for (size_t i = 0; i < blocks.size(); ++i) {
    z[i].resize(blocks[i].coords.size());
    for (size_t k = 0; k < blocks[i].coords.size(); ++k) z[i][k] = x0[blocks[i].coords[k]];
    u[i] = VecX::Zero(blocks[i].coords.size());
  }

  auto project = [](const Block& b, const VecX& y) -> VecX {
    if (b.kind == 0) {
      Vec2 p(y[0], y[1]);
      const Vec2 d = p - b.disk.center;
      const double r = d.norm();
      if (r <= b.disk.radius) return y;
      VecX out(2);
      const Vec2 q = b.disk.center + b.disk.radius / r * d;
      out << q.x(), q.y();
      return out;
    }
    if (b.kind == 1) {
      Vec2 p(y[0], y[1]);
      const double gap = b.plane.offset - b.plane.normal.dot(p);
      if (gap <= 0.0) return y;
      const Vec2 q = p + gap * b.plane.normal;
      VecX out(2);
      out << q.x(), q.y();
      return out;
    }
    const double gap = b.lifted_offset - b.lifted_normal.dot(y);
    if (gap <= 0.0) return y;
    return y + gap * b.lifted_normal;
  };

  CoupledResult res;
  res.x = x0;
  double rho = 1.0;
  const double eps = kkt_tol * length_scale;
  for (res.iterations = 0; res.iterations < max_iters; ++res.iterations) {
    // x-update
    VecX acc = VecX::Zero(n);
    for (size_t i = 0; i < blocks.size(); ++i)
      for (size_t k = 0; k < blocks[i].coords.size(); ++k)
        acc[blocks[i].coords[k]] += z[i][k] - u[i][k];
    for (int j = 0; j < n; ++j) res.x[j] = (acc[j] - cost[j] / rho) / std::max(1, cover[j]);

    // z- and u-updates
    double primal = 0.0, dual = 0.0;
    for (size_t i = 0; i < blocks.size(); ++i) {
      VecX xi(blocks[i].coords.size());
      for (size_t k = 0; k < blocks[i].coords.size(); ++k) xi[k] = res.x[blocks[i].coords[k]];
      const VecX z_old = z[i];
      z[i] = project(blocks[i], xi + u[i]);
      u[i] += xi - z[i];
      primal = std::max(primal, (xi - z[i]).lpNorm<Eigen::Infinity>());
      dual = std::max(dual, rho * (z[i] - z_old).lpNorm<Eigen::Infinity>());
    }
    res.primal_residual = primal;
    res.dual_residual = dual;
    if (primal <= eps && dual <= eps) {
      res.converged = true;
      break;
    }
    if (res.iterations % 100 == 99) {
      if (primal > 10.0 * dual) {
        rho *= 2.0;
        for (auto& ui : u) ui *= 0.5;
      } else if (dual > 10.0 * primal) {
        rho *= 0.5;
        for (auto& ui : u) ui *= 2.0;
      }
    }
  }

  // Cyclic-projection polish so the returned point satisfies every set to
  // tight tolerance.
  for (int pass = 0; pass < 500; ++pass) {
    double worst = 0.0;
    for (const auto& b : blocks) {
      VecX xi(b.coords.size());
      for (size_t k = 0; k < b.coords.size(); ++k) xi[k] = res.x[b.coords[k]];
      const VecX proj = project(b, xi);
      worst = std::max(worst, (proj - xi).lpNorm<Eigen::Infinity>());
      for (size_t k = 0; k < b.coords.size(); ++k) res.x[b.coords[k]] = proj[k];
    }
    if (worst <= 1e-12 * length_scale) {
      res.feasible = true;
      break;
    }
  }
  return res;
}

}  // namespace isacsim
