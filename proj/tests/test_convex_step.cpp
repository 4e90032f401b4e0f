#include <gtest/gtest.h>

#include "isacsim/convex_step.hpp"
#include "isacsim/rng.hpp"

using namespace isacsim;

TEST(MinimizeLinear2d, SingleDiskExtremePoint) {
  const std::vector<Disk> disks = {{Vec2(3.0, 4.0), 2.0}};
  const Vec2 cost(1.0, 0.0);
  const auto res = minimize_linear_2d(cost, disks, {}, 1e-9);
  ASSERT_TRUE(res.feasible);
  EXPECT_NEAR(res.point.x(), 1.0, 1e-12);
  EXPECT_NEAR(res.point.y(), 4.0, 1e-12);
  EXPECT_NEAR(res.value, 1.0, 1e-12);
}

TEST(MinimizeLinear2d, TwoDisksCornerSolution) {
  // Lens of two unit disks centered at (0,0) and (1.5,0); minimize +y.
  const std::vector<Disk> disks = {{Vec2(0.0, 0.0), 1.0}, {Vec2(1.5, 0.0), 1.0}};
  const auto res = minimize_linear_2d(Vec2(0.0, 1.0), disks, {}, 1e-9);
  ASSERT_TRUE(res.feasible);
  // corner: x = 0.75, y = -sqrt(1 - 0.75^2)
  EXPECT_NEAR(res.point.x(), 0.75, 1e-9);
  EXPECT_NEAR(res.point.y(), -std::sqrt(1.0 - 0.5625), 1e-9);
}

TEST(MinimizeLinear2d, HalfPlaneCutsDisk) {
  const std::vector<Disk> disks = {{Vec2(0.0, 0.0), 1.0}};
  // require x >= 0.5, minimize -y ... i.e. maximize y subject to the cut
  const std::vector<HalfPlane> planes = {HalfPlane::normalized(Vec2(1.0, 0.0), 0.5)};
  const auto res = minimize_linear_2d(Vec2(-1.0, -1.0), disks, planes, 1e-9);
  ASSERT_TRUE(res.feasible);
  EXPECT_GE(res.point.x(), 0.5 - 1e-9);
  EXPECT_LE(res.point.norm(), 1.0 + 1e-9);
}

TEST(MinimizeLinear2d, ZeroCostReturnsFeasiblePoint) {
  const std::vector<Disk> disks = {{Vec2(2.0, 2.0), 1.0}, {Vec2(3.0, 2.0), 1.5}};
  const auto res = minimize_linear_2d(Vec2(0.0, 0.0), disks, {}, 1e-9);
  ASSERT_TRUE(res.feasible);
  EXPECT_LE((res.point - disks[0].center).norm(), 1.0 + 1e-9);
  EXPECT_LE((res.point - disks[1].center).norm(), 1.5 + 1e-9);
}

TEST(MinimizeLinear2d, DisjointDisksInfeasible) {
  const std::vector<Disk> disks = {{Vec2(0.0, 0.0), 1.0}, {Vec2(5.0, 0.0), 1.0}};
  const auto res = minimize_linear_2d(Vec2(1.0, 0.0), disks, {}, 1e-9);
  EXPECT_FALSE(res.feasible);
}

TEST(MinimizeLinear2d, MatchesDenseGridOnRandomInstances) {
  RngStream rng(21, "lp2d_grid");
  int solved = 0;
  for (int t = 0; t < 200; ++t) {
    std::vector<Disk> disks = {{Vec2(0.0, 0.0), 1.0}};  // step disk
    if (rng.uniform01() < 0.7)
      disks.push_back({Vec2(1.6 * (rng.uniform01() - 0.5), 1.6 * (rng.uniform01() - 0.5)),
                       0.5 + 1.2 * rng.uniform01()});
    std::vector<HalfPlane> planes;
    if (rng.uniform01() < 0.7) {
      const double az = 2.0 * M_PI * rng.uniform01();
      planes.push_back(
          HalfPlane::normalized(Vec2(std::cos(az), std::sin(az)), 0.8 * (rng.uniform01() - 0.5)));
    }
    const double az = 2.0 * M_PI * rng.uniform01();
    const Vec2 cost(std::cos(az), std::sin(az));

    const auto res = minimize_linear_2d(cost, disks, planes, 1e-9);

    // dense grid reference
    const double h = 0.005;
    double grid_best = std::numeric_limits<double>::infinity();
    bool grid_feasible = false;
    for (double x = -1.0; x <= 1.0 + 1e-12; x += h) {
      for (double y = -1.0; y <= 1.0 + 1e-12; y += h) {
        const Vec2 p(x, y);
        if (!geom::feasible(p, disks, planes, 0.0)) continue;
        grid_feasible = true;
        grid_best = std::min(grid_best, cost.dot(p));
      }
    }
    if (!grid_feasible) continue;  // too thin for the grid to certify either way
    ++solved;
    ASSERT_TRUE(res.feasible);
    EXPECT_TRUE(geom::feasible(res.point, disks, planes, 1e-7));
    // grid point can undershoot by at most one cell diagonal
    EXPECT_LE(res.value, grid_best + 1e-9);
    EXPECT_GE(res.value, grid_best - 1.5 * h);
  }
  EXPECT_GT(solved, 100);
}

TEST(FarthestPoint2d, SingleDiskAntipodal) {
  const std::vector<Disk> disks = {{Vec2(10.0, 0.0), 2.0}};
  const auto p = farthest_point_2d(Vec2(0.0, 0.0), disks, 1e-9);
  ASSERT_TRUE(p.has_value());
  EXPECT_NEAR(p->x(), 12.0, 1e-9);
  EXPECT_NEAR(p->y(), 0.0, 1e-9);
}

TEST(FarthestPoint2d, LensMatchesGrid) {
  RngStream rng(22, "far_grid");
  for (int t = 0; t < 50; ++t) {
    const std::vector<Disk> disks = {{Vec2(0.0, 0.0), 1.0},
                                     {Vec2(0.9, 0.3 * rng.gaussian()), 0.6 + rng.uniform01()}};
    const Vec2 from(3.0 * (rng.uniform01() - 0.5), 3.0 * (rng.uniform01() - 0.5));
    const auto p = farthest_point_2d(from, disks, 1e-9);
    double grid_best = -1.0;
    const double h = 0.005;
    for (double x = -1.0; x <= 1.0; x += h)
      for (double y = -1.0; y <= 1.0; y += h)
        if (geom::feasible(Vec2(x, y), disks, {}, 0.0))
          grid_best = std::max(grid_best, (Vec2(x, y) - from).norm());
    if (grid_best < 0.0) continue;
    ASSERT_TRUE(p.has_value());
    EXPECT_GE((*p - from).norm(), grid_best - 1.5 * h);
  }
}

TEST(SolveCoupled, PairSeparationMatchesGrid) {
  // Two unit-step disks 1.5 apart; both pulled toward the midpoint; the pair
  // plane keeps them at least 1.2 apart along the line between their
  // expansion points.
  CoupledProblem prob;
  prob.num_uavs = 2;
  prob.cost.resize(4);
  prob.cost << 1.0, 0.1, -1.0, 0.1;  // UAV0 pulled -x ... toward UAV1, UAV1 pulled +x
  prob.disks = {{Disk{Vec2(0.0, 0.0), 1.0}}, {Disk{Vec2(1.5, 0.0), 1.0}}};
  prob.planes = {{}, {}};
  prob.pair_planes = {{0, 1, Vec2(-1.0, 0.0), 1.2}};  // (q0 - q1) . (-1,0) >= 1.2

  VecX x0(4);
  x0 << 0.0, 0.0, 1.5, 0.0;
  const auto res = solve_coupled(prob, x0, 1e-8, 20000);
  ASSERT_TRUE(res.feasible);

  // brute grid
  const double h = 0.02;
  double best = std::numeric_limits<double>::infinity();
  for (double x1 = -1.0; x1 <= 1.0; x1 += h) {
    for (double y1 = -1.0; y1 <= 1.0; y1 += h) {
      if (Vec2(x1, y1).norm() > 1.0) continue;
      for (double x2 = 0.5; x2 <= 2.5; x2 += h) {
        for (double y2 = -1.0; y2 <= 1.0; y2 += h) {
          if ((Vec2(x2, y2) - Vec2(1.5, 0.0)).norm() > 1.0) continue;
          if (-(x1 - x2) < 1.2) continue;
          const double v = x1 + 0.1 * y1 - x2 + 0.1 * y2;
          best = std::min(best, v);
        }
      }
    }
  }
  const double got = prob.cost.dot(res.x);
  EXPECT_LE(got, best + 0.05);
  // returned point satisfies the constraints tightly
  EXPECT_LE(Vec2(res.x[0], res.x[1]).norm(), 1.0 + 1e-9);
  EXPECT_LE((Vec2(res.x[2], res.x[3]) - Vec2(1.5, 0.0)).norm(), 1.0 + 1e-9);
  EXPECT_GE(-(res.x[0] - res.x[2]), 1.2 - 1e-9);
}

TEST(SolveCoupled, UnconstrainedPairIgnored) {
  CoupledProblem prob;
  prob.num_uavs = 2;
  prob.cost.resize(4);
  prob.cost << 0.0, -1.0, 0.0, -1.0;  // both pulled +y
  prob.disks = {{Disk{Vec2(0.0, 0.0), 1.0}}, {Disk{Vec2(10.0, 0.0), 1.0}}};
  prob.planes = {{}, {}};
  prob.pair_planes = {{0, 1, Vec2(-1.0, 0.0), 5.0}};  // easily satisfied
  VecX x0(4);
  x0 << 0.0, 0.0, 10.0, 0.0;
  const auto res = solve_coupled(prob, x0, 1e-8, 20000);
  ASSERT_TRUE(res.feasible);
  EXPECT_NEAR(res.x[1], 1.0, 1e-6);
  EXPECT_NEAR(res.x[3], 1.0, 1e-6);
}
