#pragma once

#include <Eigen/Dense>
#include <vector>

namespace isacsim {

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat4 = Eigen::Matrix4d;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

/// Target state [x, y, vx, vy]: horizontal position (m) and velocity (m/s).
using TargetState = Vec4;

inline Vec2 position_of(const TargetState& x) { return x.head<2>(); }
inline Vec2 velocity_of(const TargetState& x) { return x.tail<2>(); }

/// Per-UAV horizontal positions, one row per UAV (m).
using SwarmPositions = std::vector<Vec2>;

inline bool all_finite(const TargetState& x) { return x.allFinite(); }

}  // namespace isacsim
