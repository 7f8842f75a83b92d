#pragma once

#include <array>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

namespace mcf {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Face = std::array<int, 3>;

inline constexpr double kPi = std::numbers::pi;

inline double sqr(double x) { return x * x; }

}  // namespace mcf
