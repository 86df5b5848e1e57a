#pragma once

#include <Eigen/Core>

namespace babbling {

inline constexpr int kMuscleCount = 24;
inline constexpr int kTaskDim = 3;

// Actuation range of every pneumatic muscle, MPa.
inline constexpr double kPressureMin = 0.0;
inline constexpr double kPressureMax = 0.4;

/// Motor command q: one pressure per muscle, MPa.
using PressureVector = Eigen::Matrix<double, kMuscleCount, 1>;
/// End-effector position x in metres.
using TaskPoint = Eigen::Vector3d;
/// Local linear term of a prototype unit, d(pressure)/d(position).
using LocalJacobian = Eigen::Matrix<double, kMuscleCount, kTaskDim>;

inline PressureVector clamp_pressure(const PressureVector& q) {
  return q.cwiseMax(kPressureMin).cwiseMin(kPressureMax);
}

}  // namespace babbling
