#pragma once

#include <vector>

#include "babbling/types.hpp"

namespace babbling {

/// One prototype: a task-space center with an affine local map into
/// pressure space, q(x) = offset + jacobian * (x - center).
struct PrototypeUnit {
  TaskPoint center = TaskPoint::Zero();
  PressureVector offset = PressureVector::Zero();
  LocalJacobian jacobian = LocalJacobian::Zero();
  long sample_count = 0;

  PressureVector local_prediction(const TaskPoint& x) const { return offset + jacobian * (x - center); }
};

struct InverseModelConfig {
  double r_proto = 0.02;        // insertion radius, metres
  double learning_rate = 0.1;   // base step, annealed per unit
  double bandwidth = 0.02;      // Gaussian responsibility width, metres
  double anneal_samples = 5000.0;
};

struct PrototypeSphere {
  TaskPoint center;
  double radius;
};

/// Gradient of the weighted squared error w * ||predict(x) - q||^2 with
/// respect to every unit's offset and jacobian (centers are fixed).
struct ModelGradient {
  std::vector<PressureVector> offsets;
  std::vector<LocalJacobian> jacobians;
};

/// Inverse kinematics estimate g(x*): normalized-Gaussian blend of local
/// linear maps, grown by novelty-based insertion and trained online.
class InverseModel {
 public:
  explicit InverseModel(InverseModelConfig config = {});

  /// Model holding a single unit at the home sample.
  static InverseModel initialized(const TaskPoint& x_home, const PressureVector& q_home,
                                  InverseModelConfig config = {});

  /// Unclamped pressure estimate. Requires at least one unit.
  PressureVector predict(const TaskPoint& x) const;

  /// Normalized responsibilities of all units at `x` (sum to 1).
  std::vector<double> responsibilities(const TaskPoint& x) const;

  /// One online step on the sample (x, q) with weight w >= 0. Inserts a unit
  /// when x is at least r_proto from every center; otherwise takes a
  /// gradient step on weighted_error. A zero weight changes nothing.
  void update(const TaskPoint& x, const PressureVector& q, double w);

  /// Gradient of weighted_error with respect to every offset and jacobian.
  ModelGradient gradient(const TaskPoint& x, const PressureVector& q, double w) const;
  /// Training objective: w * sum_k rho_k(x) * ||local_prediction_k(x) - q||^2.
  /// Each unit fits the sample with its own linear map, so a unit's jacobian
  /// carries the full local slope and extrapolates past the explored region.
  double weighted_error(const TaskPoint& x, const PressureVector& q, double w) const;

  std::vector<PrototypeSphere> prototype_spheres() const;
  std::vector<TaskPoint> centers() const;

  /// Index of the closest unit center, or -1 for an empty model.
  int nearest_unit(const TaskPoint& x) const;

  const std::vector<PrototypeUnit>& units() const { return units_; }
  std::vector<PrototypeUnit>& mutable_units() { return units_; }
  const InverseModelConfig& config() const { return config_; }
  bool empty() const { return units_.empty(); }

 private:
  InverseModelConfig config_;
  std::vector<PrototypeUnit> units_;
};

}  // namespace babbling
