#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "babbling/rng.hpp"
#include "babbling/types.hpp"

namespace babbling {

/// Geometry, actuation and sensing parameters of the simulated arm.
///
/// Joint j rotates about `joint_axes[j]` (expressed in the frame of the
/// preceding link) and is followed by a link of `link_lengths[j]` metres
/// along the local x axis, so the all-zero pose is a straight arm along +x.
/// Joint angles are `rest_angles` plus the linear image of the pressure
/// vector through `muscle_map`, clamped to `joint_limits`. An empty
/// `rest_angles` means all zeros.
struct PlantConfig {
  int joint_count = 0;
  std::vector<double> link_lengths;
  std::vector<Eigen::Vector3d> joint_axes;
  std::vector<double> rest_angles;
  Eigen::MatrixXd muscle_map;  // joint_count x kMuscleCount, rad/MPa
  std::vector<std::pair<double, double>> joint_limits;
  Eigen::Vector3d obs_noise_std{0.010, 0.001, 0.001};
  std::uint64_t seed = 0;
  double drift_rate = 0.0;

  /// The 10-joint, 24-muscle arm used by every experiment.
  static PlantConfig default_arm();

  /// Checks dimensions plus the actuation invariants (full rank map, an
  /// antagonistic pair on every joint). Throws ConfigError.
  void validate() const;
};

/// Known home posture and its noiseless end-effector position.
struct HomeState {
  PressureVector q_home;
  TaskPoint x_home;
};

struct ForwardResult {
  TaskPoint x;       // observed position (with sensor noise)
  PressureVector q;  // pressures actually applied
};

inline constexpr double kHomePressure = 0.2;

class Plant {
 public:
  /// Only dimensional consistency is enforced here; call
  /// PlantConfig::validate() for the full actuation checks.
  explicit Plant(PlantConfig config);

  /// Executes a command. Out-of-range pressures are clamped; the returned
  /// position carries Gaussian observation noise from the plant's stream.
  ForwardResult forward(const PressureVector& q_star);

  /// Noiseless end-effector position for an (unclamped) command under the
  /// current muscle map. Does not advance any stream.
  TaskPoint kinematics(const PressureVector& q_star) const;
  Eigen::VectorXd joint_angles(const PressureVector& q_star) const;

  /// Uniform posture over the actuation range.
  static PressureVector random_posture(Rng& rng);

  /// Independent copy with the current map and fresh streams seeded by `seed`.
  Plant clone(std::uint64_t seed) const;

  const HomeState& home() const { return home_; }
  const PlantConfig& config() const { return config_; }
  const Eigen::MatrixXd& muscle_map() const { return map_; }
  std::uint64_t call_count() const { return calls_; }
  /// Radius of the sphere around the base that bounds every noiseless position.
  double reach_radius() const;

 private:
  PlantConfig config_;
  Eigen::MatrixXd map_;
  HomeState home_;
  Rng noise_rng_;
  Rng drift_rng_;
  std::uint64_t calls_ = 0;
};

/// Repeatability metric: mean distance of repeated executions of the same
/// posture from their per-posture centroid, averaged over random postures.
double control_accuracy(const std::function<TaskPoint(const PressureVector&)>& execute,
                        int postures, int repeats, Rng& rng);
double control_accuracy(Plant& plant, int postures, int repeats, Rng& rng);

}  // namespace babbling
