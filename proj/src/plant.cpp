#include "babbling/plant.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Geometry>
#include <Eigen/QR>

#include "babbling/errors.hpp"

namespace babbling {

namespace {

constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kDriftStream = 2;

}  // namespace

PlantConfig PlantConfig::default_arm() {
  PlantConfig c;
  c.joint_count = 10;
  // girdle (2), shoulder (3), elbow, forearm, wrist (2), hand
  c.link_lengths = {0.052, 0.0, 0.0, 0.0, 0.312, 0.0, 0.26, 0.0, 0.156, 0.078};
  const Eigen::Vector3d ux = Eigen::Vector3d::UnitX();
  const Eigen::Vector3d uy = Eigen::Vector3d::UnitY();
  const Eigen::Vector3d uz = Eigen::Vector3d::UnitZ();
  c.joint_axes = {uz, uy, uz, uy, ux, uy, ux, uy, uz, uy};
  // Shoulder pitch, elbow and wrist pitch rest bent so the home posture is
  // away from the straight-arm singularity.
  c.rest_angles = {0.0, 0.0, 0.0, 0.3, 0.0, 1.2, 0.0, 0.3, 0.0, 0.0};

  // Symmetric agonist/antagonist gain per joint, rad/MPa.
  const double gain[10] = {0.3, 0.3, 0.3, 0.3, 0.8, 0.5, 0.8, 1.2, 1.2, 1.2};
  c.muscle_map = Eigen::MatrixXd::Zero(10, kMuscleCount);
  for (int j = 0; j < 10; ++j) {
    c.muscle_map(j, 2 * j) = gain[j];
    c.muscle_map(j, 2 * j + 1) = -gain[j];
  }
  // Four bi-articular muscles spanning adjacent joints.
  c.muscle_map(1, 20) = 0.3;
  c.muscle_map(2, 20) = -0.3;
  c.muscle_map(3, 21) = 0.4;
  c.muscle_map(4, 21) = 0.3;
  c.muscle_map(5, 22) = 0.4;
  c.muscle_map(6, 22) = -0.3;
  c.muscle_map(7, 23) = 0.3;
  c.muscle_map(8, 23) = 0.3;

  c.joint_limits.resize(10);
  for (int j = 0; j < 10; ++j) c.joint_limits[j] = {c.rest_angles[j] - 1.2, c.rest_angles[j] + 1.2};
  return c;
}

void PlantConfig::validate() const {
  if (joint_count < 1) throw ConfigError("plant: joint_count must be positive");
  const auto n = static_cast<std::size_t>(joint_count);
  if (link_lengths.size() != n || joint_axes.size() != n || joint_limits.size() != n)
    throw ConfigError("plant: per-joint arrays must have joint_count entries");
  if (!rest_angles.empty() && rest_angles.size() != n)
    throw ConfigError("plant: rest_angles must be empty or have joint_count entries");
  if (muscle_map.rows() != joint_count || muscle_map.cols() != kMuscleCount)
    throw ConfigError("plant: muscle_map must be joint_count x 24");
  for (std::size_t j = 0; j < n; ++j) {
    if (!(link_lengths[j] >= 0.0)) throw ConfigError("plant: link lengths must be >= 0");
    if (!(joint_axes[j].norm() > 0.0)) throw ConfigError("plant: joint axis must be non-zero");
    if (!(joint_limits[j].first <= joint_limits[j].second))
      throw ConfigError("plant: joint limit pair must be ordered");
  }
  if ((obs_noise_std.array() < 0.0).any() || !obs_noise_std.allFinite())
    throw ConfigError("plant: obs_noise_std must be finite and >= 0");
  if (!(drift_rate >= 0.0)) throw ConfigError("plant: drift_rate must be >= 0");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(muscle_map);
  if (qr.rank() != joint_count)
    throw ConfigError("plant: muscle_map must have full row rank (every joint actuated)");
  for (int j = 0; j < joint_count; ++j) {
    const auto row = muscle_map.row(j);
    if (!((row.array() > 0.0).any() && (row.array() < 0.0).any()))
      throw ConfigError("plant: joint " + std::to_string(j) + " lacks an antagonistic pair");
  }
}

Plant::Plant(PlantConfig config)
    : config_(std::move(config)),
      noise_rng_(derive_seed(config_.seed, kNoiseStream)),
      drift_rng_(derive_seed(config_.seed, kDriftStream)) {
  const auto n = static_cast<std::size_t>(config_.joint_count);
  if (config_.joint_count < 1 || config_.link_lengths.size() != n ||
      config_.joint_axes.size() != n || config_.joint_limits.size() != n ||
      (!config_.rest_angles.empty() && config_.rest_angles.size() != n) ||
      config_.muscle_map.rows() != config_.joint_count ||
      config_.muscle_map.cols() != kMuscleCount) {
    throw ConfigError("plant: inconsistent configuration dimensions");
  }
  for (auto& axis : config_.joint_axes) axis.normalize();
  map_ = config_.muscle_map;
  home_.q_home = PressureVector::Constant(kHomePressure);
  home_.x_home = kinematics(home_.q_home);
}

Eigen::VectorXd Plant::joint_angles(const PressureVector& q_star) const {
  Eigen::VectorXd theta = map_ * clamp_pressure(q_star);
  if (!config_.rest_angles.empty()) theta += Eigen::Map<const Eigen::VectorXd>(config_.rest_angles.data(), config_.joint_count);
  for (int j = 0; j < config_.joint_count; ++j) {
    const auto [lo, hi] = config_.joint_limits[static_cast<std::size_t>(j)];
    theta[j] = std::clamp(theta[j], lo, hi);
  }
  return theta;
}

TaskPoint Plant::kinematics(const PressureVector& q_star) const {
  const Eigen::VectorXd theta = joint_angles(q_star);
  Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
  TaskPoint p = TaskPoint::Zero();
  for (int j = 0; j < config_.joint_count; ++j) {
    const auto js = static_cast<std::size_t>(j);
    rot = rot * Eigen::AngleAxisd(theta[j], config_.joint_axes[js]).toRotationMatrix();
    p += rot.col(0) * config_.link_lengths[js];
  }
  return p;
}

ForwardResult Plant::forward(const PressureVector& q_star) {
  ForwardResult out;
  out.q = clamp_pressure(q_star);
  out.x = kinematics(out.q);
  for (int a = 0; a < kTaskDim; ++a) out.x[a] += config_.obs_noise_std[a] * noise_rng_.normal();
  if (config_.drift_rate > 0.0) {
    for (Eigen::Index j = 0; j < map_.rows(); ++j)
      for (Eigen::Index i = 0; i < map_.cols(); ++i)
        if (config_.muscle_map(j, i) != 0.0) map_(j, i) += config_.drift_rate * drift_rng_.normal();
  }
  ++calls_;
  return out;
}

PressureVector Plant::random_posture(Rng& rng) {
  PressureVector q;
  for (int i = 0; i < kMuscleCount; ++i) q[i] = rng.uniform(kPressureMin, kPressureMax);
  return q;
}

Plant Plant::clone(std::uint64_t seed) const {
  Plant copy = *this;
  copy.noise_rng_ = Rng(derive_seed(seed, kNoiseStream));
  copy.drift_rng_ = Rng(derive_seed(seed, kDriftStream));
  copy.calls_ = 0;
  return copy;
}

double Plant::reach_radius() const {
  double total = 0.0;
  for (double l : config_.link_lengths) total += l;
  return total;
}

double control_accuracy(const std::function<TaskPoint(const PressureVector&)>& execute,
                        int postures, int repeats, Rng& rng) {
  if (postures < 1 || repeats < 2)
    throw std::invalid_argument("control_accuracy: need postures >= 1 and repeats >= 2");
  double total = 0.0;
  std::vector<TaskPoint> xs(static_cast<std::size_t>(repeats));
  for (int p = 0; p < postures; ++p) {
    const PressureVector q = Plant::random_posture(rng);
    TaskPoint mean = TaskPoint::Zero();
    for (auto& x : xs) {
      x = execute(q);
      mean += x;
    }
    mean /= repeats;
    double spread = 0.0;
    for (const auto& x : xs) spread += (x - mean).norm();
    total += spread / repeats;
  }
  return total / postures;
}

double control_accuracy(Plant& plant, int postures, int repeats, Rng& rng) {
  return control_accuracy([&plant](const PressureVector& q) { return plant.forward(q).x; },
                          postures, repeats, rng);
}

}  // namespace babbling
