#include "babbling/invmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace babbling {

InverseModel::InverseModel(InverseModelConfig config) : config_(config) {
  if (!(config_.r_proto > 0.0) || !(config_.bandwidth > 0.0) || !(config_.learning_rate >= 0.0) ||
      !(config_.anneal_samples > 0.0))
    throw std::invalid_argument("InverseModel: invalid configuration");
}

InverseModel InverseModel::initialized(const TaskPoint& x_home, const PressureVector& q_home,
                                       InverseModelConfig config) {
  InverseModel model(config);
  PrototypeUnit unit;
  unit.center = x_home;
  unit.offset = q_home;
  unit.sample_count = 1;
  model.units_.push_back(unit);
  return model;
}

std::vector<double> InverseModel::responsibilities(const TaskPoint& x) const {
  std::vector<double> rho(units_.size());
  if (units_.empty()) return rho;
  const double inv_two_b2 = 1.0 / (2.0 * config_.bandwidth * config_.bandwidth);
  double min_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < units_.size(); ++k) {
    rho[k] = (x - units_[k].center).squaredNorm();
    min_d2 = std::min(min_d2, rho[k]);
  }
  // Shifting by the smallest distance keeps the normalization finite far
  // away from every center.
  double total = 0.0;
  for (double& r : rho) {
    r = std::exp(-(r - min_d2) * inv_two_b2);
    total += r;
  }
  for (double& r : rho) r /= total;
  return rho;
}

PressureVector InverseModel::predict(const TaskPoint& x) const {
  if (units_.empty()) throw std::logic_error("InverseModel::predict on an empty model");
  const std::vector<double> rho = responsibilities(x);
  PressureVector q = PressureVector::Zero();
  for (std::size_t k = 0; k < units_.size(); ++k) {
    if (rho[k] == 0.0) continue;
    q.noalias() += rho[k] * units_[k].local_prediction(x);
  }
  return q;
}

int InverseModel::nearest_unit(const TaskPoint& x) const {
  int best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < units_.size(); ++k) {
    const double d2 = (x - units_[k].center).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = static_cast<int>(k);
    }
  }
  return best;
}

ModelGradient InverseModel::gradient(const TaskPoint& x, const PressureVector& q, double w) const {
  ModelGradient g;
  g.offsets.resize(units_.size());
  g.jacobians.resize(units_.size());
  const std::vector<double> rho = responsibilities(x);
  for (std::size_t k = 0; k < units_.size(); ++k) {
    const PressureVector residual = units_[k].local_prediction(x) - q;
    const double scale = 2.0 * w * rho[k];
    g.offsets[k] = scale * residual;
    g.jacobians[k] = scale * residual * (x - units_[k].center).transpose();
  }
  return g;
}

double InverseModel::weighted_error(const TaskPoint& x, const PressureVector& q, double w) const {
  const std::vector<double> rho = responsibilities(x);
  double e = 0.0;
  for (std::size_t k = 0; k < units_.size(); ++k) e += rho[k] * (units_[k].local_prediction(x) - q).squaredNorm();
  return w * e;
}

void InverseModel::update(const TaskPoint& x, const PressureVector& q, double w) {
  if (w < 0.0 || !std::isfinite(w)) throw std::invalid_argument("InverseModel::update: weight must be finite and >= 0");
  if (w == 0.0) return;

  const int nearest = nearest_unit(x);
  if (nearest < 0 ||
      (x - units_[static_cast<std::size_t>(nearest)].center).norm() >= config_.r_proto) {
    PrototypeUnit unit;
    unit.center = x;
    unit.offset = q;
    if (nearest >= 0) unit.jacobian = units_[static_cast<std::size_t>(nearest)].jacobian;
    unit.sample_count = 1;
    units_.push_back(unit);
    return;
  }

  const std::vector<double> rho = responsibilities(x);
  const double r2 = config_.r_proto * config_.r_proto;
  for (std::size_t k = 0; k < units_.size(); ++k) {
    if (rho[k] < 1e-12) continue;
    PrototypeUnit& u = units_[k];
    const TaskPoint d = x - u.center;
    const double eta = config_.learning_rate / (1.0 + static_cast<double>(u.sample_count) / config_.anneal_samples);
    // The jacobian step is taken in radius-normalized input coordinates, so
    // the unit's residual at x shrinks by step * (1 + |d|^2 / r^2). Capping
    // that factor at 1 keeps a heavy sample from overshooting.
    const double gain = 1.0 + d.squaredNorm() / r2;
    const double step = std::min(2.0 * eta * w * rho[k], 1.0 / gain);
    const PressureVector residual = u.local_prediction(x) - q;
    u.offset.noalias() -= step * residual;
    u.jacobian.noalias() -= (step / r2) * residual * d.transpose();
  }
  ++units_[static_cast<std::size_t>(nearest)].sample_count;
}

std::vector<PrototypeSphere> InverseModel::prototype_spheres() const {
  std::vector<PrototypeSphere> spheres;
  spheres.reserve(units_.size());
  for (const auto& u : units_) spheres.push_back({u.center, config_.r_proto});
  return spheres;
}

std::vector<TaskPoint> InverseModel::centers() const {
  std::vector<TaskPoint> c;
  c.reserve(units_.size());
  for (const auto& u : units_) c.push_back(u.center);
  return c;
}

}  // namespace babbling
