#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "babbling/rng.hpp"

namespace babbling::gmm {

struct GaussianComponent {
  double weight = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

struct MixtureModel {
  std::vector<GaussianComponent> components;

  int size() const { return static_cast<int>(components.size()); }
  int dim() const { return components.empty() ? 0 : static_cast<int>(components.front().mean.size()); }
  /// Total log-likelihood of the rows of `data`.
  double log_likelihood(const Eigen::MatrixXd& data) const;
  /// Weight-averaged mixture mean and full mixture covariance.
  Eigen::VectorXd mean() const;
  Eigen::MatrixXd covariance() const;
};

struct EmOptions {
  double tolerance = 1e-6;       // absolute log-likelihood change
  int max_iterations = 500;
  double regularization = 1e-6;  // added to every covariance diagonal each M-step
  double collapse_floor = 1.0;   // minimum effective sample count per component
  int restarts = 5;              // independent initializations per K in select_components
};

struct FitResult {
  MixtureModel model;
  std::vector<double> log_likelihood;  // after each E-step, one per iteration
  int iterations = 0;
  bool converged = false;
  int reseeds = 0;
  /// Iteration indices at which a component was reseeded (likelihood may drop there).
  std::vector<int> reseed_iterations;
};

/// EM for a full-covariance mixture with k-means++ style seeding from `rng`.
/// `data` holds one sample per row. A component whose effective sample count
/// drops below the collapse floor is reseeded once; a second collapse throws
/// SingularComponent.
FitResult fit_gmm(const Eigen::MatrixXd& data, int k, Rng& rng, const EmOptions& options = {});

/// Free-parameter count of a K-component full-covariance mixture in `dim` dimensions.
long parameter_count(int k, int dim);
double bic(double log_likelihood, int k, int dim, long samples);

struct Selection {
  int best_k = 0;
  MixtureModel model;
  std::vector<double> bic;  // index k-1; NaN where K was skipped
  std::vector<std::string> log;
};

/// Fits K = 1..k_max and keeps the lowest BIC. Each K is scored by the best
/// of `options.restarts` EM runs. K values with fewer than K * (dim + 1)
/// samples, or whose every run collapses, are skipped and logged.
Selection select_components(const Eigen::MatrixXd& data, int k_max, Rng& rng, const EmOptions& options = {});

/// Draws `count` samples (one per row): component by weight, then a normal
/// draw through the symmetric square root of its covariance.
Eigen::MatrixXd sample(const MixtureModel& model, int count, Rng& rng);

}  // namespace babbling::gmm
