#pragma once

#include <functional>
#include <limits>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "babbling/rng.hpp"

namespace babbling::cma {

/// Strategy parameters. `defaults(n)` fills every field; callers may
/// override individual values afterwards (then call validate()).
struct CmaConfig {
  int dim = 0;
  int lambda = 0;
  int mu = 0;
  Eigen::VectorXd weights;  // mu entries, decreasing, positive, sum 1
  double mu_eff = 0.0;      // 1 / sum(w_i^2)
  double c_sigma = 0.0;
  double d_sigma = 0.0;
  double c_c = 0.0;
  double c_cov = 0.0;
  double chi_n = 0.0;  // E||N(0, I)||

  /// lambda = 4 + floor(3 ln n) unless given (> 0).
  static CmaConfig defaults(int dim, int lambda = 0);
  /// Recomputes mu_eff and the learning rates for explicit weights.
  static CmaConfig with_weights(int dim, int lambda, Eigen::VectorXd weights);
  void validate() const;
};

struct EvolutionState {
  Eigen::VectorXd mean;
  double sigma = 1.0;
  Eigen::MatrixXd cov;
  Eigen::VectorXd path_sigma;
  Eigen::VectorXd path_cov;
  long generation = 0;
  long evaluations = 0;

  static EvolutionState initial(const Eigen::VectorXd& x0, double sigma0);
};

/// Candidates of one generation: x_i = mean + sigma * y_i, y_i ~ N(0, C).
struct Population {
  std::vector<Eigen::VectorXd> candidates;
  std::vector<Eigen::VectorXd> steps;  // y_i
  long generation = -1;
};

Population ask(const EvolutionState& state, const CmaConfig& config, Rng& rng);

/// Rank-based update of mean, step size and covariance from the fitnesses
/// (lower is better) of the population returned by the preceding ask.
EvolutionState tell(const EvolutionState& state, const CmaConfig& config, const Population& population,
                    const std::vector<double>& fitnesses);

/// Symmetric eigen-repair: eigenvalues floored at 1e-14 of the largest.
Eigen::MatrixXd repair_covariance(const Eigen::MatrixXd& cov);

struct StopRules {
  double f_target = -std::numeric_limits<double>::infinity();  // stop once best <= f_target
  long max_evaluations = 100000;
  double min_sigma = 1e-300;
};

enum class StopReason { TargetReached, BudgetExhausted, NumericalStop };
std::string_view to_string(StopReason r);

struct GenerationRecord {
  long generation = 0;
  long evaluations = 0;
  double best_f = 0.0;       // best of this generation
  double best_ever = 0.0;
  double sigma = 0.0;
  double axis_ratio = 1.0;   // sqrt(max eig / min eig) of C
  double min_std = 0.0;      // sigma * sqrt(min diag C)
  double max_std = 0.0;      // sigma * sqrt(max diag C)
};

struct OptimizeResult {
  Eigen::VectorXd best_x;
  double best_f = std::numeric_limits<double>::infinity();
  long evaluations = 0;
  StopReason stop = StopReason::BudgetExhausted;
  EvolutionState final_state;
  std::vector<GenerationRecord> history;
};

using Objective = std::function<double(const Eigen::VectorXd&)>;

/// Ask/tell loop until the target, the evaluation budget or a numerical stop.
/// Budget exhaustion is reported through `stop`, with the best-so-far kept.
OptimizeResult optimize(const Objective& objective, const Eigen::VectorXd& x0, double sigma0,
                        const CmaConfig& config, const StopRules& stop, Rng& rng);

GenerationRecord describe(const EvolutionState& state, double best_f, double best_ever);

}  // namespace babbling::cma
