#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "babbling/babble.hpp"
#include "babbling/cmaes.hpp"
#include "babbling/gmm.hpp"
#include "babbling/goalspace.hpp"
#include "babbling/invmodel.hpp"
#include "babbling/plant.hpp"

namespace babbling {

struct AbundanceConfig {
  double alpha = 0.05;     // feedback gain
  int fb_steps = 30;       // feedback iterations per trial
  int trials = 5;          // neighbouring goals, one CMA-ES run each
  double radius = 0.02;    // collection radius, metres
  double scale = 10.0;     // objective f(q) = scale * ||x* - x||
  double f_star = 0.03;    // stop once the best fitness reaches this value
  long max_evals_per_trial = 1000;
  int k_max = 10;          // largest mixture size tried by BIC
  int n_eval = 200;        // mixture samples executed per report
  double fallback_sigma = 0.05;
  int min_samples_per_dim = 2;  // below this a set is reported raw, without a mixture

  void validate() const;
  double reach_tolerance() const { return f_star / scale; }
};

enum class PostureTag { GoalBabble, Feedback, Cma };
std::string_view to_string(PostureTag tag);
PostureTag posture_tag_from_string(std::string_view s);

struct TaggedPosture {
  PressureVector q;
  TaskPoint x;
  PostureTag tag;
};

struct PostureSet {
  std::vector<TaggedPosture> postures;

  std::size_t size() const { return postures.size(); }
  bool empty() const { return postures.empty(); }
  /// One posture per row.
  Eigen::MatrixXd pressures() const;
  void append(const PostureSet& other);

  static PostureSet from_samples(const std::vector<PostureSample>& samples, PostureTag tag);
};

/// Mean of the per-muscle (population) variances of a set of postures.
double mean_muscle_variance(const Eigen::MatrixXd& pressures);

struct TrialRecord {
  TaskPoint start_goal;
  double feedback_best_err = 0.0;
  int feedback_collected = 0;
  double sigma0 = 0.0;
  bool sigma_fallback = false;
  long evaluations = 0;
  double best_f = 0.0;
  cma::StopReason stop = cma::StopReason::BudgetExhausted;
  int collected = 0;
  std::vector<cma::GenerationRecord> history;
};

struct QueryResult {
  PostureSet cma;       // Q_cma
  PostureSet feedback;  // union of Q_fb over trials
  std::vector<TrialRecord> trials;
  std::vector<std::string> warnings;
};

/// Indices of the `count` goals closest to `x_star` (ties by index).
std::vector<int> closest_goals(std::span<const TaskPoint> goals, const TaskPoint& x_star, int count);

/// Farthest-point selection seeded at the goal nearest the centroid.
std::vector<int> select_spread_goals(std::span<const TaskPoint> goals, int count);

/// Local online motor babbling: for each neighbouring goal, feedback reaching
/// toward x_star seeds the mean of a CMA-ES run on c * ||x* - forward(q)||;
/// every evaluated posture observed within `radius` of x_star is collected.
/// `strategy` must be a 24-dimensional configuration.
QueryResult query_abundance(const TaskPoint& x_star, const InverseModel& model, const PostureSet& local,
                            std::span<const TaskPoint> goals, Plant& plant, const AbundanceConfig& config,
                            const cma::CmaConfig& strategy, Rng& rng);

struct SetStatistics {
  std::string mode;  // "gmm" or "raw"
  int source_size = 0;
  int k_best = 0;
  std::vector<double> bic;
  std::vector<double> errors;  // reaching error of every executed posture
  double error_mean = 0.0;
  double error_std = 0.0;
  PressureVector variances = PressureVector::Zero();
  double variance_mean = 0.0;
  double variance_std = 0.0;
  Eigen::MatrixXd covariance;
  Eigen::MatrixXd executed;  // executed postures, one per row
};

struct AbundanceReport {
  TaskPoint goal;
  SetStatistics baseline;
  SetStatistics cma;
  int change_row = 0;  // entry with the largest absolute covariance change
  int change_col = 0;
  double change_baseline = 0.0;
  double change_cma = 0.0;
  std::vector<std::string> log;
};

/// Fits a BIC-selected mixture to a posture set, executes `n_eval` draws and
/// summarizes reaching error and pressure variability. Sets smaller than
/// min_samples_per_dim * 24 are executed as-is instead.
SetStatistics describe_set(const PostureSet& set, Plant& plant, const TaskPoint& x_star,
                           const AbundanceConfig& config, Rng& rng, std::vector<std::string>* log);

AbundanceReport abundance_report(const PostureSet& baseline, const PostureSet& cma, Plant& plant,
                                 const TaskPoint& x_star, const AbundanceConfig& config, Rng& rng);

}  // namespace babbling
