#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "babbling/goalspace.hpp"
#include "babbling/invmodel.hpp"
#include "babbling/plant.hpp"
#include "babbling/rng.hpp"
#include "babbling/types.hpp"

namespace babbling {

struct BabbleConfig {
  double delta_x = 0.02;           // target step length, metres
  double delta_q = 0.05;           // home-return step length, MPa
  double p_home = 0.1;             // probability of a home return per trial
  double rate_hz = 5.0;            // virtual sampling rate for log timestamps
  long total_samples = 20000;
  long eval_every = 4000;          // 0 disables snapshots
  double noise_sigma = 0.01;       // stationary std of every noise entry
  double noise_sigma_delta = 0.002;
  double fb_alpha = 0.05;
  int fb_steps = 30;
  double fb_radius = 0.02;         // collection radius for feedback samples

  void validate() const;
};

/// Exploratory perturbation E(x*) = A x* + b whose entries follow a
/// variance-preserving Gaussian random walk.
struct NoiseState {
  Eigen::Matrix<double, kMuscleCount, kTaskDim> A = Eigen::Matrix<double, kMuscleCount, kTaskDim>::Zero();
  PressureVector b = PressureVector::Zero();
  double sigma = 0.01;
  double sigma_delta = 0.0;

  static NoiseState initial(double sigma, double sigma_delta, Rng& rng);
};

PressureVector noise_eval(const NoiseState& state, const TaskPoint& x_star);
NoiseState noise_step(const NoiseState& state, Rng& rng);

/// One interpolation step of length delta_x toward `goal`; lands exactly on
/// the goal when it is no farther than delta_x. Throws DegenerateDirection
/// when x_star == goal.
TaskPoint next_target(const TaskPoint& x_star, const TaskPoint& goal, double delta_x);
/// True once the target is strictly closer than delta_x to the goal.
bool goal_reached(const TaskPoint& x_star, const TaskPoint& goal, double delta_x);

struct SampleWeight {
  double w_dir = 0.0;
  double w_eff = 0.0;
  double w = 0.0;
};

/// Direction weight: 1/2 (1 + cos) of the angle between intended and
/// observed displacement (1/2 when either is zero). Efficiency weight:
/// ||dx|| / ||dq||, zero when dq vanishes.
SampleWeight sample_weight(const TaskPoint& x_t, const TaskPoint& x_prev, const TaskPoint& x_star_t,
                           const TaskPoint& x_star_prev, const PressureVector& q_t,
                           const PressureVector& q_prev);

/// Via-points of length delta_q from q_star toward q_home, stopping once the
/// remaining distance is below delta_q (q_home itself is not included).
std::vector<PressureVector> home_return(const PressureVector& q_star, const PressureVector& q_home,
                                        double delta_q);

struct PostureSample {
  PressureVector q;
  TaskPoint x;
};

struct FeedbackResult {
  PressureVector best_q = PressureVector::Zero();
  TaskPoint best_x = TaskPoint::Zero();
  double best_err = std::numeric_limits<double>::infinity();
  int best_step = -1;
  std::vector<double> errors;          // per step
  std::vector<PostureSample> visited;  // samples within the collection radius
};

/// Proportional target shifting: x_hat_{t+1} = x_hat_t + alpha (x* - x_t),
/// with x_t the observed outcome of executing query(x_hat_t) and x_hat_0 =
/// `x_start`. Errors are always measured against `x_star`.
template <typename Query, typename Execute>
FeedbackResult feedback_reach_with(const TaskPoint& x_star, const TaskPoint& x_start, Query&& query,
                                   Execute&& execute, double alpha, int steps, double radius) {
  FeedbackResult out;
  out.errors.reserve(static_cast<std::size_t>(std::max(steps, 0)));
  TaskPoint x_hat = x_start;
  for (int t = 0; t < steps; ++t) {
    const PressureVector q_cmd = query(x_hat);
    const ForwardResult fwd = execute(q_cmd);
    const TaskPoint err = x_star - fwd.x;
    const double e = err.norm();
    out.errors.push_back(e);
    if (e < out.best_err) {
      out.best_err = e;
      out.best_q = fwd.q;
      out.best_x = fwd.x;
      out.best_step = t;
    }
    if (e < radius) out.visited.push_back({fwd.q, fwd.x});
    x_hat += alpha * err;
  }
  return out;
}

FeedbackResult feedback_reach(const TaskPoint& x_star, const InverseModel& model, Plant& plant,
                              double alpha, int steps, double radius = 0.02);

struct ErrorReport {
  std::vector<double> errors;  // per goal, metres
  double mean = 0.0;
  double stddev = 0.0;
  double bin_width = 0.005;
  std::vector<int> histogram;  // last bin collects everything beyond range

  static ErrorReport from_errors(std::vector<double> errors, double bin_width = 0.005, int bins = 20);
};

ErrorReport evaluate(const InverseModel& model, const GoalGrid& goals, Plant& plant, bool use_feedback,
                     double alpha = 0.05, int steps = 30);

struct SampleRecord {
  long t = 0;
  double time_s = 0.0;
  TaskPoint x_star;
  TaskPoint x;
  PressureVector q_star;
  PressureVector q;
  double w = 0.0;
  bool home = false;
};

struct EvalSnapshot {
  long samples = 0;
  int units = 0;
  ErrorReport plain;
  ErrorReport feedback;
};

struct SessionLog {
  std::vector<SampleRecord> samples;
  std::vector<EvalSnapshot> snapshots;
  std::vector<std::string> warnings;
};

struct SessionResult {
  InverseModel model;
  SessionLog log;
};

/// Directed online goal babbling over `grid`, starting from the plant's
/// home sample. Deterministic given the plant state and `rng`.
SessionResult run_session(const BabbleConfig& config, const InverseModelConfig& model_config,
                          Plant& plant, const GoalGrid& grid, Rng& rng);

/// Logged postures observed within `radius` of `x_star`.
std::vector<PostureSample> local_samples(const SessionLog& log, const TaskPoint& x_star, double radius);

}  // namespace babbling
