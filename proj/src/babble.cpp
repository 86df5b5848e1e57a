#include "babbling/babble.hpp"

#include <numeric>
#include <stdexcept>

#include "babbling/errors.hpp"

namespace babbling {

void BabbleConfig::validate() const {
  if (!(delta_x > 0.0)) throw ConfigError("babble: delta_x must be > 0");
  if (!(delta_q > 0.0)) throw ConfigError("babble: delta_q must be > 0");
  if (!(p_home >= 0.0 && p_home <= 1.0)) throw ConfigError("babble: p_home must be in [0, 1]");
  if (!(rate_hz > 0.0)) throw ConfigError("babble: rate_hz must be > 0");
  if (total_samples < 0) throw ConfigError("babble: total_samples must be >= 0");
  if (eval_every < 0) throw ConfigError("babble: eval_every must be >= 0");
  if (!(noise_sigma > 0.0)) throw ConfigError("babble: noise_sigma must be > 0");
  if (!(noise_sigma_delta >= 0.0)) throw ConfigError("babble: noise_sigma_delta must be >= 0");
  if (!(fb_alpha > 0.0)) throw ConfigError("babble: fb_alpha must be > 0");
  if (fb_steps < 1) throw ConfigError("babble: fb_steps must be >= 1");
  if (!(fb_radius > 0.0)) throw ConfigError("babble: fb_radius must be > 0");
}

NoiseState NoiseState::initial(double sigma, double sigma_delta, Rng& rng) {
  if (!(sigma > 0.0)) throw std::invalid_argument("NoiseState: sigma must be > 0");
  NoiseState s;
  s.sigma = sigma;
  s.sigma_delta = sigma_delta;
  rng.fill_normal(s.A, sigma);
  rng.fill_normal(s.b, sigma);
  return s;
}

PressureVector noise_eval(const NoiseState& state, const TaskPoint& x_star) {
  return state.A * x_star + state.b;
}

NoiseState noise_step(const NoiseState& state, Rng& rng) {
  if (!(state.sigma > 0.0)) throw std::invalid_argument("noise_step: sigma must be > 0");
  NoiseState next = state;
  if (state.sigma_delta == 0.0) return next;
  const double s2 = state.sigma * state.sigma;
  const double norm = std::sqrt(s2 / (s2 + state.sigma_delta * state.sigma_delta));
  for (Eigen::Index j = 0; j < next.A.cols(); ++j)
    for (Eigen::Index i = 0; i < next.A.rows(); ++i)
      next.A(i, j) = norm * (next.A(i, j) + state.sigma_delta * rng.normal());
  for (Eigen::Index i = 0; i < next.b.size(); ++i)
    next.b[i] = norm * (next.b[i] + state.sigma_delta * rng.normal());
  return next;
}

namespace {
constexpr double kReachTolerance = 1e-9;  // relative slack on delta_x comparisons
}

TaskPoint next_target(const TaskPoint& x_star, const TaskPoint& goal, double delta_x) {
  if (!(delta_x > 0.0)) throw std::invalid_argument("next_target: delta_x must be > 0");
  const TaskPoint diff = goal - x_star;
  const double dist = diff.norm();
  if (dist == 0.0) throw DegenerateDirection("next_target: target already at goal");
  if (dist <= delta_x * (1.0 + kReachTolerance)) return goal;
  return x_star + (delta_x / dist) * diff;
}

bool goal_reached(const TaskPoint& x_star, const TaskPoint& goal, double delta_x) {
  return (goal - x_star).norm() < delta_x * (1.0 - kReachTolerance);
}

SampleWeight sample_weight(const TaskPoint& x_t, const TaskPoint& x_prev, const TaskPoint& x_star_t,
                           const TaskPoint& x_star_prev, const PressureVector& q_t,
                           const PressureVector& q_prev) {
  SampleWeight w;
  const TaskPoint intended = x_star_t - x_star_prev;
  const TaskPoint actual = x_t - x_prev;
  const double ni = intended.norm();
  const double na = actual.norm();
  double cosine = 0.0;
  if (ni > 0.0 && na > 0.0) cosine = std::clamp(intended.dot(actual) / (ni * na), -1.0, 1.0);
  w.w_dir = 0.5 * (1.0 + cosine);
  const double dq = (q_t - q_prev).norm();
  w.w_eff = dq > 0.0 ? na / dq : 0.0;
  w.w = w.w_dir * w.w_eff;
  return w;
}

std::vector<PressureVector> home_return(const PressureVector& q_star, const PressureVector& q_home,
                                        double delta_q) {
  if (!(delta_q > 0.0)) throw std::invalid_argument("home_return: delta_q must be > 0");
  std::vector<PressureVector> via;
  PressureVector q = q_star;
  double dist = (q_home - q).norm();
  while (dist >= delta_q) {
    q += (delta_q / dist) * (q_home - q);
    via.push_back(q);
    dist = (q_home - q).norm();
  }
  return via;
}

FeedbackResult feedback_reach(const TaskPoint& x_star, const InverseModel& model, Plant& plant,
                              double alpha, int steps, double radius) {
  if (!(alpha > 0.0) || steps < 1)
    throw std::invalid_argument("feedback_reach: need alpha > 0 and steps >= 1");
  return feedback_reach_with(
      x_star, x_star, [&model](const TaskPoint& x) { return model.predict(x); },
      [&plant](const PressureVector& q) { return plant.forward(q); }, alpha, steps, radius);
}

ErrorReport ErrorReport::from_errors(std::vector<double> errors, double bin_width, int bins) {
  ErrorReport r;
  r.errors = std::move(errors);
  r.bin_width = bin_width;
  r.histogram.assign(static_cast<std::size_t>(bins), 0);
  if (r.errors.empty()) return r;
  const double n = static_cast<double>(r.errors.size());
  r.mean = std::accumulate(r.errors.begin(), r.errors.end(), 0.0) / n;
  double var = 0.0;
  for (double e : r.errors) var += (e - r.mean) * (e - r.mean);
  r.stddev = std::sqrt(var / n);
  for (double e : r.errors) {
    auto bin = static_cast<long>(e / bin_width);
    bin = std::clamp<long>(bin, 0, bins - 1);
    ++r.histogram[static_cast<std::size_t>(bin)];
  }
  return r;
}

ErrorReport evaluate(const InverseModel& model, const GoalGrid& goals, Plant& plant, bool use_feedback,
                     double alpha, int steps) {
  if (goals.goals.empty()) throw std::invalid_argument("evaluate: empty goal set");
  std::vector<double> errors;
  errors.reserve(goals.goals.size());
  for (const auto& g : goals.goals) {
    if (use_feedback) {
      errors.push_back(feedback_reach(g, model, plant, alpha, steps).best_err);
    } else {
      errors.push_back((g - plant.forward(model.predict(g)).x).norm());
    }
  }
  return ErrorReport::from_errors(std::move(errors));
}

namespace {

class Session {
 public:
  Session(const BabbleConfig& config, const InverseModelConfig& model_config, Plant& plant,
          const GoalGrid& grid, Rng& rng)
      : config_(config),
        plant_(plant),
        grid_(grid),
        rng_(rng),
        model_(InverseModel::initialized(plant.home().x_home, plant.home().q_home, model_config)),
        x_star_(plant.home().x_home),
        x_star_prev_(plant.home().x_home),
        x_prev_(plant.home().x_home),
        q_prev_(plant.home().q_home),
        q_last_(plant.home().q_home) {}

  SessionResult run() {
    if (config_.total_samples == 0) return {std::move(model_), std::move(log_)};
    if (grid_.goals.empty()) throw std::invalid_argument("run_session: empty goal grid");
    log_.samples.reserve(static_cast<std::size_t>(config_.total_samples));
    noise_ = NoiseState::initial(config_.noise_sigma, config_.noise_sigma_delta, rng_);

    while (!done()) {
      if (rng_.uniform() < config_.p_home) {
        return_home();
      } else {
        goal_trial(grid_.goals[rng_.index(grid_.goals.size())]);
      }
    }
    return {std::move(model_), std::move(log_)};
  }

 private:
  bool done() const { return t_ >= config_.total_samples; }

  // Executes one command, weights the outcome and trains on it. When
  // `target` is null the observed position stands in for the target.
  void execute(const PressureVector& q_cmd, const TaskPoint* target, bool home) {
    const ForwardResult fwd = plant_.forward(q_cmd);
    const TaskPoint x_star = target ? *target : fwd.x;
    const SampleWeight weight = sample_weight(fwd.x, x_prev_, x_star, x_star_prev_, fwd.q, q_prev_);
    model_.update(fwd.x, fwd.q, weight.w);

    SampleRecord rec;
    rec.t = t_;
    rec.time_s = static_cast<double>(t_) / config_.rate_hz;
    rec.x_star = x_star;
    rec.x = fwd.x;
    rec.q_star = q_cmd;
    rec.q = fwd.q;
    rec.w = weight.w;
    rec.home = home;
    log_.samples.push_back(rec);

    x_prev_ = fwd.x;
    q_prev_ = fwd.q;
    x_star_prev_ = x_star;
    q_last_ = fwd.q;
    ++t_;
    if (config_.eval_every > 0 && t_ % config_.eval_every == 0) snapshot();
  }

  void return_home() {
    const HomeState& home = plant_.home();
    if ((q_last_ - home.q_home).norm() == 0.0 && x_star_ == home.x_home) {
      // Already resting at home; a repeated home sample carries no information.
      hold();
      return;
    }
    for (const auto& via : home_return(q_last_, home.q_home, config_.delta_q)) {
      if (done()) return;
      execute(via, nullptr, true);
    }
    if (done()) return;
    x_star_ = home.x_home;
    execute(home.q_home, &home.x_home, true);
  }

  void goal_trial(const TaskPoint& goal) {
    if ((goal - x_star_).norm() == 0.0) {
      log_.warnings.push_back("t=" + std::to_string(t_) + ": goal coincides with current target; skipped");
      hold();
      return;
    }
    do {
      x_star_ = next_target(x_star_, goal, config_.delta_x);
      explore_at(x_star_);
    } while (!done() && !goal_reached(x_star_, goal, config_.delta_x));
  }

  // Perturbed inverse estimate at the current target.
  void explore_at(const TaskPoint& target) {
    const PressureVector q_cmd = model_.predict(target) + noise_eval(noise_, target);
    execute(q_cmd, &target, false);
    noise_ = noise_step(noise_, rng_);
  }

  void hold() { explore_at(x_star_); }

  void snapshot() {
    EvalSnapshot snap;
    snap.samples = t_;
    snap.units = static_cast<int>(model_.units().size());
    snap.plain = evaluate(model_, grid_, plant_, false);
    snap.feedback = evaluate(model_, grid_, plant_, true, config_.fb_alpha, config_.fb_steps);
    log_.snapshots.push_back(std::move(snap));
  }

  const BabbleConfig& config_;
  Plant& plant_;
  const GoalGrid& grid_;
  Rng& rng_;
  InverseModel model_;
  SessionLog log_;
  NoiseState noise_;
  long t_ = 0;
  TaskPoint x_star_;
  TaskPoint x_star_prev_;
  TaskPoint x_prev_;
  PressureVector q_prev_;
  PressureVector q_last_;
};

}  // namespace

SessionResult run_session(const BabbleConfig& config, const InverseModelConfig& model_config,
                          Plant& plant, const GoalGrid& grid, Rng& rng) {
  config.validate();
  return Session(config, model_config, plant, grid, rng).run();
}

std::vector<PostureSample> local_samples(const SessionLog& log, const TaskPoint& x_star, double radius) {
  std::vector<PostureSample> out;
  for (const auto& s : log.samples)
    if ((s.x - x_star).norm() < radius) out.push_back({s.q, s.x});
  return out;
}

}  // namespace babbling
