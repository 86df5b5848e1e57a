#include "babbling/abundance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "babbling/errors.hpp"

namespace babbling {

void AbundanceConfig::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("abundance: alpha must be > 0");
  if (fb_steps < 1) throw ConfigError("abundance: fb_steps must be >= 1");
  if (trials < 0) throw ConfigError("abundance: trials must be >= 0");
  if (!(radius > 0.0)) throw ConfigError("abundance: radius must be > 0");
  if (!(scale > 0.0)) throw ConfigError("abundance: scale must be > 0");
  if (!(f_star >= 0.0)) throw ConfigError("abundance: f_star must be >= 0");
  if (max_evals_per_trial < 1) throw ConfigError("abundance: max_evals_per_trial must be >= 1");
  if (k_max < 1) throw ConfigError("abundance: k_max must be >= 1");
  if (n_eval < 1) throw ConfigError("abundance: n_eval must be >= 1");
  if (!(fallback_sigma > 0.0)) throw ConfigError("abundance: fallback_sigma must be > 0");
  if (min_samples_per_dim < 1) throw ConfigError("abundance: min_samples_per_dim must be >= 1");
}

std::string_view to_string(PostureTag tag) {
  switch (tag) {
    case PostureTag::GoalBabble: return "goalbabble";
    case PostureTag::Feedback: return "feedback";
    case PostureTag::Cma: return "cma";
  }
  return "unknown";
}

PostureTag posture_tag_from_string(std::string_view s) {
  if (s == "goalbabble") return PostureTag::GoalBabble;
  if (s == "feedback") return PostureTag::Feedback;
  if (s == "cma") return PostureTag::Cma;
  throw std::invalid_argument("unknown posture tag");
}

Eigen::MatrixXd PostureSet::pressures() const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(postures.size()), kMuscleCount);
  for (std::size_t i = 0; i < postures.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = postures[i].q.transpose();
  return m;
}

void PostureSet::append(const PostureSet& other) {
  postures.insert(postures.end(), other.postures.begin(), other.postures.end());
}

PostureSet PostureSet::from_samples(const std::vector<PostureSample>& samples, PostureTag tag) {
  PostureSet set;
  set.postures.reserve(samples.size());
  for (const auto& s : samples) set.postures.push_back({s.q, s.x, tag});
  return set;
}

namespace {

Eigen::VectorXd column_variance(const Eigen::MatrixXd& m) {
  if (m.rows() == 0) return Eigen::VectorXd::Zero(m.cols());
  const Eigen::RowVectorXd mean = m.colwise().mean();
  return (m.rowwise() - mean).array().square().colwise().mean().transpose();
}

Eigen::MatrixXd covariance_of(const Eigen::MatrixXd& m) {
  if (m.rows() == 0) return Eigen::MatrixXd::Zero(m.cols(), m.cols());
  const Eigen::MatrixXd centered = m.rowwise() - m.colwise().mean();
  Eigen::MatrixXd c = centered.transpose() * centered / static_cast<double>(m.rows());
  return 0.5 * (c + c.transpose());
}

}  // namespace

double mean_muscle_variance(const Eigen::MatrixXd& pressures) {
  return column_variance(pressures).mean();
}

std::vector<int> closest_goals(std::span<const TaskPoint> goals, const TaskPoint& x_star, int count) {
  std::vector<int> idx(goals.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return (goals[static_cast<std::size_t>(a)] - x_star).squaredNorm() <
           (goals[static_cast<std::size_t>(b)] - x_star).squaredNorm();
  });
  idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(std::max(count, 0))));
  return idx;
}

std::vector<int> select_spread_goals(std::span<const TaskPoint> goals, int count) {
  std::vector<int> chosen;
  if (goals.empty() || count <= 0) return chosen;
  TaskPoint centroid = TaskPoint::Zero();
  for (const auto& g : goals) centroid += g;
  centroid /= static_cast<double>(goals.size());
  chosen.push_back(closest_goals(goals, centroid, 1).front());

  std::vector<double> gap(goals.size());
  for (std::size_t i = 0; i < goals.size(); ++i) gap[i] = (goals[i] - goals[static_cast<std::size_t>(chosen[0])]).norm();
  while (static_cast<int>(chosen.size()) < std::min<int>(count, static_cast<int>(goals.size()))) {
    const auto it = std::max_element(gap.begin(), gap.end());
    const int next = static_cast<int>(it - gap.begin());
    chosen.push_back(next);
    for (std::size_t i = 0; i < goals.size(); ++i)
      gap[i] = std::min(gap[i], (goals[i] - goals[static_cast<std::size_t>(next)]).norm());
  }
  return chosen;
}

QueryResult query_abundance(const TaskPoint& x_star, const InverseModel& model, const PostureSet& local,
                            std::span<const TaskPoint> goals, Plant& plant, const AbundanceConfig& config,
                            const cma::CmaConfig& strategy, Rng& rng) {
  config.validate();
  strategy.validate();
  if (strategy.dim != kMuscleCount) throw ConfigError("abundance: CMA-ES dimension must be 24");
  QueryResult result;
  if (config.trials == 0) return result;
  const std::vector<int> starts = closest_goals(goals, x_star, config.trials);
  if (static_cast<int>(starts.size()) < config.trials)
    result.warnings.push_back("only " + std::to_string(starts.size()) + " goals available for " +
                              std::to_string(config.trials) + " trials");

  const Eigen::MatrixXd local_q = local.pressures();

  for (int start : starts) {
    TrialRecord trial;
    trial.start_goal = goals[static_cast<std::size_t>(start)];

    const FeedbackResult fb = feedback_reach_with(
        x_star, trial.start_goal, [&model](const TaskPoint& x) { return model.predict(x); },
        [&plant](const PressureVector& q) { return plant.forward(q); }, config.alpha, config.fb_steps,
        config.radius);
    const PostureSet q_fb = PostureSet::from_samples(fb.visited, PostureTag::Feedback);
    result.feedback.append(q_fb);
    trial.feedback_best_err = fb.best_err;
    trial.feedback_collected = static_cast<int>(q_fb.size());

    Eigen::MatrixXd pooled(local_q.rows() + static_cast<Eigen::Index>(q_fb.size()), kMuscleCount);
    pooled << local_q, q_fb.pressures();
    if (pooled.rows() < 2) {
      trial.sigma0 = config.fallback_sigma;
      trial.sigma_fallback = true;
      result.warnings.push_back("fewer than 2 local postures; sigma falls back to " +
                                std::to_string(config.fallback_sigma));
    } else {
      trial.sigma0 = std::sqrt(mean_muscle_variance(pooled));
      if (!(trial.sigma0 > 0.0)) {
        trial.sigma0 = config.fallback_sigma;
        trial.sigma_fallback = true;
        result.warnings.push_back("local postures have zero variance; sigma falls back");
      }
    }

    cma::EvolutionState state = cma::EvolutionState::initial(fb.best_q, trial.sigma0);
    double best_f = std::numeric_limits<double>::infinity();
    trial.stop = cma::StopReason::BudgetExhausted;
    while (trial.evaluations + strategy.lambda <= config.max_evals_per_trial) {
      cma::Population pop;
      try {
        pop = cma::ask(state, strategy, rng);
      } catch (const NumericalBreakdown&) {
        trial.stop = cma::StopReason::NumericalStop;
        break;
      }
      std::vector<double> fitness(pop.candidates.size());
      double gen_best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < pop.candidates.size(); ++i) {
        const ForwardResult fwd = plant.forward(pop.candidates[i]);
        const double err = (x_star - fwd.x).norm();
        fitness[i] = config.scale * err;
        gen_best = std::min(gen_best, fitness[i]);
        if (err < config.radius) {
          result.cma.postures.push_back({fwd.q, fwd.x, PostureTag::Cma});
          ++trial.collected;
        }
      }
      trial.evaluations += static_cast<long>(pop.candidates.size());
      best_f = std::min(best_f, gen_best);
      try {
        state = cma::tell(state, strategy, pop, fitness);
      } catch (const NumericalBreakdown&) {
        trial.stop = cma::StopReason::NumericalStop;
        break;
      }
      trial.history.push_back(cma::describe(state, gen_best, best_f));
      if (best_f <= config.f_star) {
        trial.stop = cma::StopReason::TargetReached;
        break;
      }
    }
    trial.best_f = best_f;
    result.trials.push_back(std::move(trial));
  }
  return result;
}

SetStatistics describe_set(const PostureSet& set, Plant& plant, const TaskPoint& x_star,
                           const AbundanceConfig& config, Rng& rng, std::vector<std::string>* log) {
  if (set.empty()) throw std::invalid_argument("describe_set: empty posture set");
  SetStatistics stats;
  stats.source_size = static_cast<int>(set.size());
  Eigen::MatrixXd commands;
  const long floor = static_cast<long>(config.min_samples_per_dim) * kMuscleCount;
  if (static_cast<long>(set.size()) < floor) {
    stats.mode = "raw";
    commands = set.pressures();
    if (log)
      log->push_back("set of " + std::to_string(set.size()) + " postures below " + std::to_string(floor) +
                     "; mixture skipped, raw postures executed");
  } else {
    stats.mode = "gmm";
    gmm::Selection sel = gmm::select_components(set.pressures(), config.k_max, rng);
    stats.k_best = sel.best_k;
    stats.bic = sel.bic;
    if (log) log->insert(log->end(), sel.log.begin(), sel.log.end());
    commands = gmm::sample(sel.model, config.n_eval, rng);
  }

  stats.executed.resize(commands.rows(), kMuscleCount);
  stats.errors.reserve(static_cast<std::size_t>(commands.rows()));
  for (Eigen::Index i = 0; i < commands.rows(); ++i) {
    const PressureVector q = commands.row(i).transpose();
    const ForwardResult fwd = plant.forward(q);
    stats.executed.row(i) = fwd.q.transpose();
    stats.errors.push_back((x_star - fwd.x).norm());
  }
  const double n = static_cast<double>(stats.errors.size());
  stats.error_mean = std::accumulate(stats.errors.begin(), stats.errors.end(), 0.0) / n;
  double var = 0.0;
  for (double e : stats.errors) var += (e - stats.error_mean) * (e - stats.error_mean);
  stats.error_std = std::sqrt(var / n);

  stats.variances = column_variance(stats.executed);
  stats.variance_mean = stats.variances.mean();
  stats.variance_std = std::sqrt((stats.variances.array() - stats.variance_mean).square().mean());
  stats.covariance = covariance_of(stats.executed);
  return stats;
}

AbundanceReport abundance_report(const PostureSet& baseline, const PostureSet& cma, Plant& plant,
                                 const TaskPoint& x_star, const AbundanceConfig& config, Rng& rng) {
  if (baseline.empty() || cma.empty()) throw std::invalid_argument("abundance_report: both sets must be non-empty");
  AbundanceReport report;
  report.goal = x_star;
  report.baseline = describe_set(baseline, plant, x_star, config, rng, &report.log);
  report.cma = describe_set(cma, plant, x_star, config, rng, &report.log);

  const Eigen::MatrixXd diff = (report.cma.covariance - report.baseline.covariance).cwiseAbs();
  double best = -1.0;
  for (int i = 0; i < kMuscleCount; ++i)
    for (int j = i; j < kMuscleCount; ++j)
      if (diff(i, j) > best) {
        best = diff(i, j);
        report.change_row = i;
        report.change_col = j;
      }
  report.change_baseline = report.baseline.covariance(report.change_row, report.change_col);
  report.change_cma = report.cma.covariance(report.change_row, report.change_col);
  return report;
}

}  // namespace babbling
