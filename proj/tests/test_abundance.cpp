#include <set>

#include <gtest/gtest.h>

#include "babbling/abundance.hpp"
#include "babbling/errors.hpp"

using namespace babbling;

namespace {

Plant quiet_plant() {
  PlantConfig c = PlantConfig::default_arm();
  c.obs_noise_std.setZero();
  return Plant(c);
}

PostureSet postures_around(const Plant& plant, const PressureVector& center, double spread, int n, Rng& rng) {
  PostureSet set;
  for (int i = 0; i < n; ++i) {
    PressureVector q;
    for (int m = 0; m < kMuscleCount; ++m) q[m] = center[m] + rng.normal(0.0, spread);
    q = clamp_pressure(q);
    set.postures.push_back({q, plant.kinematics(q), PostureTag::GoalBabble});
  }
  return set;
}

}  // namespace

TEST(AbundanceConfig, DefaultsAndValidation) {
  const AbundanceConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_DOUBLE_EQ(c.reach_tolerance(), 0.003);
  AbundanceConfig bad;
  bad.radius = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = AbundanceConfig{};
  bad.trials = -1;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = AbundanceConfig{};
  bad.k_max = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(PostureTag, StringRoundTrip) {
  for (auto t : {PostureTag::GoalBabble, PostureTag::Feedback, PostureTag::Cma})
    EXPECT_EQ(posture_tag_from_string(to_string(t)), t);
  EXPECT_THROW(posture_tag_from_string("other"), std::invalid_argument);
}

TEST(MeanMuscleVariance, PopulationVariance) {
  Eigen::MatrixXd m(2, kMuscleCount);
  m.row(0).setZero();
  m.row(1).setConstant(0.2);
  EXPECT_NEAR(mean_muscle_variance(m), 0.01, 1e-15);
  m.row(1)(0) = 0.0;
  EXPECT_NEAR(mean_muscle_variance(m), 0.01 * 23.0 / 24.0, 1e-15);
}

TEST(ClosestGoals, OrderedWithStableTies) {
  const std::vector<TaskPoint> goals = {{1, 0, 0}, {0.5, 0, 0}, {-1, 0, 0}, {0, 2, 0}};
  EXPECT_EQ(closest_goals(goals, TaskPoint::Zero(), 3), (std::vector<int>{1, 0, 2}));
  EXPECT_EQ(closest_goals(goals, TaskPoint::Zero(), 10).size(), 4u);
  EXPECT_TRUE(closest_goals(goals, TaskPoint::Zero(), 0).empty());
}

TEST(SelectSpreadGoals, FarthestPointOrder) {
  std::vector<TaskPoint> line;
  for (int i = 0; i <= 10; ++i) line.emplace_back(i, 0, 0);
  EXPECT_EQ(select_spread_goals(line, 3), (std::vector<int>{5, 0, 10}));
  EXPECT_EQ(select_spread_goals(line, 50).size(), line.size());
  EXPECT_TRUE(select_spread_goals({}, 3).empty());
  const auto all = select_spread_goals(line, 11);
  EXPECT_EQ(std::set<int>(all.begin(), all.end()).size(), 11u);
}

TEST(QueryAbundance, NoTrialsGivesEmptyResult) {
  Plant plant = quiet_plant();
  const InverseModel model = InverseModel::initialized(plant.home().x_home, plant.home().q_home);
  AbundanceConfig cfg;
  cfg.trials = 0;
  Rng rng(1);
  const std::vector<TaskPoint> goals = {plant.home().x_home};
  const QueryResult r = query_abundance(plant.home().x_home, model, {}, goals, plant, cfg,
                                        cma::CmaConfig::defaults(kMuscleCount), rng);
  EXPECT_TRUE(r.cma.empty());
  EXPECT_TRUE(r.feedback.empty());
  EXPECT_TRUE(r.trials.empty());
}

TEST(QueryAbundance, CollectedPosturesLieWithinRadius) {
  Plant plant(PlantConfig::default_arm());
  const TaskPoint x_star = plant.home().x_home;
  const InverseModel model = InverseModel::initialized(x_star, plant.home().q_home);
  Rng rng(2);
  const PostureSet local = postures_around(plant, plant.home().q_home, 0.01, 30, rng);
  const std::vector<TaskPoint> goals = {x_star + TaskPoint(0.03, 0, 0), x_star + TaskPoint(0, 0.03, 0),
                                        x_star + TaskPoint(0, 0, 0.06)};
  AbundanceConfig cfg;
  cfg.trials = 2;
  cfg.max_evals_per_trial = 130;
  const QueryResult r =
      query_abundance(x_star, model, local, goals, plant, cfg, cma::CmaConfig::defaults(kMuscleCount), rng);
  ASSERT_EQ(r.trials.size(), 2u);
  EXPECT_EQ(r.trials[0].start_goal, goals[0]);
  EXPECT_EQ(r.trials[1].start_goal, goals[1]);
  EXPECT_FALSE(r.cma.empty());
  int collected = 0;
  for (const auto& t : r.trials) {
    EXPECT_LE(t.evaluations, 130);
    EXPECT_GT(t.sigma0, 0.0);
    EXPECT_FALSE(t.sigma_fallback);
    EXPECT_EQ(t.history.size() * 13u, static_cast<std::size_t>(t.evaluations));
    collected += t.collected;
  }
  EXPECT_EQ(static_cast<int>(r.cma.size()), collected);
  for (const auto& p : r.cma.postures) {
    EXPECT_LT((p.x - x_star).norm(), cfg.radius);
    EXPECT_EQ(p.tag, PostureTag::Cma);
    EXPECT_EQ(p.q, clamp_pressure(p.q));
  }
  for (const auto& p : r.feedback.postures) {
    EXPECT_LT((p.x - x_star).norm(), cfg.radius);
    EXPECT_EQ(p.tag, PostureTag::Feedback);
  }
}

TEST(QueryAbundance, SigmaFallsBackWithoutLocalPostures) {
  Plant plant(PlantConfig::default_arm());
  const InverseModel model = InverseModel::initialized(plant.home().x_home, plant.home().q_home);
  // A target far outside reach: feedback collects nothing and no local set exists.
  const TaskPoint x_star(5.0, 5.0, 5.0);
  const std::vector<TaskPoint> goals = {plant.home().x_home};
  AbundanceConfig cfg;
  cfg.trials = 1;
  cfg.max_evals_per_trial = 26;
  Rng rng(3);
  const QueryResult r =
      query_abundance(x_star, model, {}, goals, plant, cfg, cma::CmaConfig::defaults(kMuscleCount), rng);
  ASSERT_EQ(r.trials.size(), 1u);
  EXPECT_TRUE(r.trials[0].sigma_fallback);
  EXPECT_EQ(r.trials[0].sigma0, cfg.fallback_sigma);
  EXPECT_EQ(r.trials[0].stop, cma::StopReason::BudgetExhausted);
  EXPECT_TRUE(r.cma.empty());
  EXPECT_FALSE(r.warnings.empty());
}

TEST(QueryAbundance, RejectsWrongStrategyDimension) {
  Plant plant = quiet_plant();
  const InverseModel model = InverseModel::initialized(plant.home().x_home, plant.home().q_home);
  Rng rng(4);
  const std::vector<TaskPoint> goals = {plant.home().x_home};
  EXPECT_THROW(query_abundance(plant.home().x_home, model, {}, goals, plant, AbundanceConfig{},
                               cma::CmaConfig::defaults(5), rng),
               ConfigError);
}

TEST(DescribeSet, SmallSetsAreExecutedRaw) {
  Plant plant = quiet_plant();
  PostureSet set;
  for (int i = 0; i < 5; ++i) set.postures.push_back({plant.home().q_home, plant.home().x_home, PostureTag::Cma});
  const TaskPoint x_star = plant.home().x_home + TaskPoint(0.003, 0.004, 0);
  std::vector<std::string> log;
  Rng rng(5);
  const SetStatistics s = describe_set(set, plant, x_star, AbundanceConfig{}, rng, &log);
  EXPECT_EQ(s.mode, "raw");
  EXPECT_EQ(s.source_size, 5);
  ASSERT_EQ(s.errors.size(), 5u);
  EXPECT_NEAR(s.error_mean, 0.005, 1e-12);
  EXPECT_NEAR(s.error_std, 0.0, 1e-12);
  EXPECT_EQ(s.variance_mean, 0.0);
  EXPECT_EQ(s.covariance, Eigen::MatrixXd::Zero(kMuscleCount, kMuscleCount));
  EXPECT_EQ(log.size(), 1u);
  EXPECT_THROW(describe_set(PostureSet{}, plant, x_star, AbundanceConfig{}, rng, nullptr), std::invalid_argument);
}

TEST(DescribeSet, LargeSetsAreModelledByMixture) {
  Plant plant = quiet_plant();
  Rng rng(6);
  const PostureSet set = postures_around(plant, plant.home().q_home, 0.02, 120, rng);
  AbundanceConfig cfg;
  cfg.k_max = 2;
  cfg.n_eval = 80;
  const SetStatistics s = describe_set(set, plant, plant.home().x_home, cfg, rng, nullptr);
  EXPECT_EQ(s.mode, "gmm");
  EXPECT_GE(s.k_best, 1);
  EXPECT_LE(s.k_best, 2);
  EXPECT_EQ(s.executed.rows(), 80);
  EXPECT_EQ(s.errors.size(), 80u);
  // Mixture draws reproduce the source spread; clamping only shrinks it.
  EXPECT_GT(s.variance_mean, 0.5 * 0.02 * 0.02);
  EXPECT_LT(s.variance_mean, 1.5 * 0.02 * 0.02);
  EXPECT_NEAR(s.variances.mean(), s.variance_mean, 1e-15);
  EXPECT_EQ(s.covariance, s.covariance.transpose());
}

TEST(AbundanceReport, IdenticalSetsShowNoChange) {
  Plant plant = quiet_plant();
  Rng rng(7);
  const PostureSet set = postures_around(plant, plant.home().q_home, 0.02, 10, rng);
  const AbundanceReport r = abundance_report(set, set, plant, plant.home().x_home, AbundanceConfig{}, rng);
  EXPECT_EQ(r.baseline.mode, "raw");
  EXPECT_EQ(r.baseline.errors, r.cma.errors);
  EXPECT_EQ(r.baseline.covariance, r.cma.covariance);
  EXPECT_EQ(r.change_baseline, r.change_cma);
  EXPECT_LE(r.change_row, r.change_col);
  EXPECT_THROW(abundance_report(set, PostureSet{}, plant, plant.home().x_home, AbundanceConfig{}, rng),
               std::invalid_argument);
}
