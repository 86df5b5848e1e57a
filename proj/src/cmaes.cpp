#include "babbling/cmaes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "babbling/errors.hpp"

namespace babbling::cma {

namespace {

void fill_rates(CmaConfig& c) {
  const double n = c.dim;
  c.mu_eff = 1.0 / c.weights.squaredNorm();
  c.c_sigma = (c.mu_eff + 2.0) / (n + c.mu_eff + 5.0);
  c.d_sigma = 1.0 + c.c_sigma + 2.0 * std::max(0.0, std::sqrt((c.mu_eff - 1.0) / (n + 1.0)) - 1.0);
  c.c_c = 4.0 / (n + 4.0);
  c.c_cov = 2.0 / ((n + 1.3) * (n + 1.3) + c.mu_eff);
  c.chi_n = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
}

}  // namespace

CmaConfig CmaConfig::defaults(int dim, int lambda) {
  if (dim < 1) throw std::invalid_argument("CmaConfig: dim must be >= 1");
  if (lambda <= 0) lambda = 4 + static_cast<int>(std::floor(3.0 * std::log(dim)));
  if (lambda < 2) throw std::invalid_argument("CmaConfig: lambda must be >= 2");
  const int mu = lambda / 2;
  Eigen::VectorXd w(mu);
  for (int i = 0; i < mu; ++i) w[i] = std::log(mu + 0.5) - std::log(i + 1.0);
  w /= w.sum();
  return with_weights(dim, lambda, std::move(w));
}

CmaConfig CmaConfig::with_weights(int dim, int lambda, Eigen::VectorXd weights) {
  CmaConfig c;
  c.dim = dim;
  c.lambda = lambda;
  c.mu = static_cast<int>(weights.size());
  c.weights = std::move(weights);
  fill_rates(c);
  c.validate();
  return c;
}

void CmaConfig::validate() const {
  if (dim < 1) throw std::invalid_argument("CmaConfig: dim must be >= 1");
  if (lambda < 2 || mu < 1 || mu > lambda) throw std::invalid_argument("CmaConfig: need 1 <= mu <= lambda, lambda >= 2");
  if (weights.size() != mu) throw std::invalid_argument("CmaConfig: weights must have mu entries");
  for (int i = 0; i < mu; ++i) {
    if (!(weights[i] > 0.0)) throw std::invalid_argument("CmaConfig: weights must be positive");
    if (i > 0 && weights[i] > weights[i - 1]) throw std::invalid_argument("CmaConfig: weights must be non-increasing");
  }
  if (std::abs(weights.sum() - 1.0) > 1e-12) throw std::invalid_argument("CmaConfig: weights must sum to 1");
  if (!(c_sigma > 0.0 && c_sigma < 1.0) || !(d_sigma > 0.0) || !(c_c > 0.0 && c_c <= 1.0) ||
      !(c_cov > 0.0 && c_cov < 1.0) || !(chi_n > 0.0))
    throw std::invalid_argument("CmaConfig: learning rates out of range");
}

EvolutionState EvolutionState::initial(const Eigen::VectorXd& x0, double sigma0) {
  if (!(sigma0 > 0.0)) throw std::invalid_argument("EvolutionState: sigma0 must be > 0");
  EvolutionState s;
  const auto n = x0.size();
  s.mean = x0;
  s.sigma = sigma0;
  s.cov = Eigen::MatrixXd::Identity(n, n);
  s.path_sigma = Eigen::VectorXd::Zero(n);
  s.path_cov = Eigen::VectorXd::Zero(n);
  return s;
}

Eigen::MatrixXd repair_covariance(const Eigen::MatrixXd& cov) {
  const Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success || !eig.eigenvalues().allFinite())
    throw NumericalBreakdown("covariance eigendecomposition failed");
  const double top = eig.eigenvalues().maxCoeff();
  if (!(top > 0.0)) throw NumericalBreakdown("covariance has no positive eigenvalue");
  const double floor = 1e-14 * top;
  if (eig.eigenvalues().minCoeff() >= floor) return sym;
  const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(floor);
  Eigen::MatrixXd fixed = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (fixed + fixed.transpose());
}

namespace {

struct Factorization {
  Eigen::MatrixXd basis;   // B
  Eigen::VectorXd scales;  // sqrt of eigenvalues (D)
};

Factorization factorize(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success || !eig.eigenvalues().allFinite() || eig.eigenvalues().minCoeff() <= 0.0) {
    eig.compute(repair_covariance(cov));
    if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0)
      throw NumericalBreakdown("covariance factorization failed after repair");
  }
  return {eig.eigenvectors(), eig.eigenvalues().cwiseSqrt()};
}

}  // namespace

Population ask(const EvolutionState& state, const CmaConfig& config, Rng& rng) {
  if (state.mean.size() != config.dim) throw std::invalid_argument("ask: dimension mismatch");
  const Factorization f = factorize(state.cov);
  Population pop;
  pop.generation = state.generation;
  pop.candidates.reserve(static_cast<std::size_t>(config.lambda));
  pop.steps.reserve(static_cast<std::size_t>(config.lambda));
  for (int i = 0; i < config.lambda; ++i) {
    const Eigen::VectorXd z = rng.normal_vector(config.dim);
    Eigen::VectorXd y = f.basis * f.scales.cwiseProduct(z);
    pop.candidates.push_back(state.mean + state.sigma * y);
    pop.steps.push_back(std::move(y));
  }
  return pop;
}

EvolutionState tell(const EvolutionState& state, const CmaConfig& config, const Population& population,
                    const std::vector<double>& fitnesses) {
  const std::size_t lambda = population.candidates.size();
  if (fitnesses.size() != lambda || population.steps.size() != lambda)
    throw MismatchedPopulation("tell: candidate and fitness counts differ");
  if (static_cast<int>(lambda) < config.mu) throw MismatchedPopulation("tell: population smaller than mu");
  if (population.generation != state.generation)
    throw MismatchedPopulation("tell: population does not belong to this generation");
  for (double f : fitnesses)
    if (!std::isfinite(f)) throw std::invalid_argument("tell: fitness values must be finite");

  std::vector<std::size_t> order(lambda);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return fitnesses[a] < fitnesses[b]; });

  const auto n = state.mean.size();
  Eigen::VectorXd y_w = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < config.mu; ++i) y_w += config.weights[i] * population.steps[order[static_cast<std::size_t>(i)]];

  EvolutionState next = state;
  next.mean = state.mean + state.sigma * y_w;

  // C^{-1/2} y_w via the eigenbasis of the sampling covariance.
  const Factorization f = factorize(state.cov);
  const Eigen::VectorXd whitened = f.basis * (f.basis.transpose() * y_w).cwiseQuotient(f.scales);

  const double cs = config.c_sigma;
  next.path_sigma = (1.0 - cs) * state.path_sigma + std::sqrt(1.0 - (1.0 - cs) * (1.0 - cs)) *
                                                        std::sqrt(config.mu_eff) * whitened;
  next.sigma = state.sigma * std::exp((cs / config.d_sigma) * (next.path_sigma.norm() / config.chi_n - 1.0));

  const double cc = config.c_c;
  next.path_cov = (1.0 - cc) * state.path_cov +
                  std::sqrt(1.0 - (1.0 - cc) * (1.0 - cc)) * std::sqrt(config.mu_eff) * y_w;
  Eigen::MatrixXd cov = (1.0 - config.c_cov) * state.cov + config.c_cov * next.path_cov * next.path_cov.transpose();
  next.cov = repair_covariance(cov);

  next.generation = state.generation + 1;
  next.evaluations = state.evaluations + static_cast<long>(lambda);
  return next;
}

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::TargetReached: return "target_reached";
    case StopReason::BudgetExhausted: return "budget_exhausted";
    case StopReason::NumericalStop: return "numerical_stop";
  }
  return "unknown";
}

GenerationRecord describe(const EvolutionState& state, double best_f, double best_ever) {
  GenerationRecord r;
  r.generation = state.generation;
  r.evaluations = state.evaluations;
  r.best_f = best_f;
  r.best_ever = best_ever;
  r.sigma = state.sigma;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(state.cov, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  r.axis_ratio = lo > 0.0 ? std::sqrt(hi / lo) : std::numeric_limits<double>::infinity();
  const Eigen::VectorXd diag = state.cov.diagonal();
  r.min_std = state.sigma * std::sqrt(diag.minCoeff());
  r.max_std = state.sigma * std::sqrt(diag.maxCoeff());
  return r;
}

OptimizeResult optimize(const Objective& objective, const Eigen::VectorXd& x0, double sigma0,
                        const CmaConfig& config, const StopRules& stop, Rng& rng) {
  if (!(sigma0 > 0.0)) throw std::invalid_argument("optimize: sigma0 must be > 0");
  OptimizeResult result;
  EvolutionState state = EvolutionState::initial(x0, sigma0);
  result.best_x = x0;

  while (true) {
    if (result.evaluations + config.lambda > stop.max_evaluations) {
      result.stop = StopReason::BudgetExhausted;
      break;
    }
    Population pop;
    try {
      pop = ask(state, config, rng);
    } catch (const NumericalBreakdown&) {
      result.stop = StopReason::NumericalStop;
      break;
    }
    std::vector<double> fitness(pop.candidates.size());
    double gen_best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pop.candidates.size(); ++i) {
      fitness[i] = objective(pop.candidates[i]);
      ++result.evaluations;
      gen_best = std::min(gen_best, fitness[i]);
      if (fitness[i] < result.best_f) {
        result.best_f = fitness[i];
        result.best_x = pop.candidates[i];
      }
    }
    try {
      state = tell(state, config, pop, fitness);
    } catch (const NumericalBreakdown&) {
      result.stop = StopReason::NumericalStop;
      break;
    }
    result.history.push_back(describe(state, gen_best, result.best_f));
    if (result.best_f <= stop.f_target) {
      result.stop = StopReason::TargetReached;
      break;
    }
    if (!(state.sigma > stop.min_sigma) || !std::isfinite(state.sigma)) {
      result.stop = StopReason::NumericalStop;
      break;
    }
  }
  result.final_state = std::move(state);
  return result;
}

}  // namespace babbling::cma
