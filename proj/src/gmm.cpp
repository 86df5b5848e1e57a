#include "babbling/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "babbling/errors.hpp"

namespace babbling::gmm {

namespace {

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& data, const Eigen::VectorXd& mean) {
  const Eigen::MatrixXd centered = data.rowwise() - mean.transpose();
  return centered.transpose() * centered / static_cast<double>(data.rows());
}

// Per-sample log density of one component; throws SingularComponent when
// the covariance is not positive definite.
Eigen::VectorXd log_density(const Eigen::MatrixXd& data, const GaussianComponent& c) {
  Eigen::LLT<Eigen::MatrixXd> llt(c.cov);
  if (llt.info() != Eigen::Success) throw SingularComponent("component covariance is not positive definite");
  const auto& L = llt.matrixL();
  Eigen::MatrixXd centered = (data.rowwise() - c.mean.transpose()).transpose();
  L.solveInPlace(centered);
  const Eigen::MatrixXd lmat = llt.matrixL();
  const double logdet = 2.0 * lmat.diagonal().array().log().sum();
  const double d = static_cast<double>(data.cols());
  const double constant = -0.5 * (d * std::log(2.0 * std::numbers::pi) + logdet);
  return (constant - 0.5 * centered.colwise().squaredNorm().array()).matrix().transpose();
}

// Log-likelihood and row-normalized responsibilities (N x K).
double expectation(const Eigen::MatrixXd& data, const MixtureModel& model, Eigen::MatrixXd* resp) {
  const auto n = data.rows();
  const int k = model.size();
  Eigen::MatrixXd logp(n, k);
  for (int j = 0; j < k; ++j)
    logp.col(j) = log_density(data, model.components[static_cast<std::size_t>(j)]).array() +
                  std::log(model.components[static_cast<std::size_t>(j)].weight);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double top = logp.row(i).maxCoeff();
    const double lse = top + std::log((logp.row(i).array() - top).exp().sum());
    total += lse;
    if (resp) resp->row(i) = (logp.row(i).array() - lse).exp();
  }
  return total;
}

std::vector<Eigen::Index> seed_centers(const Eigen::MatrixXd& data, int k, Rng& rng) {
  const auto n = data.rows();
  std::vector<Eigen::Index> centers;
  centers.push_back(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n))));
  Eigen::VectorXd d2 = (data.rowwise() - data.row(centers[0])).rowwise().squaredNorm();
  while (static_cast<int>(centers.size()) < k) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (pick = 0; pick < n - 1; ++pick) {
        u -= d2[pick];
        if (u < 0.0) break;
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
    }
    centers.push_back(pick);
    d2 = d2.cwiseMin((data.rowwise() - data.row(pick)).rowwise().squaredNorm());
  }
  return centers;
}

}  // namespace

double MixtureModel::log_likelihood(const Eigen::MatrixXd& data) const {
  return expectation(data, *this, nullptr);
}

Eigen::VectorXd MixtureModel::mean() const {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(dim());
  for (const auto& c : components) m += c.weight * c.mean;
  return m;
}

Eigen::MatrixXd MixtureModel::covariance() const {
  const Eigen::VectorXd m = mean();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim(), dim());
  for (const auto& c : components) {
    const Eigen::VectorXd d = c.mean - m;
    cov += c.weight * (c.cov + d * d.transpose());
  }
  return cov;
}

FitResult fit_gmm(const Eigen::MatrixXd& data, int k, Rng& rng, const EmOptions& options) {
  const auto n = data.rows();
  const auto d = data.cols();
  if (k < 1) throw std::invalid_argument("fit_gmm: k must be >= 1");
  if (n < k) throw std::invalid_argument("fit_gmm: fewer samples than components");
  const Eigen::MatrixXd ridge = options.regularization * Eigen::MatrixXd::Identity(d, d);

  const Eigen::VectorXd global_mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd global_cov = sample_covariance(data, global_mean) + ridge;

  FitResult fit;
  auto& comps = fit.model.components;
  for (Eigen::Index idx : seed_centers(data, k, rng))
    comps.push_back({1.0 / k, data.row(idx).transpose(), global_cov});

  std::vector<int> reseeded(static_cast<std::size_t>(k), 0);
  Eigen::MatrixXd resp(n, k);
  double previous = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const double ll = expectation(data, fit.model, &resp);
    fit.log_likelihood.push_back(ll);
    fit.iterations = iter + 1;
    if (std::abs(ll - previous) < options.tolerance) {
      fit.converged = true;
      break;
    }
    previous = ll;

    bool reseed_now = false;
    for (int j = 0; j < k; ++j) {
      auto& c = comps[static_cast<std::size_t>(j)];
      const Eigen::VectorXd r = resp.col(j);
      const double nk = r.sum();
      bool collapsed = nk < options.collapse_floor;
      if (!collapsed) {
        c.weight = nk / static_cast<double>(n);
        c.mean = data.transpose() * r / nk;
        const Eigen::MatrixXd centered = data.rowwise() - c.mean.transpose();
        c.cov = centered.transpose() * r.asDiagonal() * centered / nk + ridge;
        collapsed = Eigen::LLT<Eigen::MatrixXd>(c.cov).info() != Eigen::Success;
      }
      if (collapsed) {
        if (reseeded[static_cast<std::size_t>(j)]++)
          throw SingularComponent("fit_gmm: component " + std::to_string(j) + " collapsed twice");
        c.mean = data.row(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)))).transpose();
        c.cov = global_cov;
        c.weight = 1.0 / k;
        ++fit.reseeds;
        reseed_now = true;
      }
    }
    if (reseed_now) {
      double total = 0.0;
      for (const auto& c : comps) total += c.weight;
      for (auto& c : comps) c.weight /= total;
      fit.reseed_iterations.push_back(iter + 1);
      previous = -std::numeric_limits<double>::infinity();
    }
  }
  return fit;
}

long parameter_count(int k, int dim) {
  const long kk = k, dd = dim;
  return (kk - 1) + kk * dd + kk * dd * (dd + 1) / 2;
}

double bic(double log_likelihood, int k, int dim, long samples) {
  return -2.0 * log_likelihood + static_cast<double>(parameter_count(k, dim)) * std::log(static_cast<double>(samples));
}

Selection select_components(const Eigen::MatrixXd& data, int k_max, Rng& rng, const EmOptions& options) {
  if (k_max < 1) throw std::invalid_argument("select_components: k_max must be >= 1");
  const long n = data.rows();
  const int d = static_cast<int>(data.cols());
  Selection sel;
  sel.bic.assign(static_cast<std::size_t>(k_max), std::numeric_limits<double>::quiet_NaN());
  double best = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= k_max; ++k) {
    if (n < static_cast<long>(k) * (d + 1)) {
      sel.log.push_back("K=" + std::to_string(k) + " skipped: " + std::to_string(n) + " samples < K*(dim+1)");
      continue;
    }
    std::optional<FitResult> kept;
    std::string failure;
    for (int r = 0; r < std::max(1, options.restarts); ++r) {
      try {
        FitResult fit = fit_gmm(data, k, rng, options);
        if (!kept || fit.log_likelihood.back() > kept->log_likelihood.back()) kept = std::move(fit);
      } catch (const SingularComponent& e) {
        failure = e.what();
      }
    }
    if (!kept) {
      sel.log.push_back("K=" + std::to_string(k) + " skipped: " + failure);
      continue;
    }
    const double score = bic(kept->log_likelihood.back(), k, d, n);
    sel.bic[static_cast<std::size_t>(k - 1)] = score;
    if (score < best) {
      best = score;
      sel.best_k = k;
      sel.model = std::move(kept->model);
    }
  }
  if (sel.best_k == 0) throw SingularComponent("select_components: no component count could be fitted");
  return sel;
}

Eigen::MatrixXd sample(const MixtureModel& model, int count, Rng& rng) {
  if (count < 0) throw std::invalid_argument("sample: count must be >= 0");
  const int d = model.dim();
  Eigen::MatrixXd out(count, d);
  if (count == 0) return out;
  if (model.components.empty()) throw std::invalid_argument("sample: empty mixture");

  std::vector<Eigen::MatrixXd> roots;
  for (const auto& c : model.components) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (c.cov + c.cov.transpose()));
    roots.push_back(eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal());
  }
  for (int i = 0; i < count; ++i) {
    double u = rng.uniform();
    std::size_t j = 0;
    for (; j + 1 < model.components.size(); ++j) {
      u -= model.components[j].weight;
      if (u < 0.0) break;
    }
    out.row(i) = (model.components[j].mean + roots[j] * rng.normal_vector(d)).transpose();
  }
  return out;
}

}  // namespace babbling::gmm
