#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <cstdint>

#include "lautum/rng.hpp"

// Monte-Carlo estimators for Gaussian information measures. These are the
// independent oracles for the closed forms: they see only densities and
// samples, never the closed-form algebra.
namespace testsupport {

struct GaussianDensity {
  Eigen::MatrixXd chol_l;  // lower Cholesky factor of the covariance
  double log_norm;         // -(n/2) log(2 pi) - (1/2) log det

  explicit GaussianDensity(const Eigen::MatrixXd& cov) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    chol_l = llt.matrixL();
    const double logdet =
        2.0 * chol_l.diagonal().array().log().sum();
    log_norm = -0.5 * (static_cast<double>(cov.rows()) *
                           std::log(2.0 * 3.14159265358979323846) +
                       logdet);
  }

  double log_pdf(const Eigen::VectorXd& z) const {
    const Eigen::VectorXd u = chol_l.triangularView<Eigen::Lower>().solve(z);
    return log_norm - 0.5 * u.squaredNorm();
  }

  Eigen::VectorXd sample(lautum::Rng& rng) const {
    Eigen::VectorXd u(chol_l.rows());
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = rng.normal();
    return chol_l * u;
  }
};

// KL(N(0,cov_p) || N(0,cov_q)) by averaging log-density ratios over samples
// from the first argument.
inline double mc_gaussian_kl(const Eigen::MatrixXd& cov_p,
                             const Eigen::MatrixXd& cov_q, std::size_t n,
                             std::uint64_t seed) {
  GaussianDensity p(cov_p), q(cov_q);
  lautum::Rng rng(seed);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd z = p.sample(rng);
    acc += p.log_pdf(z) - q.log_pdf(z);
  }
  return acc / static_cast<double>(n);
}

// I(X;W) = E_{joint}[log p_joint - log p_blockdiag].
inline double mc_gaussian_mutual_info(const Eigen::MatrixXd& cov_joint,
                                      const Eigen::MatrixXd& cov_blockdiag,
                                      std::size_t n, std::uint64_t seed) {
  GaussianDensity joint(cov_joint), indep(cov_blockdiag);
  lautum::Rng rng(seed);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd z = joint.sample(rng);
    acc += joint.log_pdf(z) - indep.log_pdf(z);
  }
  return acc / static_cast<double>(n);
}

}  // namespace testsupport
