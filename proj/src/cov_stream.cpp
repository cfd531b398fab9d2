#include "lautum/cov_stream.hpp"

#include <Eigen/Cholesky>

#include "lautum/errors.hpp"

namespace lautum {

Eigen::MatrixXd sample_cov(const Eigen::MatrixXd& samples) {
  const Eigen::Index b = samples.cols();
  if (b < 2) {
    throw BatchError("sample covariance needs at least 2 samples, got " +
                     std::to_string(b));
  }
  const Eigen::VectorXd mu = samples.rowwise().mean();
  const Eigen::MatrixXd centered = samples.colwise() - mu;
  return (centered * centered.transpose()) / static_cast<double>(b);
}

Eigen::MatrixXd sample_cross_cov(const Eigen::MatrixXd& a,
                                 const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("cross-covariance inputs must share the batch axis: " +
                     std::to_string(a.cols()) + " vs " +
                     std::to_string(b.cols()));
  }
  const Eigen::Index n = a.cols();
  if (n < 2) {
    throw BatchError("cross-covariance needs at least 2 samples");
  }
  const Eigen::MatrixXd ca = a.colwise() - a.rowwise().mean().eval();
  const Eigen::MatrixXd cb = b.colwise() - b.rowwise().mean().eval();
  return (ca * cb.transpose()) / static_cast<double>(n);
}

Eigen::MatrixXd precompute_target_cov(const Eigen::MatrixXd& dataset,
                                      double jitter) {
  if (jitter <= 0.0) throw DomainError("jitter must be positive");
  Eigen::MatrixXd cov = sample_cov(dataset);
  cov += jitter * Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(
        "target covariance failed Cholesky factorization even after adding "
        "jitter " +
        std::to_string(jitter) + "; dimension " + std::to_string(cov.rows()));
  }
  return cov;
}

CovarianceAccumulator::CovarianceAccumulator(Eigen::MatrixXd sigma_x_fixed,
                                             Eigen::Index logit_dim,
                                             double alpha, double jitter,
                                             Eigen::Index batch_size)
    : sigma_w_(Eigen::MatrixXd::Zero(logit_dim, logit_dim)),
      sigma_xw_(Eigen::MatrixXd::Zero(sigma_x_fixed.rows(), logit_dim)),
      sigma_x_fixed_(std::move(sigma_x_fixed)),
      alpha_(alpha),
      jitter_(jitter),
      batch_size_(batch_size) {
  if (!(alpha_ > 0.0 && alpha_ < 1.0)) {
    throw DomainError("alpha must lie in (0,1)");
  }
  if (jitter_ <= 0.0) throw DomainError("jitter must be positive");
  if (batch_size_ < 2) throw BatchError("batch size must be >= 2");
  Eigen::LLT<Eigen::MatrixXd> llt(sigma_x_fixed_);
  if (llt.info() != Eigen::Success) {
    throw DomainError("sigma_x_fixed must be positive definite");
  }
}

CovarianceAccumulator CovarianceAccumulator::from_state(
    Eigen::MatrixXd sigma_x_fixed, Eigen::MatrixXd sigma_w,
    Eigen::MatrixXd sigma_xw, double alpha, double jitter,
    Eigen::Index batch_size, std::int64_t iteration) {
  if (sigma_w.rows() != sigma_w.cols() ||
      sigma_w.rows() != sigma_xw.cols() ||
      sigma_xw.rows() != sigma_x_fixed.rows()) {
    throw ShapeError("accumulator state dimensions are inconsistent");
  }
  if (iteration < 0) throw DomainError("iteration must be >= 0");
  CovarianceAccumulator acc(std::move(sigma_x_fixed), sigma_w.rows(), alpha,
                            jitter, batch_size);
  acc.sigma_w_ = std::move(sigma_w);
  acc.sigma_xw_ = std::move(sigma_xw);
  acc.iteration_ = iteration;
  return acc;
}

void CovarianceAccumulator::update(const BatchPair& batch) {
  if (batch.inputs.cols() != batch_size_ ||
      batch.logits.cols() != batch_size_) {
    throw BatchError("batch size " + std::to_string(batch.inputs.cols()) +
                     " / " + std::to_string(batch.logits.cols()) +
                     " differs from configured " +
                     std::to_string(batch_size_));
  }
  if (batch.inputs.rows() != sigma_xw_.rows() ||
      batch.logits.rows() != sigma_w_.rows()) {
    throw ShapeError("batch dimensions do not match accumulator state");
  }
  if (!batch.inputs.allFinite() || !batch.logits.allFinite()) {
    throw DataError("batch contains NaN or Inf entries");
  }
  const Eigen::MatrixXd cov_w = sample_cov(batch.logits);
  const Eigen::MatrixXd cov_xw = sample_cross_cov(batch.inputs, batch.logits);
  sigma_w_ = alpha_ * sigma_w_ + (1.0 - alpha_) * cov_w;
  sigma_w_ = 0.5 * (sigma_w_ + sigma_w_.transpose()).eval();
  sigma_xw_ = alpha_ * sigma_xw_ + (1.0 - alpha_) * cov_xw;
  ++iteration_;
}

Eigen::MatrixXd CovarianceAccumulator::sigma_w_jittered() const {
  return sigma_w_ +
         jitter_ * Eigen::MatrixXd::Identity(sigma_w_.rows(), sigma_w_.cols());
}

}  // namespace lautum
