#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace lautum {

// One pre-transfer mini-batch: target inputs and the logits the network
// produced for them. Columns are samples.
struct BatchPair {
  Eigen::MatrixXd inputs;  // D x B
  Eigen::MatrixXd logits;  // K x B
};

// Biased (1/B) sample covariance of the columns of `samples`. B >= 2.
Eigen::MatrixXd sample_cov(const Eigen::MatrixXd& samples);

// Biased (1/B) cross-covariance between columns of a (D x B) and b (K x B).
Eigen::MatrixXd sample_cross_cov(const Eigen::MatrixXd& a,
                                 const Eigen::MatrixXd& b);

// Sample covariance over the whole dataset plus jitter * I, verified positive
// definite by Cholesky factorization.
Eigen::MatrixXd precompute_target_cov(const Eigen::MatrixXd& dataset,
                                      double jitter);

// Exponentially decaying moving-average state for sigma_w and sigma_xw,
// alongside the fixed (pre-jittered) target covariance sigma_x. sigma_wx is
// never stored; it is the transpose of sigma_xw. Single writer; updates are
// sequential with training iterations.
class CovarianceAccumulator {
 public:
  // sigma_x_fixed must already include its jitter (see precompute_target_cov).
  // `jitter` is the amount added to sigma_w at every inversion site.
  CovarianceAccumulator(Eigen::MatrixXd sigma_x_fixed, Eigen::Index logit_dim,
                        double alpha, double jitter, Eigen::Index batch_size);

  // Restores an accumulator from an explicit EMA state.
  static CovarianceAccumulator from_state(Eigen::MatrixXd sigma_x_fixed,
                                          Eigen::MatrixXd sigma_w,
                                          Eigen::MatrixXd sigma_xw,
                                          double alpha, double jitter,
                                          Eigen::Index batch_size,
                                          std::int64_t iteration);

  // sigma <- alpha * sigma + (1 - alpha) * sigma_batch for both tracked
  // matrices; sigma_w is re-symmetrized after the step. The batch must have
  // the configured size and contain no NaN/Inf.
  void update(const BatchPair& batch);

  const Eigen::MatrixXd& sigma_w() const { return sigma_w_; }
  const Eigen::MatrixXd& sigma_xw() const { return sigma_xw_; }
  const Eigen::MatrixXd& sigma_x_fixed() const { return sigma_x_fixed_; }
  Eigen::MatrixXd sigma_w_jittered() const;

  double alpha() const { return alpha_; }
  double jitter() const { return jitter_; }
  Eigen::Index batch_size() const { return batch_size_; }
  std::int64_t iteration() const { return iteration_; }

 private:
  Eigen::MatrixXd sigma_w_;        // K x K
  Eigen::MatrixXd sigma_xw_;       // D x K
  Eigen::MatrixXd sigma_x_fixed_;  // D x D, jittered, PD
  double alpha_;
  double jitter_;
  Eigen::Index batch_size_;
  std::int64_t iteration_ = 0;
};

}  // namespace lautum
