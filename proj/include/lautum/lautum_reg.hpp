#pragma once

#include <Eigen/Dense>

#include "lautum/cov_stream.hpp"
#include "lautum/nn.hpp"

namespace lautum {

struct LautumRegConfig {
  double lambda = 0.0;    // regularization weight, >= 0
  double alpha = 0.999;   // EMA decay, in (0,1)
  double jitter = 1e-4;   // added to sigma_w at inversion sites
  Eigen::Index batch_size = 50;

  void validate() const;
};

struct LautumDiagnostics {
  double min_eig_sigma_w = 0.0;  // of the jittered sigma_w
  double det_argument = 0.0;     // det(I - Sx^-1 Sxw Sw^-1 Swx)
  double cond_sigma_w = 0.0;     // eigenvalue-ratio condition estimate
};

struct LautumTermResult {
  double value = 0.0;
  Eigen::MatrixXd grad_logits;  // K x B, dL/dlogits of the current batch
  LautumDiagnostics diagnostics;
};

// Regularizer value on the accumulator's current state: the closed-form
// Gaussian Lautum expression evaluated on (sigma_x_fixed,
// sigma_w + jitter*I, sigma_xw). Requires at least one update. Throws
// DomainError (message carries diagnostics) when the det argument is not
// positive. This is an independent evaluation path from
// info_measures::gaussian_lautum_paper; the two must agree to 1e-12.
double lautum_value(const CovarianceAccumulator& acc,
                    LautumDiagnostics* diag = nullptr);

// Value and analytic gradient w.r.t. the batch's logits. The EMA update with
// this batch is applied internally (the accumulator itself is not mutated);
// the returned value therefore equals lautum_value on the post-update state.
// The gradient treats the EMA history and sigma_x as constants and
// differentiates only through the batch's sample-covariance contributions.
LautumTermResult lautum_grad_logits(const BatchPair& batch,
                                    const CovarianceAccumulator& acc_before,
                                    const LautumRegConfig& cfg);

// One pre-transfer step's loss and parameter gradients:
//   loss = CE(source labeled batch) - lambda * L(target batch).
// The accumulator is advanced exactly once, before L is evaluated. When the
// det argument is nonpositive the regularizer is skipped for the iteration
// (lautum_skipped set, warning left to the caller) and the step degrades to
// plain CE.
struct PretrainLossResult {
  double loss = 0.0;
  double ce = 0.0;
  double lautum = 0.0;
  bool lautum_skipped = false;
  LautumDiagnostics diagnostics;
  nn::Gradients grads;
};

PretrainLossResult pretrain_loss(const nn::Network& net,
                                 const Eigen::MatrixXd& source_inputs,
                                 const Eigen::MatrixXd& source_onehot,
                                 const Eigen::MatrixXd& target_inputs,
                                 CovarianceAccumulator& acc,
                                 const LautumRegConfig& cfg);

}  // namespace lautum
