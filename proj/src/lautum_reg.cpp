#include "lautum/lautum_reg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <cmath>
#include <string>

#include "lautum/errors.hpp"

namespace lautum {

namespace {

// One evaluation of the regularizer on explicit matrices. Deliberately uses
// LDLT solves and FullPivLU so it shares no code path with the closed-form
// implementation in info_measures, which cross-checks it in tests.
struct Eval {
  double value;
  Eigen::MatrixXd m_inv;      // M^-1
  Eigen::MatrixXd a;          // Sx^-1
  Eigen::MatrixXd sw_inv;     // (sigma_w + jitter I)^-1
  LautumDiagnostics diagnostics;
};

Eval evaluate(const Eigen::MatrixXd& sigma_x_fixed,
              const Eigen::MatrixXd& sigma_w_jittered,
              const Eigen::MatrixXd& sigma_xw) {
  const Eigen::Index d = sigma_x_fixed.rows();
  const Eigen::Index k = sigma_w_jittered.rows();

  Eval ev;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_w(sigma_w_jittered);
  ev.diagnostics.min_eig_sigma_w = es_w.eigenvalues().minCoeff();
  ev.diagnostics.cond_sigma_w =
      es_w.eigenvalues().maxCoeff() /
      std::max(es_w.eigenvalues().minCoeff(), 1e-300);

  Eigen::LDLT<Eigen::MatrixXd> ldlt_x(sigma_x_fixed);
  if (ldlt_x.info() != Eigen::Success || !ldlt_x.isPositive()) {
    throw DomainError("sigma_x_fixed is not positive definite");
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt_w(sigma_w_jittered);
  if (ldlt_w.info() != Eigen::Success || !ldlt_w.isPositive()) {
    throw DomainError(
        "jittered sigma_w is not positive definite (min eigenvalue " +
        std::to_string(ev.diagnostics.min_eig_sigma_w) + ")");
  }

  ev.a = ldlt_x.solve(Eigen::MatrixXd::Identity(d, d));
  ev.sw_inv = ldlt_w.solve(Eigen::MatrixXd::Identity(k, k));

  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(d, d) -
                            ev.a * sigma_xw * ev.sw_inv *
                                sigma_xw.transpose();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  const double det = lu.determinant();
  ev.diagnostics.det_argument = det;
  if (!(det > 0.0)) {
    throw DomainError(
        "Lautum det argument is not positive: det=" + std::to_string(det) +
        ", min eig sigma_w=" +
        std::to_string(ev.diagnostics.min_eig_sigma_w) +
        ", cond sigma_w=" + std::to_string(ev.diagnostics.cond_sigma_w) +
        " (check alpha/jitter configuration)");
  }
  ev.m_inv = lu.inverse();
  ev.value =
      std::log(det) + 2.0 * (ev.m_inv.trace() - static_cast<double>(d));
  return ev;
}

}  // namespace

void LautumRegConfig::validate() const {
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("alpha must lie in (0,1)");
  }
  if (jitter <= 0.0) throw ConfigError("jitter must be positive");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
}

double lautum_value(const CovarianceAccumulator& acc,
                    LautumDiagnostics* diag) {
  if (acc.iteration() < 1) {
    throw DomainError("accumulator has no updates yet");
  }
  const Eval ev =
      evaluate(acc.sigma_x_fixed(), acc.sigma_w_jittered(), acc.sigma_xw());
  if (diag != nullptr) *diag = ev.diagnostics;
  return ev.value;
}

LautumTermResult lautum_grad_logits(const BatchPair& batch,
                                    const CovarianceAccumulator& acc_before,
                                    const LautumRegConfig& cfg) {
  cfg.validate();
  if (cfg.batch_size != acc_before.batch_size() ||
      cfg.alpha != acc_before.alpha() ||
      cfg.jitter != acc_before.jitter()) {
    throw ConfigError(
        "LautumRegConfig disagrees with the accumulator's configuration");
  }
  if (batch.inputs.cols() != cfg.batch_size ||
      batch.logits.cols() != cfg.batch_size) {
    throw BatchError("batch size differs from configured batch_size");
  }
  if (!batch.inputs.allFinite() || !batch.logits.allFinite()) {
    throw DataError("batch contains NaN or Inf entries");
  }

  const double alpha = cfg.alpha;
  const double one_minus = 1.0 - alpha;
  const auto b = static_cast<double>(cfg.batch_size);

  // Post-update EMA state, mirroring CovarianceAccumulator::update exactly.
  const Eigen::MatrixXd cov_w = sample_cov(batch.logits);
  const Eigen::MatrixXd cov_xw = sample_cross_cov(batch.inputs, batch.logits);
  Eigen::MatrixXd sigma_w_new = alpha * acc_before.sigma_w() + one_minus * cov_w;
  sigma_w_new = 0.5 * (sigma_w_new + sigma_w_new.transpose()).eval();
  const Eigen::MatrixXd sigma_xw_new =
      alpha * acc_before.sigma_xw() + one_minus * cov_xw;
  const Eigen::MatrixXd sw =
      sigma_w_new + cfg.jitter * Eigen::MatrixXd::Identity(
                                     sigma_w_new.rows(), sigma_w_new.cols());

  const Eval ev = evaluate(acc_before.sigma_x_fixed(), sw, sigma_xw_new);

  // Matrix-calculus backward through L = log det M + 2 tr(M^-1 - I) with
  // M = I - A C Sw^-1 C^T, A = Sx^-1, C = sigma_xw, Sw = jittered sigma_w:
  //   dL = tr((M^-1 - 2 M^-2) dM)
  // followed by the chain through the batch's sample-covariance maps.
  const Eigen::MatrixXd& a = ev.a;
  const Eigen::MatrixXd& sw_inv = ev.sw_inv;
  const Eigen::MatrixXd& c = sigma_xw_new;
  const Eigen::MatrixXd g = ev.m_inv - 2.0 * ev.m_inv * ev.m_inv;

  // dL/dC and dL/dSw.
  const Eigen::MatrixXd grad_c =
      -(a * g.transpose() * c * sw_inv + g * a * c * sw_inv);
  const Eigen::MatrixXd h = sw_inv * c.transpose() * a * g.transpose() * c * sw_inv;
  const Eigen::MatrixXd h_sym = 0.5 * (h + h.transpose());

  // Chain through sigma_w_batch = (1/B) Wc Wc^T and
  // sigma_xw_batch = (1/B) Xc Wc^T; the EMA contributes the (1-alpha) factor.
  const Eigen::MatrixXd wc =
      batch.logits.colwise() - batch.logits.rowwise().mean().eval();
  const Eigen::MatrixXd xc =
      batch.inputs.colwise() - batch.inputs.rowwise().mean().eval();

  LautumTermResult result;
  result.value = ev.value;
  result.diagnostics = ev.diagnostics;
  result.grad_logits =
      (one_minus / b) * (2.0 * h_sym * wc + grad_c.transpose() * xc);
  if (!result.grad_logits.allFinite()) {
    throw NumericalError("Lautum gradient is not finite");
  }
  return result;
}

PretrainLossResult pretrain_loss(const nn::Network& net,
                                 const Eigen::MatrixXd& source_inputs,
                                 const Eigen::MatrixXd& source_onehot,
                                 const Eigen::MatrixXd& target_inputs,
                                 CovarianceAccumulator& acc,
                                 const LautumRegConfig& cfg) {
  cfg.validate();
  if (source_inputs.cols() != cfg.batch_size ||
      target_inputs.cols() != cfg.batch_size) {
    throw BatchError(
        "pre-transfer step requires equal source and target batches of the "
        "configured size (got " +
        std::to_string(source_inputs.cols()) + " source, " +
        std::to_string(target_inputs.cols()) + " target, configured " +
        std::to_string(cfg.batch_size) + ")");
  }

  PretrainLossResult out;

  // Supervised half: CE on the labeled source batch.
  nn::ForwardCache source_cache;
  const Eigen::MatrixXd source_logits =
      net.forward(source_inputs, &source_cache);
  const nn::CeLossResult ce = nn::softmax_ce_loss(source_logits, source_onehot);
  out.ce = ce.loss;
  out.grads = net.backward(source_cache, ce.dlogits);

  // Regularizer half: target logits feed the covariance stream.
  nn::ForwardCache target_cache;
  const Eigen::MatrixXd target_logits =
      net.forward(target_inputs, &target_cache);
  const BatchPair target_batch{target_inputs, target_logits};

  bool have_term = false;
  LautumTermResult term;
  try {
    term = lautum_grad_logits(target_batch, acc, cfg);
    have_term = true;
  } catch (const DomainError&) {
    out.lautum_skipped = true;
  }
  acc.update(target_batch);

  if (have_term) {
    out.lautum = term.value;
    out.diagnostics = term.diagnostics;
    out.loss = out.ce - cfg.lambda * term.value;
    if (cfg.lambda != 0.0) {
      const nn::Gradients reg_grads =
          net.backward(target_cache, (-cfg.lambda) * term.grad_logits);
      for (std::size_t li = 0; li < out.grads.size(); ++li) {
        if (reg_grads[li].weights.size() == 0) continue;
        out.grads[li].weights += reg_grads[li].weights;
        out.grads[li].bias += reg_grads[li].bias;
      }
    }
  } else {
    out.loss = out.ce;
  }
  return out;
}

}  // namespace lautum
