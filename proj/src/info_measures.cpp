#include "lautum/info_measures.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <cmath>
#include <limits>
#include <numeric>

#include "lautum/errors.hpp"

namespace lautum {

namespace {

constexpr double kPmfSumTol = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_pmf_entries(const double* data, std::size_t n, double& sum) {
  sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = data[i];
    if (!(p >= 0.0)) {  // catches negatives and NaN
      throw DistributionError("pmf entry " + std::to_string(i) +
                              " is negative or NaN");
    }
    sum += p;
  }
}

void check_pmf(const double* data, std::size_t n) {
  double sum;
  check_pmf_entries(data, n, sum);
  if (std::abs(sum - 1.0) > kPmfSumTol) {
    throw DistributionError("pmf sums to " + std::to_string(sum) +
                            ", expected 1 within 1e-12");
  }
}

// Symmetry check relative to the matrix scale.
bool is_symmetric(const Eigen::MatrixXd& m, double tol = 1e-10) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

bool is_positive_definite(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

double log_det_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

}  // namespace

// ---- DiscreteJoint ----

DiscreteJoint::DiscreteJoint(int nx, int ny, int nw, std::vector<double> probs)
    : nx_(nx), ny_(ny), nw_(nw), probs_(std::move(probs)) {
  if (nx_ < 1 || ny_ < 1 || nw_ < 1) {
    throw ShapeError("DiscreteJoint axes must all have size >= 1");
  }
  const std::size_t expect =
      static_cast<std::size_t>(nx_) * ny_ * nw_;
  if (probs_.size() != expect) {
    throw ShapeError("DiscreteJoint: got " + std::to_string(probs_.size()) +
                     " entries, expected " + std::to_string(expect));
  }
  check_pmf(probs_.data(), probs_.size());
}

Eigen::MatrixXd DiscreteJoint::joint_xy() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(nx_, ny_);
  for (int x = 0; x < nx_; ++x)
    for (int y = 0; y < ny_; ++y)
      for (int w = 0; w < nw_; ++w) m(x, y) += p(x, y, w);
  return m;
}

Eigen::MatrixXd DiscreteJoint::joint_xw() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(nx_, nw_);
  for (int x = 0; x < nx_; ++x)
    for (int y = 0; y < ny_; ++y)
      for (int w = 0; w < nw_; ++w) m(x, w) += p(x, y, w);
  return m;
}

Eigen::VectorXd DiscreteJoint::marginal_x() const {
  return joint_xy().rowwise().sum();
}

Eigen::VectorXd DiscreteJoint::marginal_w() const {
  return joint_xw().colwise().sum().transpose();
}

bool DiscreteJoint::strictly_positive() const {
  for (double p : probs_)
    if (p <= 0.0) return false;
  return true;
}

DiscreteJoint DiscreteJoint::smoothed(double eps) const {
  std::vector<double> q(probs_);
  for (double& p : q) p += eps;
  const double sum = std::accumulate(q.begin(), q.end(), 0.0);
  for (double& p : q) p /= sum;
  return DiscreteJoint(nx_, ny_, nw_, std::move(q));
}

// ---- DiscreteClassifier ----

DiscreteClassifier::DiscreteClassifier(int nx, int ny, int nw,
                                       std::vector<double> probs)
    : nx_(nx), ny_(ny), nw_(nw), probs_(std::move(probs)) {
  if (nx_ < 1 || ny_ < 1 || nw_ < 1) {
    throw ShapeError("DiscreteClassifier axes must all have size >= 1");
  }
  const std::size_t expect =
      static_cast<std::size_t>(nx_) * ny_ * nw_;
  if (probs_.size() != expect) {
    throw ShapeError("DiscreteClassifier: wrong entry count");
  }
  for (int x = 0; x < nx_; ++x) {
    for (int w = 0; w < nw_; ++w) {
      double sum = 0.0;
      for (int y = 0; y < ny_; ++y) {
        const double v = f(y, x, w);
        if (!(v > 0.0)) {
          throw DistributionError(
              "classifier entries must be strictly positive");
        }
        sum += v;
      }
      if (std::abs(sum - 1.0) > kPmfSumTol) {
        throw DistributionError(
            "classifier not normalized over y at (x=" + std::to_string(x) +
            ", w=" + std::to_string(w) + ")");
      }
    }
  }
}

// ---- GaussianBlocks ----

GaussianBlocks::GaussianBlocks(Eigen::MatrixXd sigma_x,
                               Eigen::MatrixXd sigma_w,
                               Eigen::MatrixXd sigma_xw)
    : sigma_x_(std::move(sigma_x)),
      sigma_w_(std::move(sigma_w)),
      sigma_xw_(std::move(sigma_xw)) {
  if (!is_symmetric(sigma_x_)) throw DomainError("sigma_x not symmetric");
  if (!is_symmetric(sigma_w_)) throw DomainError("sigma_w not symmetric");
  if (sigma_xw_.rows() != sigma_x_.rows() ||
      sigma_xw_.cols() != sigma_w_.rows()) {
    throw ShapeError("sigma_xw must be D x K");
  }
  if (!is_positive_definite(sigma_x_)) {
    throw DomainError("sigma_x not positive definite");
  }
  if (!is_positive_definite(sigma_w_)) {
    throw DomainError("sigma_w not positive definite");
  }
  // The joint block matrix must at least be PSD for the pair to be a valid
  // covariance.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(full());
  const double scale = std::max(1.0, full().cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < -1e-10 * scale) {
    throw DomainError("full block covariance is not positive semidefinite");
  }
}

Eigen::MatrixXd GaussianBlocks::full() const {
  const Eigen::Index d = dim_x(), k = dim_w();
  Eigen::MatrixXd m(d + k, d + k);
  m.topLeftCorner(d, d) = sigma_x_;
  m.topRightCorner(d, k) = sigma_xw_;
  m.bottomLeftCorner(k, d) = sigma_xw_.transpose();
  m.bottomRightCorner(k, k) = sigma_w_;
  return m;
}

Eigen::MatrixXd GaussianBlocks::block_diagonal() const {
  const Eigen::Index d = dim_x(), k = dim_w();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d + k, d + k);
  m.topLeftCorner(d, d) = sigma_x_;
  m.bottomRightCorner(k, k) = sigma_w_;
  return m;
}

// ---- Discrete measures ----

double discrete_mutual_info(const Eigen::MatrixXd& pmf) {
  check_pmf(pmf.data(), static_cast<std::size_t>(pmf.size()));
  const Eigen::VectorXd px = pmf.rowwise().sum();
  const Eigen::VectorXd py = pmf.colwise().sum().transpose();
  double mi = 0.0;
  for (Eigen::Index i = 0; i < pmf.rows(); ++i) {
    for (Eigen::Index j = 0; j < pmf.cols(); ++j) {
      const double p = pmf(i, j);
      if (p > 0.0) mi += p * std::log(p / (px(i) * py(j)));
    }
  }
  return std::max(0.0, mi);
}

double discrete_lautum(const Eigen::MatrixXd& pmf) {
  check_pmf(pmf.data(), static_cast<std::size_t>(pmf.size()));
  const Eigen::VectorXd px = pmf.rowwise().sum();
  const Eigen::VectorXd py = pmf.colwise().sum().transpose();
  double l = 0.0;
  for (Eigen::Index i = 0; i < pmf.rows(); ++i) {
    for (Eigen::Index j = 0; j < pmf.cols(); ++j) {
      const double q = px(i) * py(j);
      if (q > 0.0) {
        const double p = pmf(i, j);
        if (p <= 0.0) return kInf;  // support violation
        l += q * std::log(q / p);
      }
    }
  }
  return std::max(0.0, l);
}

double discrete_entropy(const Eigen::VectorXd& pmf) {
  check_pmf(pmf.data(), static_cast<std::size_t>(pmf.size()));
  double h = 0.0;
  for (Eigen::Index i = 0; i < pmf.size(); ++i) {
    const double p = pmf(i);
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::max(0.0, h);
}

double discrete_conditional_entropy(const Eigen::MatrixXd& joint) {
  check_pmf(joint.data(), static_cast<std::size_t>(joint.size()));
  double h_xy = 0.0;
  for (Eigen::Index i = 0; i < joint.rows(); ++i) {
    for (Eigen::Index j = 0; j < joint.cols(); ++j) {
      const double p = joint(i, j);
      if (p > 0.0) h_xy -= p * std::log(p);
    }
  }
  const Eigen::VectorXd px = joint.rowwise().sum();
  double h_x = 0.0;
  for (Eigen::Index i = 0; i < px.size(); ++i) {
    if (px(i) > 0.0) h_x -= px(i) * std::log(px(i));
  }
  return std::max(0.0, h_xy - h_x);
}

double expected_cross_entropy(const DiscreteJoint& joint,
                              const DiscreteClassifier& f) {
  if (joint.nx() != f.nx() || joint.ny() != f.ny() || joint.nw() != f.nw()) {
    throw ShapeError("joint and classifier shapes disagree");
  }
  const Eigen::MatrixXd pxy = joint.joint_xy();
  const Eigen::VectorXd pw = joint.marginal_w();
  double ce = 0.0;
  for (int x = 0; x < joint.nx(); ++x) {
    for (int y = 0; y < joint.ny(); ++y) {
      for (int w = 0; w < joint.nw(); ++w) {
        const double weight = pxy(x, y) * pw(w);
        if (weight > 0.0) {
          const double fv = f.f(y, x, w);
          if (fv <= 0.0) return kInf;
          ce -= weight * std::log(fv);
        }
      }
    }
  }
  return ce;
}

Theorem1Terms decompose_theorem1(const DiscreteJoint& joint,
                                 const DiscreteClassifier& f) {
  if (joint.nx() != f.nx() || joint.ny() != f.ny() || joint.nw() != f.nw()) {
    throw ShapeError("joint and classifier shapes disagree");
  }
  if (!joint.strictly_positive()) {
    throw DomainError(
        "decompose_theorem1 requires a strictly positive joint; "
        "smooth the distribution first");
  }

  const int nx = joint.nx(), ny = joint.ny(), nw = joint.nw();
  const Eigen::MatrixXd pxy = joint.joint_xy();
  const Eigen::MatrixXd pxw = joint.joint_xw();
  const Eigen::VectorXd px = joint.marginal_x();
  const Eigen::VectorXd pw = joint.marginal_w();

  Theorem1Terms t{};
  t.ce = expected_cross_entropy(joint, f);
  t.cond_entropy = discrete_conditional_entropy(pxy);

  // star = -sum p(x,y) p(w) log p(y|x,w)
  t.star = 0.0;
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y)
      for (int w = 0; w < nw; ++w)
        t.star -= pxy(x, y) * pw(w) * std::log(joint.p(x, y, w) / pxw(x, w));

  t.dagger = t.ce - t.star;

  // L(w; (x,y)) over the (x,y)-by-w joint.
  t.lautum_w_xy = 0.0;
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y)
      for (int w = 0; w < nw; ++w) {
        const double prod = pxy(x, y) * pw(w);
        t.lautum_w_xy += prod * std::log(prod / joint.p(x, y, w));
      }

  // L(w; x) over the x-by-w marginal.
  t.lautum_w_x = 0.0;
  for (int x = 0; x < nx; ++x)
    for (int w = 0; w < nw; ++w) {
      const double prod = px(x) * pw(w);
      t.lautum_w_x += prod * std::log(prod / pxw(x, w));
    }

  // sum_w p(w) KL( p(x,y) || f(y|x,w) p(x|w) ), KL taken over (x,y).
  t.joint_kl_term = 0.0;
  for (int w = 0; w < nw; ++w) {
    double kl = 0.0;
    for (int x = 0; x < nx; ++x) {
      const double px_given_w = pxw(x, w) / pw(w);
      for (int y = 0; y < ny; ++y) {
        kl += pxy(x, y) *
              std::log(pxy(x, y) / (f.f(y, x, w) * px_given_w));
      }
    }
    t.joint_kl_term += pw(w) * kl;
  }

  // sum_w p(w) sum_x p(x) KL( p(y|x) || f(y|x,w) ): the conditional-KL
  // reading. Differs from joint_kl_term by exactly L(w;x).
  t.cond_kl_term = 0.0;
  for (int w = 0; w < nw; ++w) {
    double kl = 0.0;
    for (int x = 0; x < nx; ++x) {
      for (int y = 0; y < ny; ++y) {
        const double py_given_x = pxy(x, y) / px(x);
        kl += px(x) * py_given_x * std::log(py_given_x / f.f(y, x, w));
      }
    }
    t.cond_kl_term += pw(w) * kl;
  }

  return t;
}

// ---- Gaussian closed forms ----

double gaussian_lautum_paper(const GaussianBlocks& blocks) {
  const Eigen::Index d = blocks.dim_x();
  Eigen::LLT<Eigen::MatrixXd> llt_x(blocks.sigma_x());
  if (llt_x.info() != Eigen::Success) {
    throw DomainError("sigma_x is singular or not positive definite");
  }
  Eigen::LLT<Eigen::MatrixXd> llt_w(blocks.sigma_w());
  if (llt_w.info() != Eigen::Success) {
    throw DomainError("sigma_w is singular or not positive definite");
  }
  // M = I - Sx^-1 Sxw Sw^-1 Swx
  const Eigen::MatrixXd t = llt_x.solve(blocks.sigma_xw());
  const Eigen::MatrixXd u = llt_w.solve(blocks.sigma_xw().transpose());
  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(d, d) - t * u;

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  const double det = lu.determinant();
  if (!(det > 0.0)) {
    throw DomainError("det(I - Sx^-1 Sxw Sw^-1 Swx) = " + std::to_string(det) +
                      " is not positive");
  }
  const Eigen::MatrixXd m_inv = lu.solve(Eigen::MatrixXd::Identity(d, d));
  return std::log(det) + 2.0 * (m_inv.trace() - static_cast<double>(d));
}

double gaussian_lautum_kl(const GaussianBlocks& blocks) {
  const Eigen::MatrixXd full = blocks.full();
  Eigen::LLT<Eigen::MatrixXd> llt_full(full);
  if (llt_full.info() != Eigen::Success) {
    throw DomainError("full block covariance must be positive definite");
  }
  Eigen::LLT<Eigen::MatrixXd> llt_x(blocks.sigma_x());
  Eigen::LLT<Eigen::MatrixXd> llt_w(blocks.sigma_w());
  if (llt_x.info() != Eigen::Success || llt_w.info() != Eigen::Success) {
    throw DomainError("marginal covariances must be positive definite");
  }
  const double n = static_cast<double>(full.rows());
  const double logdet_full = log_det_from_llt(llt_full);
  const double logdet_diag =
      log_det_from_llt(llt_x) + log_det_from_llt(llt_w);
  const double trace_term = llt_full.solve(blocks.block_diagonal()).trace();
  const double kl = 0.5 * (trace_term - n + logdet_full - logdet_diag);
  return std::max(0.0, kl);
}

double gaussian_mutual_info(const GaussianBlocks& blocks) {
  double det = 0.0;
  // Reuse the raw kernel only for its det computation path.
  const Eigen::Index d = blocks.dim_x();
  Eigen::LLT<Eigen::MatrixXd> llt_x(blocks.sigma_x());
  Eigen::LLT<Eigen::MatrixXd> llt_w(blocks.sigma_w());
  if (llt_x.info() != Eigen::Success || llt_w.info() != Eigen::Success) {
    throw DomainError("marginal covariances must be positive definite");
  }
  const Eigen::MatrixXd t = llt_x.solve(blocks.sigma_xw());
  const Eigen::MatrixXd u = llt_w.solve(blocks.sigma_xw().transpose());
  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(d, d) - t * u;
  det = Eigen::PartialPivLU<Eigen::MatrixXd>(m).determinant();
  if (!(det > 0.0)) {
    throw DomainError("det(I - Sx^-1 Sxw Sw^-1 Swx) is not positive");
  }
  return std::max(0.0, -0.5 * std::log(det));
}

}  // namespace lautum
