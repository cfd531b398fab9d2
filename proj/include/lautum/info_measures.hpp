#pragma once

#include <Eigen/Dense>
#include <vector>

namespace lautum {

// Exact finite joint distribution over (x, y, w). Entries are validated to be
// nonnegative and to sum to 1 within 1e-12 at construction.
class DiscreteJoint {
 public:
  DiscreteJoint(int nx, int ny, int nw, std::vector<double> probs);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nw() const { return nw_; }

  double p(int x, int y, int w) const { return probs_[index(x, y, w)]; }

  // Marginals.
  Eigen::MatrixXd joint_xy() const;  // p(x,y), nx x ny
  Eigen::MatrixXd joint_xw() const;  // p(x,w), nx x nw
  Eigen::VectorXd marginal_x() const;
  Eigen::VectorXd marginal_w() const;

  bool strictly_positive() const;

  // Smoothed copy: add eps to every cell and renormalize. Callers that need
  // decompose_theorem1 on joints with zeros use this first.
  DiscreteJoint smoothed(double eps) const;

 private:
  std::size_t index(int x, int y, int w) const {
    return (static_cast<std::size_t>(x) * ny_ + y) * nw_ + w;
  }
  int nx_, ny_, nw_;
  std::vector<double> probs_;
};

// Learned classifier f(y|x,w): strictly positive, normalized over y for every
// (x, w) pair (validated at construction so logs stay finite).
class DiscreteClassifier {
 public:
  DiscreteClassifier(int nx, int ny, int nw, std::vector<double> probs);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nw() const { return nw_; }
  double f(int y, int x, int w) const { return probs_[index(x, y, w)]; }

 private:
  std::size_t index(int x, int y, int w) const {
    return (static_cast<std::size_t>(x) * ny_ + y) * nw_ + w;
  }
  int nx_, ny_, nw_;
  std::vector<double> probs_;
};

// Covariance blocks of a jointly Gaussian zero-mean pair (x, w). sigma_x and
// sigma_w must be symmetric positive definite and the full (D+K)x(D+K) block
// matrix must be positive semidefinite; violations throw DomainError.
class GaussianBlocks {
 public:
  GaussianBlocks(Eigen::MatrixXd sigma_x, Eigen::MatrixXd sigma_w,
                 Eigen::MatrixXd sigma_xw);

  const Eigen::MatrixXd& sigma_x() const { return sigma_x_; }
  const Eigen::MatrixXd& sigma_w() const { return sigma_w_; }
  const Eigen::MatrixXd& sigma_xw() const { return sigma_xw_; }

  Eigen::Index dim_x() const { return sigma_x_.rows(); }
  Eigen::Index dim_w() const { return sigma_w_.rows(); }

  // Full covariance with x block first: [[Sx, Sxw], [Swx, Sw]].
  Eigen::MatrixXd full() const;
  // Block-diagonal covariance of the independent pair with same marginals.
  Eigen::MatrixXd block_diagonal() const;

 private:
  Eigen::MatrixXd sigma_x_, sigma_w_, sigma_xw_;
};

// ---- Discrete measures (all in nats, 0*log 0 = 0 convention) ----

// I(X;Y) of a 2-axis pmf. Nonnegative; exactly 0 for product pmfs.
double discrete_mutual_info(const Eigen::MatrixXd& pmf);

// L(X;Y) of a 2-axis pmf. Returns +infinity when the joint has zeros on the
// support of the product of marginals.
double discrete_lautum(const Eigen::MatrixXd& pmf);

double discrete_entropy(const Eigen::VectorXd& pmf);

// H(Y|X) where rows of the joint index x: H(x,y) - H(x).
double discrete_conditional_entropy(const Eigen::MatrixXd& joint);

// -sum_{x,y,w} p(x,y) p(w) log f(y|x,w). The expectation weights are the
// product of the (x,y)- and w-marginals of the joint, not the full 3-way
// joint. Returns +infinity if f vanishes on the needed support.
double expected_cross_entropy(const DiscreteJoint& joint,
                              const DiscreteClassifier& f);

// Every term of the cross-entropy decomposition, each computed independently
// by enumeration. Requires a strictly positive joint (DomainError otherwise;
// callers smooth first). All fields in nats.
struct Theorem1Terms {
  double ce;            // -sum p(x,y)p(w) log f(y|x,w)
  double star;          // -sum p(x,y)p(w) log p(y|x,w)
  double dagger;        // -sum p(x,y)p(w) log [f(y|x,w)/p(y|x,w)]
  double lautum_w_xy;   // L(w; (x,y))
  double lautum_w_x;    // L(w; x)
  double cond_entropy;  // H(y|x)
  double joint_kl_term; // sum_w p(w) KL( p(x,y) || f(y|x,w) p(x|w) )
  double cond_kl_term;  // sum_w p(w) sum_x p(x) KL( p(y|x) || f(y|x,w) )
};

// Identities that hold for every strictly positive joint:
//   (a) star == lautum_w_xy + cond_entropy - lautum_w_x
//   (b) ce   == joint_kl_term + cond_entropy - lautum_w_x
// joint_kl_term - cond_kl_term equals lautum_w_x; the conditional-KL reading
// of the decomposition is therefore reported but not asserted.
Theorem1Terms decompose_theorem1(const DiscreteJoint& joint,
                                 const DiscreteClassifier& f);

// ---- Gaussian closed forms ----

// log det(I - Sx^-1 Sxw Sw^-1 Swx) + 2 tr((I - Sx^-1 Sxw Sw^-1 Swx)^-1 - I).
// This is the printed regularizer formula; it equals exactly twice the
// product-to-joint KL below.
double gaussian_lautum_paper(const GaussianBlocks& blocks);

// KL( N(0, blockdiag(Sx, Sw)) || N(0, Sfull) ): the Lautum information of the
// pair by definition. Independent oracle for gaussian_lautum_paper.
double gaussian_lautum_kl(const GaussianBlocks& blocks);

// -1/2 log det(I - Sx^-1 Sxw Sw^-1 Swx).
double gaussian_mutual_info(const GaussianBlocks& blocks);

}  // namespace lautum
