#pragma once

#include <Eigen/Dense>
#include <functional>

#include "prepivot/errors.hpp"
#include "prepivot/rng.hpp"

namespace prepivot {

// Phi(x), absolute error well under 1e-12.
double std_normal_cdf(double x);

// phi(x) = (2*pi)^{-1/2} exp(-x^2/2).
double std_normal_pdf(double x);

// Regularized lower incomplete gamma P(a, x); a > 0, x >= 0.
double regularized_gamma_p(double a, double x);

// Chi-squared CDF with df degrees of freedom; df = 0 is a parameter error.
double chi2_cdf(double x, int df);

// Symmetric matrix wrapper validated on construction (1e-12 relative);
// positive semi-definiteness is enforced at factorization time.
class CovarianceMatrix {
 public:
  explicit CovarianceMatrix(Eigen::MatrixXd m);
  int dim() const { return int(m_.rows()); }
  const Eigen::MatrixXd& matrix() const { return m_; }

 private:
  Eigen::MatrixXd m_;
};

// Factor L with L L^T = cov. Cholesky when positive definite; for singular
// matrices an eigendecomposition with eigenvalues in [-1e-10*lmax, 0] clamped
// to zero, so samples stay in the column space. Smaller eigenvalues mean the
// matrix is indefinite and raise CovarianceError.
class GaussianFactor {
 public:
  GaussianFactor() = default;
  explicit GaussianFactor(const Eigen::MatrixXd& cov);
  int dim() const { return int(l_.rows()); }
  const Eigen::MatrixXd& l() const { return l_; }

  // out = L z with z the next dim() normals from rng.
  void sample(RngStream& rng, double* out) const;

 private:
  Eigen::MatrixXd l_;
};

Eigen::VectorXd mvn_sample(const Eigen::VectorXd& mean, const CovarianceMatrix& cov,
                           RngStream& rng);

// (1/B) sum of accept(a_b) over B draws a_b ~ N(0, cov).
double gaussian_set_probability_mc(const CovarianceMatrix& cov,
                                   const std::function<bool(const Eigen::VectorXd&)>& accept,
                                   int b_draws, RngStream& rng);

}  // namespace prepivot
