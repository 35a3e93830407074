#include "prepivot/distributions.hpp"

#include <cmath>
#include <limits>

namespace prepivot {

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

double std_normal_pdf(double x) {
  constexpr double inv_sqrt_2pi = 0.3989422804014326779399461;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

namespace {

// Series expansion, converges fast for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  double ap = a;
  for (int i = 0; i < 10000; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Modified Lentz continued fraction for Q(a, x), stable for x >= a + 1.
double gamma_q_cf(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -double(i) * (double(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  if (a <= 0.0) throw ParameterError("gamma shape must be positive");
  if (!(x >= 0.0)) throw ParameterError("gamma argument must be >= 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cf(a, x);
}

double chi2_cdf(double x, int df) {
  if (df < 1) throw ParameterError("chi-squared df must be >= 1");
  if (x <= 0.0) return 0.0;
  return regularized_gamma_p(0.5 * df, 0.5 * x);
}

CovarianceMatrix::CovarianceMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols() || m_.rows() < 1)
    throw CovarianceError("covariance must be square and nonempty");
  const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
  for (int i = 0; i < m_.rows(); ++i)
    for (int j = i + 1; j < m_.cols(); ++j)
      if (std::fabs(m_(i, j) - m_(j, i)) > 1e-12 * scale)
        throw CovarianceError("covariance is not symmetric");
}

GaussianFactor::GaussianFactor(const Eigen::MatrixXd& cov) {
  const int d = int(cov.rows());
  if (d == 1) {
    const double v = cov(0, 0);
    if (v < 0 && v < -1e-10 * std::fabs(v)) throw CovarianceError("negative variance");
    l_.resize(1, 1);
    l_(0, 0) = v > 0 ? std::sqrt(v) : 0.0;
    return;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) {
    l_ = llt.matrixL();
    return;
  }
  // Singular or near-singular: clamp the spectrum.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw CovarianceError("eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  const double lmax = std::max(0.0, ev.maxCoeff());
  for (int i = 0; i < d; ++i) {
    if (ev(i) < -1e-10 * std::max(lmax, 1e-30))
      throw CovarianceError("covariance is indefinite");
    if (ev(i) < 0) ev(i) = 0;
  }
  l_ = es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
}

void GaussianFactor::sample(RngStream& rng, double* out) const {
  const int d = dim();
  if (d == 1) {
    out[0] = l_(0, 0) * rng.normal();
    return;
  }
  Eigen::VectorXd z(d);
  for (int i = 0; i < d; ++i) z(i) = rng.normal();
  Eigen::Map<Eigen::VectorXd>(out, d) = l_ * z;
}

Eigen::VectorXd mvn_sample(const Eigen::VectorXd& mean, const CovarianceMatrix& cov,
                           RngStream& rng) {
  if (mean.size() != cov.dim()) throw ShapeError("mean/covariance dimension mismatch");
  GaussianFactor f(cov.matrix());
  Eigen::VectorXd out(cov.dim());
  f.sample(rng, out.data());
  return mean + out;
}

double gaussian_set_probability_mc(const CovarianceMatrix& cov,
                                   const std::function<bool(const Eigen::VectorXd&)>& accept,
                                   int b_draws, RngStream& rng) {
  if (b_draws < 1) throw ParameterError("number of draws must be >= 1");
  GaussianFactor f(cov.matrix());
  Eigen::VectorXd a(cov.dim());
  long hits = 0;
  for (int b = 0; b < b_draws; ++b) {
    f.sample(rng, a.data());
    if (accept(a)) ++hits;
  }
  return double(hits) / double(b_draws);
}

}  // namespace prepivot
