#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "prepivot/distributions.hpp"

using namespace prepivot;

TEST_SUITE("distributions") {

TEST_CASE("normal cdf matches quadrature") {
  for (double x : {-8.0, -3.0, -1.0, -0.5, 0.0, 0.3, 1.0, 1.96, 2.5, 4.0, 8.0})
    CHECK(std::abs(std_normal_cdf(x) - oracles::normal_cdf_quad(x)) < 1e-10);
  CHECK(std_normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(std_normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
}

TEST_CASE("normal cdf symmetry and monotonicity") {
  for (double x = -6.0; x <= 6.0; x += 0.25) {
    CHECK(std::abs(std_normal_cdf(-x) - (1.0 - std_normal_cdf(x))) < 1e-14);
    CHECK(std_normal_cdf(x) < std_normal_cdf(x + 0.25));
  }
}

TEST_CASE("normal pdf matches the closed form") {
  for (double x : {-3.0, 0.0, 0.7, 2.2})
    CHECK(std_normal_pdf(x) == doctest::Approx(oracles::normal_pdf(x)).epsilon(1e-13));
}

TEST_CASE("regularized gamma endpoints and quadrature") {
  CHECK(regularized_gamma_p(0.5, 0.0) == 0.0);
  CHECK(regularized_gamma_p(2.0, 1e8) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(regularized_gamma_p(0.0, 1.0), ParameterError);
  CHECK_THROWS_AS(regularized_gamma_p(1.0, -1.0), ParameterError);
}

TEST_CASE("chi squared cdf matches quadrature") {
  for (int df : {1, 2, 3, 7, 15})
    for (double x : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 25.0})
      CHECK(std::abs(chi2_cdf(x, df) - oracles::chi2_cdf_quad(x, df)) < 1e-8);
  // df = 2 is exactly 1 - exp(-x/2).
  for (double x : {0.3, 1.0, 4.0})
    CHECK(chi2_cdf(x, 2) == doctest::Approx(1.0 - std::exp(-0.5 * x)).epsilon(1e-12));
  CHECK(chi2_cdf(-1.0, 3) == 0.0);
  CHECK_THROWS_AS(chi2_cdf(1.0, 0), ParameterError);
}

TEST_CASE("covariance wrapper enforces symmetry") {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 0.2, 0.2, 1.0;
  CHECK(CovarianceMatrix{m}.dim() == 2);
  m(0, 1) = 0.3;
  CHECK_THROWS_AS(CovarianceMatrix{m}, CovarianceError);
}

TEST_CASE("gaussian factor reproduces a positive definite matrix") {
  Eigen::MatrixXd m(2, 2);
  m << 4.0, 1.0, 1.0, 9.0;
  GaussianFactor f(m);
  CHECK(((f.l() * f.l().transpose()) - m).norm() < 1e-12);
}

TEST_CASE("gaussian factor clamps a singular matrix and samples its column space") {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 1.0, 1.0, 1.0;  // rank one
  GaussianFactor f(m);
  CHECK(((f.l() * f.l().transpose()) - m).norm() < 1e-10);
  RngStream rng(3, {});
  double out[2];
  for (int i = 0; i < 100; ++i) {
    f.sample(rng, out);
    CHECK(std::abs(out[0] - out[1]) < 1e-10);
  }
}

TEST_CASE("gaussian factor rejects an indefinite matrix") {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3 and -1
  CHECK_THROWS_AS(GaussianFactor{m}, CovarianceError);
}

TEST_CASE("mvn sample matches its mean and covariance") {
  Eigen::MatrixXd m(2, 2);
  m << 2.0, 0.8, 0.8, 1.0;
  CovarianceMatrix cov(m);
  Eigen::VectorXd mu(2);
  mu << -1.0, 3.0;
  RngStream rng(9, {});
  const int n = 50000;
  Eigen::VectorXd s = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd ss = Eigen::MatrixXd::Zero(2, 2);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x = mvn_sample(mu, cov, rng);
    s += x;
    ss += (x - mu) * (x - mu).transpose();
  }
  CHECK((s / n - mu).norm() < 4.0 * std::sqrt(2.0 / n) * 2.0);
  CHECK((ss / n - m).norm() < 0.05);
}

TEST_CASE("set probability recovers known gaussian orthant masses") {
  Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2, 2);
  RngStream rng(15, {});
  const int b = 200000;
  const double p1 = gaussian_set_probability_mc(
      CovarianceMatrix(id), [](const Eigen::VectorXd& a) { return a[0] <= 1.2815515655446004; },
      b, rng);
  CHECK(std::abs(p1 - 0.9) < 4.5 * std::sqrt(0.9 * 0.1 / b));

  Eigen::MatrixXd c(2, 2);
  c << 1.0, 0.5, 0.5, 1.0;
  const double p2 = gaussian_set_probability_mc(
      CovarianceMatrix(c), [](const Eigen::VectorXd& a) { return a[0] <= 0 && a[1] <= 0; },
      b, rng);
  // Orthant mass 1/4 + asin(rho)/(2 pi) at rho = 1/2 is 1/3.
  CHECK(std::abs(p2 - 1.0 / 3.0) < 4.5 * std::sqrt((1.0 / 3) * (2.0 / 3) / b));
}

}  // TEST_SUITE
