#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "prepivot/dataset.hpp"
#include "prepivot/distributions.hpp"
#include "prepivot/rng.hpp"

namespace prepivot {

// Pairwise-difference contrasts, k x k(k-1)/2, columns in lexicographic pair
// order (1,2),(1,3),...; each column sums to zero.
Eigen::MatrixXd contrast_pairwise(int k);

// Centering contrasts C2 = I - B where every column of B equals the group
// fraction vector b.
Eigen::MatrixXd contrast_centering(const Eigen::VectorXd& b);

// Precision-weighted centering contrast used by the heteroskedastic k-sample
// statistic: I - D where every column of D holds the weights
// (n_i/var_i) / sum_l (n_l/var_l). Univariate only; all group variances > 0.
Eigen::MatrixXd wn_data_contrast(const GroupedDataset& ds);

enum KernelNeed : unsigned {
  kNeedMeans = 1u,
  kNeedCovariances = 2u,
  kNeedPooled = 4u,
  kNeedThirdMoments = 8u,
  kNeedMedians = 16u,
};

// Materialized kernel snapshot, mainly for tests and diagnostics. The engine
// uses KernelCache below instead.
struct StatKernels {
  Eigen::MatrixXd mu;                  // d x k group means
  std::vector<Eigen::MatrixXd> sigma;  // per-group covariance, divisor n_i - 1
  Eigen::MatrixXd nu;                  // pooled covariance, divisor n - k
  std::vector<double> kappa;           // central third moments (univariate)
  std::vector<double> median;          // group medians (univariate)
  Eigen::VectorXd b;                   // group fractions n_i / n
  Eigen::MatrixXd gamma;               // kd x kd blockdiag (n/n_i) sigma_i
  Eigen::MatrixXd lambda;              // kd x kd blockdiag (n/n_i) nu
};

StatKernels compute_kernels(const GroupedDataset& ds, unsigned needed);

struct MedianKernels {
  double m1, m2;
  double vhat;  // bootstrap variance of sqrt(n) * (m1* - m2*)
};

MedianKernels median_kernels(const GroupedDataset& ds, int vboot, RngStream& rng);

// Lazy per-dataset kernel store shared by every statistic evaluated on the
// same dataset. bind() rebinds to a new dataset reusing all allocations, so a
// cache instance can serve millions of resamples without heap churn. Not
// concurrently shareable; each worker owns one.
class KernelCache {
 public:
  KernelCache() = default;

  void bind(const GroupedDataset& ds, RngStream aux);

  const GroupedDataset& ds() const { return *ds_; }
  int n() const { return ds_->n(); }
  int k() const { return ds_->k(); }
  int dim() const { return ds_->dim(); }

  const Eigen::MatrixXd& mu();
  const Eigen::MatrixXd& sigma(int g);
  const Eigen::MatrixXd& nu();
  double sigma1(int g) { return sigma(g)(0, 0); }
  double nu1() { return nu()(0, 0); }
  double kappa(int g);
  double median(int g);

  // Bootstrap variance of sqrt(n)*(m1*-m2*) over vboot within-group
  // resamples; k == 2, univariate. Draws come from aux.child(vboot), so the
  // value is independent of which statistics share the cache.
  double median_boot_var(int vboot);

  // Factor of the block (n/n_g) sigma_g, PSD-clamped.
  const GaussianFactor& gamma_block_factor(int g);

  // Two-sample contraction (n/n_1) sigma_1 + (n/n_2) sigma_2.
  const Eigen::MatrixXd& gamma_pair();

 private:
  void require(bool cond, const char* what) const;
  void compute_moments();  // means + covariances + pooled in one sweep
  double group_median(int g, const double* vals, int ng);

  const GroupedDataset* ds_ = nullptr;
  RngStream aux_;

  bool have_mu_ = false, have_cov_ = false, have_kappa_ = false, have_median_ = false;
  bool have_gamma_pair_ = false;
  Eigen::MatrixXd mu_;
  std::vector<Eigen::MatrixXd> sigma_;
  Eigen::MatrixXd nu_;
  std::vector<double> kappa_;
  std::vector<double> median_;
  Eigen::MatrixXd gamma_pair_;
  std::vector<std::optional<GaussianFactor>> gamma_factor_;
  std::vector<std::pair<int, double>> median_var_;  // keyed by vboot
  std::vector<double> scratch_;
  Eigen::MatrixXd centered_;
};

}  // namespace prepivot
