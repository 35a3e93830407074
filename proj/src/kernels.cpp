#include "prepivot/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "prepivot/errors.hpp"

namespace prepivot {

Eigen::MatrixXd contrast_pairwise(int k) {
  if (k < 2) throw ParameterError("pairwise contrasts need k >= 2 groups");
  const int m = k * (k - 1) / 2;
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(k, m);
  int col = 0;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j, ++col) {
      c(i, col) = 1.0;
      c(j, col) = -1.0;
    }
  return c;
}

Eigen::MatrixXd contrast_centering(const Eigen::VectorXd& b) {
  const int k = static_cast<int>(b.size());
  if (k < 2) throw ParameterError("centering contrasts need k >= 2 groups");
  Eigen::MatrixXd c = Eigen::MatrixXd::Identity(k, k);
  c.noalias() -= b * Eigen::RowVectorXd::Ones(k);
  return c;
}

Eigen::MatrixXd wn_data_contrast(const GroupedDataset& ds) {
  if (ds.dim() != 1)
    throw ShapeError("precision-weighted contrast is univariate only");
  const int k = ds.k();
  if (k < 2) throw ParameterError("precision-weighted contrast needs k >= 2");
  Eigen::VectorXd w(k);
  double total = 0.0;
  for (int g = 0; g < k; ++g) {
    const int ng = ds.size(g);
    if (ng < 2)
      throw InsufficientDataError("group variance needs at least 2 observations");
    double mean = 0.0;
    for (int i = 0; i < ng; ++i) mean += ds.value(g, i);
    mean /= ng;
    double ss = 0.0;
    for (int i = 0; i < ng; ++i) {
      const double e = ds.value(g, i) - mean;
      ss += e * e;
    }
    const double var = ss / (ng - 1);
    if (!(var > 0.0))
      throw DegenerateStatisticError("zero group variance in precision weights");
    w(g) = ng / var;
    total += w(g);
  }
  w /= total;
  Eigen::MatrixXd c = Eigen::MatrixXd::Identity(k, k);
  c.noalias() -= w * Eigen::RowVectorXd::Ones(k);
  return c;
}

void KernelCache::bind(const GroupedDataset& ds, RngStream aux) {
  ds_ = &ds;
  aux_ = aux;
  have_mu_ = have_cov_ = have_kappa_ = have_median_ = have_gamma_pair_ = false;
  const std::size_t k = static_cast<std::size_t>(ds.k());
  if (sigma_.size() != k) sigma_.resize(k);
  if (gamma_factor_.size() != k) gamma_factor_.resize(k);
  for (auto& f : gamma_factor_) f.reset();
  median_var_.clear();
}

void KernelCache::require(bool cond, const char* what) const {
  if (!cond) throw ShapeError(what);
}

const Eigen::MatrixXd& KernelCache::mu() {
  if (!have_mu_) {
    const int d = ds_->dim(), k = ds_->k();
    mu_.resize(d, k);
    for (int g = 0; g < k; ++g) {
      const int ng = ds_->size(g);
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                     Eigen::RowMajor>>
          x(ds_->row(g, 0), ng, d);
      mu_.col(g) = x.colwise().mean().transpose();
    }
    have_mu_ = true;
  }
  return mu_;
}

void KernelCache::compute_moments() {
  const int d = ds_->dim(), k = ds_->k(), n = ds_->n();
  mu();
  nu_.setZero(d, d);
  const int max_ng = *std::max_element(ds_->sizes().begin(), ds_->sizes().end());
  if (centered_.rows() < max_ng || centered_.cols() != d)
    centered_.resize(max_ng, d);
  for (int g = 0; g < k; ++g) {
    const int ng = ds_->size(g);
    if (ng < 2)
      throw InsufficientDataError("group covariance needs at least 2 observations");
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>
        x(ds_->row(g, 0), ng, d);
    auto cen = centered_.topRows(ng);
    cen = x.rowwise() - mu_.col(g).transpose();
    sigma_[g].resize(d, d);
    sigma_[g].noalias() = cen.transpose() * cen;
    nu_ += sigma_[g];
    sigma_[g] /= ng - 1;
  }
  if (n <= k)
    throw InsufficientDataError("pooled covariance needs n > k observations");
  nu_ /= n - k;
  have_cov_ = true;
}

const Eigen::MatrixXd& KernelCache::sigma(int g) {
  if (!have_cov_) compute_moments();
  return sigma_[static_cast<std::size_t>(g)];
}

const Eigen::MatrixXd& KernelCache::nu() {
  if (!have_cov_) compute_moments();
  return nu_;
}

double KernelCache::kappa(int g) {
  require(ds_->dim() == 1, "third-moment kernel is univariate only");
  if (!have_kappa_) {
    const int k = ds_->k();
    mu();
    kappa_.assign(static_cast<std::size_t>(k), 0.0);
    for (int j = 0; j < k; ++j) {
      const int ng = ds_->size(j);
      const double m = mu_(0, j);
      double acc = 0.0;
      for (int i = 0; i < ng; ++i) {
        const double e = ds_->value(j, i) - m;
        acc += e * e * e;
      }
      kappa_[static_cast<std::size_t>(j)] = acc / ng;
    }
    have_kappa_ = true;
  }
  return kappa_[static_cast<std::size_t>(g)];
}

double KernelCache::group_median(int g, const double* vals, int ng) {
  (void)g;
  scratch_.assign(vals, vals + ng);
  auto mid = scratch_.begin() + ng / 2;
  std::nth_element(scratch_.begin(), mid, scratch_.end());
  if (ng % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(scratch_.begin(), mid);
  return 0.5 * (lo + hi);
}

double KernelCache::median(int g) {
  require(ds_->dim() == 1, "median kernel is univariate only");
  if (!have_median_) {
    const int k = ds_->k();
    median_.assign(static_cast<std::size_t>(k), 0.0);
    for (int j = 0; j < k; ++j)
      median_[static_cast<std::size_t>(j)] =
          group_median(j, ds_->row(j, 0), ds_->size(j));
    have_median_ = true;
  }
  return median_[static_cast<std::size_t>(g)];
}

double KernelCache::median_boot_var(int vboot) {
  require(ds_->dim() == 1 && ds_->k() == 2,
          "median bootstrap variance needs a univariate two-sample dataset");
  if (vboot < 2)
    throw ParameterError("median bootstrap variance needs vboot >= 2 draws");
  for (const auto& [key, val] : median_var_)
    if (key == vboot) return val;
  RngStream rs = aux_.child(static_cast<std::uint64_t>(vboot));
  const int n0 = ds_->size(0), n1 = ds_->size(1);
  const double root_n = std::sqrt(static_cast<double>(ds_->n()));
  std::vector<double> draw(static_cast<std::size_t>(std::max(n0, n1)));
  double s1 = 0.0, s2 = 0.0;
  for (int r = 0; r < vboot; ++r) {
    double med[2];
    for (int g = 0; g < 2; ++g) {
      const int ng = g == 0 ? n0 : n1;
      const double* src = ds_->row(g, 0);
      for (int i = 0; i < ng; ++i)
        draw[static_cast<std::size_t>(i)] =
            src[rs.uniform_int(static_cast<std::uint64_t>(ng))];
      med[g] = group_median(g, draw.data(), ng);
    }
    const double t = root_n * (med[0] - med[1]);
    s1 += t;
    s2 += t * t;
  }
  const double mean = s1 / vboot;
  const double var = std::max(0.0, s2 / vboot - mean * mean);
  median_var_.emplace_back(vboot, var);
  return var;
}

const GaussianFactor& KernelCache::gamma_block_factor(int g) {
  auto& slot = gamma_factor_[static_cast<std::size_t>(g)];
  if (!slot) {
    const double scale = static_cast<double>(ds_->n()) / ds_->size(g);
    slot.emplace(Eigen::MatrixXd(scale * sigma(g)));
  }
  return *slot;
}

const Eigen::MatrixXd& KernelCache::gamma_pair() {
  require(ds_->k() == 2, "pair contraction needs exactly 2 groups");
  if (!have_gamma_pair_) {
    const double n = ds_->n();
    gamma_pair_ = (n / ds_->size(0)) * sigma(0) + (n / ds_->size(1)) * sigma(1);
    have_gamma_pair_ = true;
  }
  return gamma_pair_;
}

StatKernels compute_kernels(const GroupedDataset& ds, unsigned needed) {
  StatKernels out;
  KernelCache kc;
  kc.bind(ds, RngStream(0, {}));
  const int d = ds.dim(), k = ds.k(), n = ds.n();
  out.b.resize(k);
  for (int g = 0; g < k; ++g) out.b(g) = static_cast<double>(ds.size(g)) / n;
  if (needed & kNeedMeans) out.mu = kc.mu();
  if (needed & (kNeedCovariances | kNeedPooled)) {
    out.sigma.reserve(static_cast<std::size_t>(k));
    for (int g = 0; g < k; ++g) out.sigma.push_back(kc.sigma(g));
    out.nu = kc.nu();
    out.gamma = Eigen::MatrixXd::Zero(k * d, k * d);
    out.lambda = Eigen::MatrixXd::Zero(k * d, k * d);
    for (int g = 0; g < k; ++g) {
      const double scale = static_cast<double>(n) / ds.size(g);
      out.gamma.block(g * d, g * d, d, d) = scale * out.sigma[static_cast<std::size_t>(g)];
      out.lambda.block(g * d, g * d, d, d) = scale * out.nu;
    }
  }
  if (needed & kNeedThirdMoments)
    for (int g = 0; g < k; ++g) out.kappa.push_back(kc.kappa(g));
  if (needed & kNeedMedians)
    for (int g = 0; g < k; ++g) out.median.push_back(kc.median(g));
  return out;
}

MedianKernels median_kernels(const GroupedDataset& ds, int vboot, RngStream& rng) {
  KernelCache kc;
  kc.bind(ds, rng);
  MedianKernels out;
  out.m1 = kc.median(0);
  out.m2 = kc.median(1);
  out.vhat = kc.median_boot_var(vboot);
  return out;
}

}  // namespace prepivot
