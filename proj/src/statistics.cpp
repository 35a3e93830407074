#include "prepivot/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "prepivot/distributions.hpp"
#include "prepivot/errors.hpp"

namespace prepivot {

namespace {

struct IdName {
  StatId id;
  const char* name;
};

constexpr std::array<IdName, kNumStatIds> kIdNames{{
    {StatId::kDiffMeans, "diff_means"},
    {StatId::kStudentized, "studentized"},
    {StatId::kEdgeworth, "edgeworth"},
    {StatId::kHotellingPooled, "hotelling_pooled"},
    {StatId::kHotellingUnpooled, "hotelling_unpooled"},
    {StatId::kMaxAbsT, "max_abs_t"},
    {StatId::kAnovaF, "anova_F"},
    {StatId::kTukeyKramer, "tukey_kramer"},
    {StatId::kCrWn, "cr_Wn"},
    {StatId::kManovaWilks, "manova_wilks"},
    {StatId::kManovaPillai, "manova_pillai"},
    {StatId::kManovaLawleyHotelling, "manova_lawley_hotelling"},
    {StatId::kManovaRoy, "manova_roy"},
    {StatId::kMedianDiff, "median_diff"},
    {StatId::kMedianStudentized, "median_studentized"},
}};

bool is_two_sample_only(StatId id) {
  switch (id) {
    case StatId::kDiffMeans:
    case StatId::kStudentized:
    case StatId::kEdgeworth:
    case StatId::kHotellingPooled:
    case StatId::kHotellingUnpooled:
    case StatId::kMaxAbsT:
    case StatId::kMedianDiff:
    case StatId::kMedianStudentized:
      return true;
    default:
      return false;
  }
}

bool is_univariate_only(StatId id) {
  switch (id) {
    case StatId::kDiffMeans:
    case StatId::kStudentized:
    case StatId::kEdgeworth:
    case StatId::kAnovaF:
    case StatId::kTukeyKramer:
    case StatId::kCrWn:
    case StatId::kMedianDiff:
    case StatId::kMedianStudentized:
      return true;
    default:
      return false;
  }
}

// Fills out with C2 * diag(sqrt(b)): out(g, j) = (1{g==j} - b_g) sqrt(b_j).
void build_scaled_centering(const GroupedDataset& ds, Eigen::MatrixXd& out) {
  const int k = ds.k(), n = ds.n();
  out.resize(k, k);
  for (int j = 0; j < k; ++j) {
    const double sb = std::sqrt(static_cast<double>(ds.size(j)) / n);
    for (int g = 0; g < k; ++g) {
      const double bg = static_cast<double>(ds.size(g)) / n;
      out(g, j) = ((g == j ? 1.0 : 0.0) - bg) * sb;
    }
  }
}

}  // namespace

const char* to_string(StatId id) {
  for (const auto& e : kIdNames)
    if (e.id == id) return e.name;
  throw ParameterError("unknown statistic id");
}

StatId stat_id_from_string(const std::string& s) {
  for (const auto& e : kIdNames)
    if (s == e.name) return e.id;
  throw ConfigError("unknown statistic: " + s);
}

const std::array<StatId, kNumStatIds>& all_stat_ids() {
  static const std::array<StatId, kNumStatIds> ids = [] {
    std::array<StatId, kNumStatIds> a{};
    for (int i = 0; i < kNumStatIds; ++i) a[static_cast<std::size_t>(i)] = kIdNames[static_cast<std::size_t>(i)].id;
    return a;
  }();
  return ids;
}

void check_admissible(StatId id, int k, int dim) {
  if (k < 2)
    throw ConfigError(std::string(to_string(id)) + " needs at least 2 groups");
  if (is_two_sample_only(id) && k != 2)
    throw ConfigError(std::string(to_string(id)) + " needs exactly 2 groups");
  if (is_univariate_only(id) && dim != 1)
    throw ConfigError(std::string(to_string(id)) + " is univariate only");
}

void StatEvaluator::bind(const GroupedDataset& ds, KernelCache& kc) {
  check_admissible(id_, ds.k(), ds.dim());
  ds_ = &ds;
  kc_ = &kc;
  sqrt_n_ = std::sqrt(static_cast<double>(ds.n()));
  degenerate_ = false;
  degenerate_reason_.clear();
  do_bind();
  if (origin_zero_.rows() != theta_.rows() || origin_zero_.cols() != theta_.cols())
    origin_zero_.setZero(theta_.rows(), theta_.cols());
}

void StatEvaluator::mark_degenerate(const std::string& reason) {
  degenerate_ = true;
  degenerate_reason_ = reason;
}

void StatEvaluator::require_not_degenerate() {
  if (degenerate_)
    throw DegenerateStatisticError(std::string(to_string(id_)) + ": " +
                                   degenerate_reason_);
}

double StatEvaluator::value() { return centered(origin_zero_); }

double StatEvaluator::centered(const Eigen::MatrixXd& origin) {
  require_not_degenerate();
  diff_ = theta_ - origin;
  v_.noalias() = sqrt_n_ * diff_ * contrast_;
  return g_of_v();
}

double StatEvaluator::g_at(const Eigen::MatrixXd& v) {
  require_not_degenerate();
  if (v.rows() != theta_.rows() || v.cols() != contrast_.cols())
    throw ShapeError("condition matrix must be d x m");
  v_ = v;
  return g_of_v();
}

double StatEvaluator::closed_k(double) {
  throw ConfigError(std::string(to_string(id_)) +
                    " has no closed-form reference transform");
}

void StatEvaluator::mc_prepare() {
  throw ConfigError(std::string(to_string(id_)) +
                    " has no Monte Carlo reference sampler");
}

double StatEvaluator::mc_draw(RngStream&) {
  throw ConfigError(std::string(to_string(id_)) +
                    " has no Monte Carlo reference sampler");
}

namespace {

class DiffMeansEval final : public StatEvaluator {
 public:
  DiffMeansEval() : StatEvaluator(StatId::kDiffMeans) {}

  bool has_closed_form() const override { return true; }
  double closed_k(double x) override {
    ensure_c();
    if (c_ > 0.0) return std_normal_cdf(x / std::sqrt(c_));
    return x >= 0.0 ? 1.0 : 0.0;  // point-mass limit of Phi(x / sd)
  }
  void mc_prepare() override {
    ensure_c();
    sd_ = std::sqrt(c_);
  }
  double mc_draw(RngStream& rng) override { return sd_ * rng.normal(); }

 private:
  void do_bind() override {
    theta_ = kc_->mu();
    if (contrast_.rows() != 2) contrast_ = contrast_pairwise(2);
    c_ready_ = false;
  }
  double g_of_v() override { return v_(0, 0); }
  void ensure_c() {
    if (!c_ready_) {
      c_ = kc_->gamma_pair()(0, 0);
      c_ready_ = true;
    }
  }
  double c_ = 0.0, sd_ = 0.0;
  bool c_ready_ = false;
};

class StudentizedEval final : public StatEvaluator {
 public:
  StudentizedEval() : StatEvaluator(StatId::kStudentized) {}

  bool has_closed_form() const override { return true; }
  double closed_k(double x) override { return std_normal_cdf(x); }
  void mc_prepare() override {}
  double mc_draw(RngStream& rng) override { return rng.normal(); }

 private:
  void do_bind() override {
    theta_ = kc_->mu();
    if (contrast_.rows() != 2) contrast_ = contrast_pairwise(2);
    const double c = kc_->gamma_pair()(0, 0);
    if (c > 0.0)
      inv_sd_ = 1.0 / std::sqrt(c);
    else
      mark_degenerate("two-sample variance contraction is zero");
  }
  double g_of_v() override { return v_(0, 0) * inv_sd_; }
  double inv_sd_ = 0.0;
};

class EdgeworthEval final : public StatEvaluator {
 public:
  EdgeworthEval() : StatEvaluator(StatId::kEdgeworth) {}

  void mc_prepare() override {}
  double mc_draw(RngStream& rng) override { return corrected(rng.normal()); }

 private:
  void do_bind() override {
    theta_ = kc_->mu();
    if (contrast_.rows() != 2) contrast_ = contrast_pairwise(2);
    const double c = kc_->gamma_pair()(0, 0);
    if (!(c > 0.0)) {
      mark_degenerate("two-sample variance contraction is zero");
      return;
    }
    inv_sd_ = 1.0 / std::sqrt(c);
    const auto& ds = kc_->ds();
    const double n = ds.n();
    const double r1 = n / ds.size(0), r2 = n / ds.size(1);
    const double xi = r1 * r1 * kc_->kappa(0) - r2 * r2 * kc_->kappa(1);
    coef_ = xi / (6.0 * c * std::sqrt(c) * std::sqrt(n));
  }
  double g_of_v() override { return corrected(v_(0, 0) * inv_sd_); }
  double corrected(double s) const {
    return std_normal_cdf(s) + coef_ * std_normal_pdf(s) * (2.0 * s * s + 1.0);
  }
  double inv_sd_ = 0.0, coef_ = 0.0;
};

class HotellingPooledEval final : public StatEvaluator {
 public:
  HotellingPooledEval() : StatEvaluator(StatId::kHotellingPooled) {}

  void mc_prepare() override {
    if (mc_ready_) return;
    const Eigen::MatrixXd& g = kc_->gamma_pair();
    if (scalar_) {
      ev_.resize(1);
      ev_(0) = g(0, 0) * inv_lam_;
    } else {
      // Eigenvalues of L^-1 Gamma_C L^-T turn each draw into a weighted
      // chi-squared sum, replacing a d-dim solve per draw by d normals.
      Eigen::MatrixXd a = g;
      llt_.matrixL().solveInPlace(a);
      Eigen::MatrixXd b = a.transpose();
      llt_.matrixL().solveInPlace(b);
      es_.compute(b, Eigen::EigenvaluesOnly);
      ev_ = es_.eigenvalues();
    }
    mc_ready_ = true;
  }
  double mc_draw(RngStream& rng) override {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < ev_.size(); ++i) {
      const double z = rng.normal();
      acc += ev_(i) * z * z;
    }
    return acc;
  }

 private:
  void do_bind() override {
    theta_ = kc_->mu();
    if (contrast_.rows() != 2) contrast_ = contrast_pairwise(2);
    mc_ready_ = false;
    scalar_ = kc_->dim() == 1;
    const auto& ds = kc_->ds();
    const double n = ds.n();
    const double scale = n / ds.size(0) + n / ds.size(1);
    if (scalar_) {
      const double lam = scale * kc_->nu1();
      if (lam > 0.0)
        inv_lam_ = 1.0 / lam;
      else
        mark_degenerate("singular pooled covariance");
    } else {
      lam_ = scale * kc_->nu();
      llt_.compute(lam_);
      if (llt_.info() != Eigen::Success)
        mark_degenerate("singular pooled covariance");
    }
  }
  double g_of_v() override {
    if (scalar_) {
      const double v = v_(0, 0);
      return v * v * inv_lam_;
    }
    y_ = v_.col(0);
    llt_.matrixL().solveInPlace(y_);
    return y_.squaredNorm();
  }
  bool scalar_ = false, mc_ready_ = false;
  double inv_lam_ = 0.0;
  Eigen::MatrixXd lam_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd y_, ev_;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_;
};

class HotellingUnpooledEval final : public StatEvaluator {
 public:
  HotellingUnpooledEval() : StatEvaluator(StatId::kHotellingUnpooled) {}

  bool has_closed_form() const override { return true; }
  double closed_k(double x) override { return chi2_cdf(x, kc_->dim()); }
  void mc_prepare() override {}
  double mc_draw(RngStream& rng) override {
    // Whitening by the same Gamma_C that defines g makes the reference draw
    // exactly chi-squared with d degrees of freedom.
    double acc = 0.0;
    for (int i = 0; i < dim_; ++i) {
      const double z = rng.normal();
      acc += z * z;
    }
    return acc;
  }

 private:
  void do_bind() override {
    theta_ = kc_->mu();
    if (contrast_.rows() != 2) contrast_ = contrast_pairwise(2);
    dim_ = kc_->dim();
    scalar_ = dim_ == 1;
    if (scalar_) {
      const double c = kc_->gamma_pair()(0, 0);
      if (c > 0.0)
        inv_c_ = 1.0 / c;
      else
        mark_degenerate("singular unpooled covariance contraction");
    } else {
      llt_.compute(kc_->gamma_pair());
      if (llt_.info() != Eigen::Success)
        mark_degenerate("singular unpooled covariance contraction");
    }
  }
  double g_of_v() override {
    if (scalar_) {
      const double v = v_(0, 0);
      return v * v * inv_c_;
    }
    y_ = v_.col(0);
    llt_.matrixL().solveInPlace(y_);
    return y_.squaredNorm();
  }
  bool scalar_ = false;
  int dim_ = 1;
  double inv_c_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd y_;
};

class MaxAbsTEval final : public StatEvaluator {
 public:
  MaxAbsTEval() : StatEvaluator(StatId::kMaxAbsT) {}

  void mc_prepare() override {
    if (mc_ready_) return;
    if (!scalar_) {
      factor_.emplace(kc_->gamma_pair());
      if (a_.size() != kc_->dim()) a_.resize(kc_->dim());
    }
    mc_ready_ = true;
  }
  double mc_draw(RngStream& rng) override {
    if (scalar_) return std::abs(rng.normal());
    factor_->sample(rng, a_.data());
    double m = 0.0;
    for (Eigen::Index i = 0; i < a_.size(); ++i)
      m = std::max(m, std::abs(a_(i)) * inv_sd_[static_cast<std::size_t>(i)]);
    return m;
  }

 private:
  void do_bind() override {
    theta_ = kc_->mu();
    if (contrast_.rows() != 2) contrast_ = contrast_pairwise(2);
    mc_ready_ = false;
    factor_.reset();
    scalar_ = kc_->dim() == 1;
    const Eigen::MatrixXd& g = kc_->gamma_pair();
    const int d = kc_->dim();
    inv_sd_.assign(static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < d; ++i) {
      const double v = g(i, i);
      if (!(v > 0.0)) {
        mark_degenerate("zero-variance coordinate in covariance contraction");
        return;
      }
      inv_sd_[static_cast<std::size_t>(i)] = 1.0 / std::sqrt(v);
    }
  }
  double g_of_v() override {
    double m = 0.0;
    for (Eigen::Index i = 0; i < v_.rows(); ++i)
      m = std::max(m, std::abs(v_(i, 0)) * inv_sd_[static_cast<std::size_t>(i)]);
    return m;
  }
  bool mc_ready_ = false, scalar_ = false;
  std::vector<double> inv_sd_;
  std::optional<GaussianFactor> factor_;
  Eigen::VectorXd a_;
};

class AnovaFEval final : public StatEvaluator {
 public:
  AnovaFEval() : StatEvaluator(StatId::kAnovaF) {}

  void mc_prepare() override {
    if (mc_ready_) return;
    const auto& ds = kc_->ds();
    const int k = ds.k();
    s_.resize(static_cast<std::size_t>(k));
    a_.resize(static_cast<std::size_t>(k));
    const double n = ds.n();
    for (int g = 0; g < k; ++g)
      s_[static_cast<std::size_t>(g)] = std::sqrt(n / ds.size(g) * kc_->sigma1(g));
    mc_ready_ = true;
  }
  double mc_draw(RngStream& rng) override {
    const int k = static_cast<int>(a_.size());
    for (int g = 0; g < k; ++g)
      a_[static_cast<std::size_t>(g)] = s_[static_cast<std::size_t>(g)] * rng.normal();
    double ss = 0.0;
    for (int j = 0; j < k; ++j) {
      double vj = 0.0;
      for (int g = 0; g < k; ++g) vj += a_[static_cast<std::size_t>(g)] * contrast_(g, j);
      ss += vj * vj;
    }
    return ss * inv_den_;
  }

 private:
  void do_bind() override {
    theta_ = kc_->mu();
    build_scaled_centering(kc_->ds(), contrast_);
    mc_ready_ = false;
    const double nu = kc_->nu1();
    const int k = kc_->k();
    if (nu > 0.0)
      inv_den_ = 1.0 / ((k - 1) * nu);
    else
      mark_degenerate("zero pooled variance");
  }
  double g_of_v() override { return v_.row(0).squaredNorm() * inv_den_; }
  bool mc_ready_ = false;
  double inv_den_ = 0.0;
  std::vector<double> s_, a_;
};

class TukeyKramerEval final : public StatEvaluator {
 public:
  TukeyKramerEval() : StatEvaluator(StatId::kTukeyKramer) {}

  void mc_prepare() override {
    if (mc_ready_) return;
    const auto& ds = kc_->ds();
    const int k = ds.k();
    s_.resize(static_cast<std::size_t>(k));
    a_.resize(static_cast<std::size_t>(k));
    const double n = ds.n();
    for (int g = 0; g < k; ++g)
      s_[static_cast<std::size_t>(g)] = std::sqrt(n / ds.size(g) * kc_->sigma1(g));
    mc_ready_ = true;
  }
  double mc_draw(RngStream& rng) override {
    const int k = static_cast<int>(a_.size());
    for (int g = 0; g < k; ++g)
      a_[static_cast<std::size_t>(g)] = s_[static_cast<std::size_t>(g)] * rng.normal();
    double m = 0.0;
    for (std::size_t p = 0; p < pi_.size(); ++p)
      m = std::max(m, std::abs(a_[pi_[p]] - a_[pj_[p]]) * inv_den_[p]);
    return m;
  }

 private:
  void do_bind() override {
    theta_ = kc_->mu();
    const int k = kc_->k();
    const int m = k * (k - 1) / 2;
    if (contrast_.rows() != k || contrast_.cols() != m)
      contrast_ = contrast_pairwise(k);
    mc_ready_ = false;
    const double nu = kc_->nu1();
    if (!(nu > 0.0)) {
      mark_degenerate("zero pooled variance");
      return;
    }
    const auto& ds = kc_->ds();
    const double n = ds.n();
    pi_.clear();
    pj_.clear();
    inv_den_.clear();
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j) {
        pi_.push_back(static_cast<std::size_t>(i));
        pj_.push_back(static_cast<std::size_t>(j));
        inv_den_.push_back(1.0 / std::sqrt((n / ds.size(i) + n / ds.size(j)) * nu));
      }
  }
  double g_of_v() override {
    double m = 0.0;
    for (Eigen::Index p = 0; p < v_.cols(); ++p)
      m = std::max(m, std::abs(v_(0, p)) * inv_den_[static_cast<std::size_t>(p)]);
    return m;
  }
  bool mc_ready_ = false;
  std::vector<std::size_t> pi_, pj_;
  std::vector<double> inv_den_, s_, a_;
};

class CrWnEval final : public StatEvaluator {
 public:
  CrWnEval() : StatEvaluator(StatId::kCrWn) {}

  bool has_closed_form() const override { return true; }
  double closed_k(double x) override { return chi2_cdf(x, kc_->k() - 1); }
  void mc_prepare() override {
    if (mc_ready_) return;
    const auto& ds = kc_->ds();
    const int k = ds.k();
    s_.resize(static_cast<std::size_t>(k));
    a_.resize(static_cast<std::size_t>(k));
    const double n = ds.n();
    for (int g = 0; g < k; ++g)
      s_[static_cast<std::size_t>(g)] = std::sqrt(n / ds.size(g) * kc_->sigma1(g));
    mc_ready_ = true;
  }
  double mc_draw(RngStream& rng) override {
    const int k = static_cast<int>(a_.size());
    double abar = 0.0;
    for (int g = 0; g < k; ++g) {
      a_[static_cast<std::size_t>(g)] = s_[static_cast<std::size_t>(g)] * rng.normal();
      abar += w_[static_cast<std::size_t>(g)] * a_[static_cast<std::size_t>(g)];
    }
    double acc = 0.0;
    for (int g = 0; g < k; ++g) {
      const double vg = a_[static_cast<std::size_t>(g)] - abar;
      acc += coef_[static_cast<std::size_t>(g)] * vg * vg;
    }
    return acc;
  }

 private:
  void do_bind() override {
    theta_ = kc_->mu();
    mc_ready_ = false;
    const auto& ds = kc_->ds();
    const int k = ds.k();
    const double n = ds.n();
    w_.assign(static_cast<std::size_t>(k), 0.0);
    coef_.assign(static_cast<std::size_t>(k), 0.0);
    double wsum = 0.0;
    for (int g = 0; g < k; ++g) {
      const double var = kc_->sigma1(g);
      if (!(var > 0.0)) {
        mark_degenerate("zero group variance in precision weights");
        return;
      }
      w_[static_cast<std::size_t>(g)] = ds.size(g) / var;
      coef_[static_cast<std::size_t>(g)] = (ds.size(g) / n) / var;
      wsum += w_[static_cast<std::size_t>(g)];
    }
    for (auto& w : w_) w /= wsum;
    contrast_.resize(k, k);
    for (int j = 0; j < k; ++j)
      for (int g = 0; g < k; ++g)
        contrast_(g, j) = (g == j ? 1.0 : 0.0) - w_[static_cast<std::size_t>(g)];
  }
  double g_of_v() override {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < v_.cols(); ++j) {
      const double vj = v_(0, j);
      acc += coef_[static_cast<std::size_t>(j)] * vj * vj;
    }
    return acc;
  }
  bool mc_ready_ = false;
  std::vector<double> w_, coef_, s_, a_;
};

class ManovaEval final : public StatEvaluator {
 public:
  explicit ManovaEval(StatId id) : StatEvaluator(id) {}

  void mc_prepare() override {
    if (mc_ready_) return;
    const auto& ds = kc_->ds();
    const int k = ds.k();
    if (scalar_) {
      s_.resize(static_cast<std::size_t>(k));
      a_.resize(static_cast<std::size_t>(k));
      const double n = ds.n();
      for (int g = 0; g < k; ++g)
        s_[static_cast<std::size_t>(g)] = std::sqrt(n / ds.size(g) * kc_->sigma1(g));
    } else {
      fac_.resize(static_cast<std::size_t>(k));
      for (int g = 0; g < k; ++g)
        fac_[static_cast<std::size_t>(g)] = &kc_->gamma_block_factor(g);
      amat_.resize(kc_->dim(), k);
    }
    mc_ready_ = true;
  }
  double mc_draw(RngStream& rng) override {
    const int k = kc_->k();
    if (scalar_) {
      for (int g = 0; g < k; ++g)
        a_[static_cast<std::size_t>(g)] = s_[static_cast<std::size_t>(g)] * rng.normal();
      double ss = 0.0;
      for (int j = 0; j < k; ++j) {
        double vj = 0.0;
        for (int g = 0; g < k; ++g) vj += a_[static_cast<std::size_t>(g)] * contrast_(g, j);
        ss += vj * vj;
      }
      return map_scalar(ss * inv_den_);
    }
    for (int g = 0; g < k; ++g)
      fac_[static_cast<std::size_t>(g)]->sample(rng, amat_.col(g).data());
    v_.noalias() = amat_ * contrast_;
    return g_of_v();
  }

 private:
  void do_bind() override {
    theta_ = kc_->mu();
    build_scaled_centering(kc_->ds(), contrast_);
    mc_ready_ = false;
    scalar_ = kc_->dim() == 1;
    const int k = kc_->k();
    if (scalar_) {
      const double nu = kc_->nu1();
      if (nu > 0.0)
        inv_den_ = 1.0 / ((k - 1) * nu);
      else
        mark_degenerate("singular pooled covariance");
    } else {
      llt_.compute(kc_->nu());
      if (llt_.info() != Eigen::Success)
        mark_degenerate("singular pooled covariance");
    }
  }
  double g_of_v() override {
    if (scalar_) return map_scalar(v_.row(0).squaredNorm() * inv_den_);
    const int k = kc_->k();
    h_.noalias() = v_ * v_.transpose();
    h_ /= k - 1;
    llt_.matrixL().solveInPlace(h_);
    ht_ = h_.transpose();
    llt_.matrixL().solveInPlace(ht_);
    es_.compute(ht_, Eigen::EigenvaluesOnly);
    const auto& lam = es_.eigenvalues();
    switch (id_) {
      case StatId::kManovaWilks: {
        double prod = 1.0;
        for (Eigen::Index i = 0; i < lam.size(); ++i)
          prod *= 1.0 / (1.0 + std::max(0.0, lam(i)));
        return -prod;
      }
      case StatId::kManovaPillai: {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < lam.size(); ++i) {
          const double l = std::max(0.0, lam(i));
          acc += l / (1.0 + l);
        }
        return acc;
      }
      case StatId::kManovaLawleyHotelling: {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < lam.size(); ++i) acc += std::max(0.0, lam(i));
        return acc;
      }
      default:
        return std::max(0.0, lam(lam.size() - 1));  // eigenvalues ascending
    }
  }
  double map_scalar(double l) const {
    switch (id_) {
      case StatId::kManovaWilks:
        return -1.0 / (1.0 + l);
      case StatId::kManovaPillai:
        return l / (1.0 + l);
      default:
        return l;  // Lawley-Hotelling and Roy coincide at d = 1
    }
  }
  bool scalar_ = false, mc_ready_ = false;
  double inv_den_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::MatrixXd h_, ht_, amat_;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_;
  std::vector<double> s_, a_;
  std::vector<const GaussianFactor*> fac_;
};

class MedianDiffEval final : public StatEvaluator {
 public:
  MedianDiffEval() : StatEvaluator(StatId::kMedianDiff) {}

  void mc_prepare() override {
    sd_ = std::sqrt(kc_->gamma_pair()(0, 0));
  }
  double mc_draw(RngStream& rng) override { return sd_ * rng.normal(); }

 private:
  void do_bind() override {
    theta_.resize(1, 2);
    theta_(0, 0) = kc_->median(0);
    theta_(0, 1) = kc_->median(1);
    if (contrast_.rows() != 2) contrast_ = contrast_pairwise(2);
  }
  double g_of_v() override { return v_(0, 0); }
  double sd_ = 0.0;
};

class MedianStudentizedEval final : public StatEvaluator {
 public:
  explicit MedianStudentizedEval(int vboot)
      : StatEvaluator(StatId::kMedianStudentized), vboot_(vboot) {
    if (vboot_ < 2)
      throw ParameterError("median bootstrap variance needs vboot >= 2 draws");
  }

  void mc_prepare() override {
    sd_ = std::sqrt(kc_->gamma_pair()(0, 0));
  }
  double mc_draw(RngStream& rng) override {
    return sd_ * rng.normal() * inv_sd_;
  }

 private:
  void do_bind() override {
    theta_.resize(1, 2);
    theta_(0, 0) = kc_->median(0);
    theta_(0, 1) = kc_->median(1);
    if (contrast_.rows() != 2) contrast_ = contrast_pairwise(2);
    const double vhat = kc_->median_boot_var(vboot_);
    if (vhat > 0.0)
      inv_sd_ = 1.0 / std::sqrt(vhat);
    else
      mark_degenerate("zero bootstrap median variance");
  }
  double g_of_v() override { return v_(0, 0) * inv_sd_; }
  int vboot_;
  double inv_sd_ = 0.0, sd_ = 0.0;
};

}  // namespace

std::unique_ptr<StatEvaluator> StatEvaluator::create(const StatisticSpec& spec) {
  switch (spec.id) {
    case StatId::kDiffMeans:
      return std::make_unique<DiffMeansEval>();
    case StatId::kStudentized:
      return std::make_unique<StudentizedEval>();
    case StatId::kEdgeworth:
      return std::make_unique<EdgeworthEval>();
    case StatId::kHotellingPooled:
      return std::make_unique<HotellingPooledEval>();
    case StatId::kHotellingUnpooled:
      return std::make_unique<HotellingUnpooledEval>();
    case StatId::kMaxAbsT:
      return std::make_unique<MaxAbsTEval>();
    case StatId::kAnovaF:
      return std::make_unique<AnovaFEval>();
    case StatId::kTukeyKramer:
      return std::make_unique<TukeyKramerEval>();
    case StatId::kCrWn:
      return std::make_unique<CrWnEval>();
    case StatId::kManovaWilks:
    case StatId::kManovaPillai:
    case StatId::kManovaLawleyHotelling:
    case StatId::kManovaRoy:
      return std::make_unique<ManovaEval>(spec.id);
    case StatId::kMedianDiff:
      return std::make_unique<MedianDiffEval>();
    case StatId::kMedianStudentized:
      return std::make_unique<MedianStudentizedEval>(spec.vboot);
  }
  throw ParameterError("unknown statistic id");
}

double evaluate(const StatisticSpec& spec, const GroupedDataset& ds, RngStream aux) {
  KernelCache kc;
  kc.bind(ds, aux);
  auto ev = StatEvaluator::create(spec);
  ev->bind(ds, kc);
  return ev->value();
}

double evaluate(const StatisticSpec& spec, const GroupedDataset& ds) {
  return evaluate(spec, ds, RngStream(0, {}));
}

double evaluate_bootstrap(const StatisticSpec& spec, const GroupedDataset& boot,
                          const GroupedDataset& original, RngStream aux) {
  KernelCache okc;
  okc.bind(original, aux.child(0));
  auto ev = StatEvaluator::create(spec);
  ev->bind(original, okc);
  Eigen::MatrixXd origin = ev->theta();
  KernelCache kc;
  kc.bind(boot, aux.child(1));
  ev->bind(boot, kc);
  return ev->centered(origin);
}

double evaluate_bootstrap(const StatisticSpec& spec, const GroupedDataset& boot,
                          const GroupedDataset& original) {
  return evaluate_bootstrap(spec, boot, original, RngStream(0, {}));
}

double edgeworth_statistic(const GroupedDataset& ds) {
  StatisticSpec spec;
  spec.id = StatId::kEdgeworth;
  return evaluate(spec, ds);
}

}  // namespace prepivot
