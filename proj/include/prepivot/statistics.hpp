#pragma once

#include <Eigen/Dense>
#include <array>
#include <memory>
#include <string>

#include "prepivot/dataset.hpp"
#include "prepivot/kernels.hpp"
#include "prepivot/rng.hpp"

namespace prepivot {

enum class StatId {
  kDiffMeans,
  kStudentized,
  kEdgeworth,
  kHotellingPooled,
  kHotellingUnpooled,
  kMaxAbsT,
  kAnovaF,
  kTukeyKramer,
  kCrWn,
  kManovaWilks,
  kManovaPillai,
  kManovaLawleyHotelling,
  kManovaRoy,
  kMedianDiff,
  kMedianStudentized,
};

constexpr int kNumStatIds = 15;

// Canonical spellings used by the CLI and output tables.
const char* to_string(StatId id);
StatId stat_id_from_string(const std::string& s);
const std::array<StatId, kNumStatIds>& all_stat_ids();

struct StatisticSpec {
  StatId id = StatId::kDiffMeans;
  int vboot = 200;  // bootstrap draws behind the median variance kernel
};

// Throws ConfigError when the statistic cannot be formed on a dataset of the
// given shape (wrong group count or dimension).
void check_admissible(StatId id, int k, int dim);

// A bound statistic in condition form: value = g(sqrt(n) (Theta - origin) C,
// eta), with Theta the estimator matrix (d x k), C the data-dependent
// contrast (k x m), and eta auxiliary kernels. bind() computes everything
// from a dataset; centered() then evaluates g at any origin without touching
// the data again, which is what the bootstrap and Gaussian layers need.
//
// Degenerate kernels (a singular variance where g needs its inverse) are
// recorded rather than thrown: degenerate() turns true and value() throws
// DegenerateStatisticError on use. Missing data for a kernel (a group of
// size 1 when a covariance is required) still throws from bind().
//
// An evaluator is single-threaded and reusable: rebinding reuses all
// workspace allocations.
class StatEvaluator {
 public:
  static std::unique_ptr<StatEvaluator> create(const StatisticSpec& spec);
  virtual ~StatEvaluator() = default;

  StatId id() const { return id_; }

  // Computes Theta, C, and eta from ds via the shared cache. The cache must
  // outlive subsequent calls; it is also the source of lazily-pulled kernels
  // for the Gaussian layer.
  void bind(const GroupedDataset& ds, KernelCache& kc);

  bool degenerate() const { return degenerate_; }
  const std::string& degenerate_reason() const { return degenerate_reason_; }

  const Eigen::MatrixXd& theta() const { return theta_; }
  const Eigen::MatrixXd& contrast() const { return contrast_; }

  // g(sqrt(n) Theta C, eta): the statistic on the bound dataset.
  double value();

  // g(sqrt(n) (Theta - origin) C, eta); origin is d x k.
  double centered(const Eigen::MatrixXd& origin);

  // g evaluated at an explicit condition matrix V (d x m), bypassing the
  // sqrt(n) (Theta - origin) C assembly. Exposes the factorization.
  double g_at(const Eigen::MatrixXd& v);

  // Exact Gaussian reference transform K(x) = P(g(vec^-1(a) C, eta) <= x)
  // for a ~ N(0, Gamma-hat), available in closed form for some statistics.
  virtual bool has_closed_form() const { return false; }
  virtual double closed_k(double x);

  // Monte Carlo draws of g(vec^-1(a) C, eta), a ~ N(0, Gamma-hat), for the
  // statistics without a usable closed form. mc_prepare() pulls the needed
  // Gamma-hat factors from the bound cache once; mc_draw() then performs one
  // draw with no allocation.
  virtual void mc_prepare();
  virtual double mc_draw(RngStream& rng);

 protected:
  explicit StatEvaluator(StatId id) : id_(id) {}

  virtual void do_bind() = 0;
  virtual double g_of_v() = 0;  // reads v_ and bound kernels

  void mark_degenerate(const std::string& reason);
  void require_not_degenerate();

  StatId id_;
  const GroupedDataset* ds_ = nullptr;
  KernelCache* kc_ = nullptr;
  double sqrt_n_ = 0.0;
  bool degenerate_ = false;
  std::string degenerate_reason_;
  Eigen::MatrixXd theta_;     // d x k
  Eigen::MatrixXd contrast_;  // k x m
  Eigen::MatrixXd v_;         // d x m scratch
  Eigen::MatrixXd diff_;      // d x k scratch
  Eigen::MatrixXd origin_zero_;
};

// Ops mirroring the evaluator for one-shot use. The median statistics draw
// their variance kernel from aux (a default stream keyed by seed 0 when
// omitted); every other statistic ignores aux.
double evaluate(const StatisticSpec& spec, const GroupedDataset& ds);
double evaluate(const StatisticSpec& spec, const GroupedDataset& ds, RngStream aux);

// Bootstrap-recentered value g(sqrt(n) (Theta* - Theta) C*, eta*): all
// kernels from boot, centering origin from original.
double evaluate_bootstrap(const StatisticSpec& spec, const GroupedDataset& boot,
                          const GroupedDataset& original);
double evaluate_bootstrap(const StatisticSpec& spec, const GroupedDataset& boot,
                          const GroupedDataset& original, RngStream aux);

// Skewness-corrected studentized transform E(S_n) in [0, 1]-ish scale.
double edgeworth_statistic(const GroupedDataset& ds);

}  // namespace prepivot
