#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "prepivot/dataset.hpp"
#include "prepivot/kernels.hpp"
#include "prepivot/prepivot.hpp"
#include "prepivot/rng.hpp"
#include "prepivot/statistics.hpp"

namespace prepivot {

// Sorted draw collection with right-tail queries.
class EmpiricalDistribution {
 public:
  explicit EmpiricalDistribution(std::vector<double> values);
  int count() const { return static_cast<int>(values_.size()); }
  const std::vector<double>& values() const { return values_; }
  int count_geq(double x) const;
  // Order-statistic quantile: the ceil(q*count)-th smallest value, q in (0,1].
  double quantile(double q) const;

 private:
  std::vector<double> values_;  // ascending
};

// One (statistic, prepivot) pairing of a run grid.
struct GridCell {
  StatisticSpec stat;
  PrepivotSpec prep;
};

// Evaluates a whole grid of prepivoted statistics on one dataset under one
// context stream, sharing the kernel cache, the statistic evaluators, and the
// bootstrap resample patterns across cells exactly as the stream discipline
// in prepivot.hpp lays out. Reusable across contexts without reallocation;
// not shareable between threads (clone one per worker).
class CellGrid {
 public:
  explicit CellGrid(std::vector<GridCell> cells);
  ~CellGrid();
  CellGrid(const CellGrid&) = delete;
  CellGrid& operator=(const CellGrid&) = delete;

  std::unique_ptr<CellGrid> clone() const;
  int size() const { return static_cast<int>(cells_.size()); }
  const GridCell& cell(int j) const { return cells_[static_cast<std::size_t>(j)]; }

  // values[j] = prepivoted value of cell j on ds. Throws on an unevaluable
  // observed statistic (degenerate kernels on ds itself).
  void run(const GroupedDataset& ds, RngStream ctx, std::vector<double>& values);

  // Raw (unprepivoted) value of cell j's statistic from the last run().
  double last_raw(int j) const;

 private:
  struct StatSlot;  // one bound evaluator per distinct statistic
  std::vector<GridCell> cells_;
  std::vector<std::unique_ptr<StatSlot>> slots_;
  std::vector<int> cell_slot_;  // cell j -> slot index
  int max_nboot_ = 0;
  bool any_boot_ = false;
  KernelCache kc_, boot_kc_;
  GroupedDataset boot_ds_;
  std::vector<double> raw_, kobs_, tbreve_;  // raw/tbreve per slot, kobs per cell
  std::vector<char> tdegen_, slot_boot_;
  std::vector<int> boot_count_;
  std::vector<Eigen::MatrixXd> origin_;
};

// nperm draws of eval over uniformly random group assignments. Permutation p
// (1-based) evaluates under context rng.child(p), with the assignment drawn
// from rng.child(p).child(0) and the context passed on to eval for any inner
// randomness. An error thrown by eval propagates with the permutation index
// prefixed to its message.
using PermutationEval = std::function<double(const GroupedDataset&, RngStream&)>;
EmpiricalDistribution permutation_distribution(const PermutationEval& eval,
                                               const GroupedDataset& ds, int nperm,
                                               RngStream rng);

// Add-one right-tail estimator (1 + #{draws >= observed}) / (1 + count):
// valid at any draw count, ties count as extreme, observed not inserted.
double mc_p_value(double observed, const EmpiricalDistribution& dist);

// Full enumeration over distinct group assignments (partition-uniform, which
// matches permutation-uniform for the label-symmetric statistics here);
// right-tail p = #{value >= observed} / #assignments. The assignment count is
// checked against cap before any evaluation.
using ExactEval = std::function<double(const GroupedDataset&)>;
double exact_p_value(const ExactEval& eval, const GroupedDataset& ds,
                     std::uint64_t cap = 1000000);

// Number of distinct group assignments (multinomial coefficient); saturates
// at 2^64-1 instead of overflowing.
std::uint64_t assignment_count(const std::vector<int>& sizes);

struct TestResult {
  double observed_raw = 0.0;
  double observed_prepivoted = 0.0;
  double p_value = 1.0;
  int nperm = 0;
  int nboot = 0;
  int mc_draws = 0;
  std::uint64_t seed = 0;
  StatId statistic = StatId::kDiffMeans;
  PrepivotKind prepivot = PrepivotKind::kNone;
};

// The nested permutation test. Streams: the observed value is computed under
// derive_stream(seed, {0}) and permutation p under derive_stream(seed, {p}),
// so the result is a pure function of (ds, spec, pspec, nperm, seed); the
// worker count only splits the permutation loop.
TestResult run_test(const GroupedDataset& ds, const StatisticSpec& spec,
                    const PrepivotSpec& pspec, int nperm, std::uint64_t seed,
                    int threads = 1);

// Grid variant sharing assignments and resamples across cells; results[j]
// corresponds to cells[j]. Used by the simulation harness.
std::vector<TestResult> run_test_grid(const GroupedDataset& ds,
                                      const std::vector<GridCell>& cells, int nperm,
                                      std::uint64_t seed, int threads = 1);

// Same, but under a caller-supplied context root: the observed value runs
// under root.child(0) and permutation p under root.child(p). seed_echo only
// fills TestResult::seed. Lets a caller embed whole tests inside a larger
// stream layout (one per simulation replicate).
std::vector<TestResult> run_test_grid(const GroupedDataset& ds,
                                      const std::vector<GridCell>& cells, int nperm,
                                      RngStream root, std::uint64_t seed_echo,
                                      int threads = 1);

// Splits [0, items) into contiguous chunks over `threads` workers and joins.
// fn(first, last) must only touch disjoint state per chunk.
void parallel_chunks(int items, int threads,
                     const std::function<void(int, int)>& fn);

}  // namespace prepivot
