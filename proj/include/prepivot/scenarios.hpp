#ifndef PREPIVOT_SCENARIOS_HPP
#define PREPIVOT_SCENARIOS_HPP

#include <string>
#include <vector>

#include "prepivot/dataset.hpp"
#include "prepivot/rng.hpp"

namespace prepivot {

// Generative models used by the simulation harness. Every scenario satisfies
// the null hypothesis of equal group means (equal medians for kMedianNormal),
// so rejection rates estimate Type I error.
//
//   kBfExponential        2 groups, univariate. Group 1 is 8 - Exp(mean 8),
//                         group 2 is Exp(mean 5) - 5; both means are 0 while
//                         the variances (64 vs 25) and skews differ.
//   kMvLognormalVsNormal  2 groups, 15-dimensional. Group 1 has independent
//                         exp(N(0,1)) components; group 2 is multivariate
//                         normal with every mean exp(0.5) (the lognormal
//                         mean), unit variances, and pairwise correlation 0.8.
//   kKsampleLognormal     4 groups, univariate. Group i is
//                         exp(N(0, s_i^2)) - exp(s_i^2/2) with
//                         s = (0.70, 0.55, 0.40, 0.25).
//   kManovaLognormal      4 groups, 10-dimensional. Group i applies exp()
//                         componentwise to N(0, v_i R(r_i)) and subtracts
//                         exp(v_i/2) from every component, where R(r) has
//                         unit diagonal and constant correlation r,
//                         v = (1.0, 0.8, 0.6, 0.4), r = (0.3, 0.5, 0.7, 0.9).
//   kMedianNormal         2 groups, univariate. N(0,1) vs N(0,25); equal
//                         medians (and means) with very different scales.
//   kCustomNull           All groups share one law: independent standard
//                         normal components of dimension `dim`. The groups
//                         are identically distributed, so permutation tests
//                         are exact here for any statistic.
enum class ScenarioId {
  kBfExponential,
  kMvLognormalVsNormal,
  kKsampleLognormal,
  kManovaLognormal,
  kMedianNormal,
  kCustomNull,
};

// Canonical spellings: bf_exponential, mv_lognormal_vs_normal,
// ksample_lognormal, manova_lognormal, median_normal, custom_null.
std::string to_string(ScenarioId id);
ScenarioId scenario_from_string(const std::string& name);
const std::vector<ScenarioId>& all_scenarios();

struct ScenarioSpec {
  ScenarioId id = ScenarioId::kCustomNull;
  int n = 100;  // total sample size across groups

  // Group size fractions; empty selects the scenario default. Must be
  // positive, sum to 1, and match the scenario's group count.
  std::vector<double> group_fractions;

  // Response dimension; 0 selects the scenario default. Only kCustomNull
  // accepts values other than its default (every other scenario's dimension
  // is fixed by its generative model).
  int dim = 0;
};

// Scenario defaults and shape helpers.
std::vector<double> default_fractions(ScenarioId id);
int default_dim(ScenarioId id);
int scenario_group_count(ScenarioId id);

// Resolved shape of the dataset `spec` generates. Validates the spec:
// malformed fractions, a dimension override on a fixed-dimension scenario,
// or a group whose resolved size would be zero raise ConfigError.
struct ScenarioShape {
  int dim = 1;
  std::vector<int> sizes;
};
ScenarioShape resolve_shape(const ScenarioSpec& spec);

// Largest-remainder apportionment of n into sizes proportional to
// `fractions`: each group gets floor(f*n), then leftover units go to the
// largest fractional parts (ties to the earlier group). Exact when every
// f*n is integral. Raises ConfigError if any resolved size is zero.
std::vector<int> fractions_to_sizes(const std::vector<double>& fractions, int n);

// Draws one dataset from the scenario's law. Rows are drawn group by group,
// row by row, component by component from `rng`, so the result is a pure
// function of (spec, rng state).
GroupedDataset generate_scenario(const ScenarioSpec& spec, RngStream& rng);

}  // namespace prepivot

#endif  // PREPIVOT_SCENARIOS_HPP
