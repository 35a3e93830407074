#ifndef PREPIVOT_SIMULATE_HPP
#define PREPIVOT_SIMULATE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "prepivot/engine.hpp"
#include "prepivot/scenarios.hpp"

namespace prepivot {

// A rejection-rate study: nsim independent datasets from one scenario, each
// tested by every cell of the statistic x prepivot grid, counting p <= alpha.
struct SimulationConfig {
  ScenarioSpec scenario;
  std::vector<StatId> statistics;        // grid rows, in declared order
  std::vector<PrepivotKind> prepivots;   // grid columns, in declared order
  int nsim = 2000;
  int nperm = 499;
  int nboot = 200;     // resamples for the bootstrap prepivot kinds
  int mc_draws = 1000; // Monte Carlo draws for non-closed-form Gaussian cells
  int vboot = 200;     // bootstrap draws behind the median variance kernel
  GaussianMode gaussian_mode = GaussianMode::kAuto;
  double alpha = 0.05;
  std::uint64_t seed = 0;
};

bool operator==(const ScenarioSpec& a, const ScenarioSpec& b);
bool operator==(const SimulationConfig& a, const SimulationConfig& b);

// The grid as run: statistics outer, prepivots inner, so cell j covers
// (statistics[j / prepivots.size()], prepivots[j % prepivots.size()]).
std::vector<GridCell> config_grid(const SimulationConfig& cfg);

// Full validation without running: counts and alpha in range, scenario shape
// resolvable, every statistic admissible on that shape, every grid cell's
// prepivot compatible with its statistic. Throws ConfigError/ParameterError.
void validate_simulation(const SimulationConfig& cfg);

// Flat key = value config text (a TOML subset): full-line and trailing #
// comments; integer, float, boolean, "quoted string", and [v1, v2] array
// values; no section headers, no nesting, no escapes inside strings.
//
// Keys (* = required):
//   scenario*        string, a scenario id
//   n*               int, total sample size
//   group_fractions  float array, scenario default when absent
//   dim              int, response dimension, 0 = scenario default
//   statistics*      string array of statistic ids
//   prepivots*       string array of prepivot kinds
//   nsim, nperm, nboot, mc_draws, vboot   ints (defaults above)
//   gaussian_mode    "auto" | "closed_form" | "monte_carlo"
//   alpha            float in (0,1)
//   seed             non-negative int
// Unknown or duplicate keys are errors. parse_config(emit_config(c)) == c.
SimulationConfig parse_config(const std::string& text);
SimulationConfig load_config_file(const std::string& path);
std::string emit_config(const SimulationConfig& cfg);

struct RejectionRow {
  StatId statistic = StatId::kDiffMeans;
  PrepivotKind prepivot = PrepivotKind::kNone;
  double rate = 0.0;  // rejections / nsim over the replicates that evaluated
  double se = 0.0;    // sqrt(rate * (1 - rate) / nsim)
  int nsim = 0;       // replicates contributing to this row
};

struct RejectionTable {
  std::vector<RejectionRow> rows;  // config_grid order
  int requested_nsim = 0;
  int error_count = 0;       // replicates excluded because a cell threw
  std::string first_error;   // message from the lowest-numbered such replicate
};

// Runs the study. Replicate r generates its dataset under
// derive_stream(seed, {r}).child(0) and runs the whole grid on it as one
// test under the root derive_stream(seed, {r}).child(1), so results are a
// pure function of the config regardless of `threads`. A replicate where
// any cell throws a library error is excluded from every row's counts and
// tallied in error_count.
RejectionTable run_simulation(const SimulationConfig& cfg, int threads = 1);

// CSV with header statistic,prepivot,rate,se,nsim; one row per grid cell.
std::string rejection_table_csv(const RejectionTable& table);

}  // namespace prepivot

#endif  // PREPIVOT_SIMULATE_HPP
