#include "prepivot/simulate.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "prepivot/errors.hpp"

using namespace prepivot;

namespace {

SimulationConfig small_config() {
  SimulationConfig cfg;
  cfg.scenario.id = ScenarioId::kCustomNull;
  cfg.scenario.n = 16;
  cfg.statistics = {StatId::kDiffMeans, StatId::kStudentized};
  cfg.prepivots = {PrepivotKind::kNone, PrepivotKind::kBootstrap};
  cfg.nsim = 60;
  cfg.nperm = 39;
  cfg.nboot = 11;
  cfg.mc_draws = 16;
  cfg.vboot = 8;
  cfg.alpha = 0.05;
  cfg.seed = 4242;
  return cfg;
}

// Independent replication of the documented stream layout: replicate r draws
// its dataset under derive_stream(seed, {r}).child(0) and runs the grid as
// one test rooted at derive_stream(seed, {r}).child(1).
double replicate_rate(const SimulationConfig& cfg, int cell_index) {
  const std::vector<GridCell> cells = config_grid(cfg);
  int count = 0;
  for (int r = 0; r < cfg.nsim; ++r) {
    RngStream rep = derive_stream(cfg.seed, {{std::uint64_t(r)}});
    RngStream data_rng = rep.child(0);
    GroupedDataset ds = generate_scenario(cfg.scenario, data_rng);
    std::vector<TestResult> res =
        run_test_grid(ds, cells, cfg.nperm, rep.child(1), cfg.seed, 1);
    if (res[std::size_t(cell_index)].p_value <= cfg.alpha) ++count;
  }
  return double(count) / cfg.nsim;
}

}  // namespace

TEST_SUITE("simulate") {

TEST_CASE("config text round trips through emit and parse") {
  SimulationConfig cfg = small_config();
  cfg.scenario.group_fractions = {0.25, 0.75};
  cfg.scenario.dim = 2;
  cfg.gaussian_mode = GaussianMode::kMonteCarlo;
  cfg.alpha = 0.0375;
  CHECK(parse_config(emit_config(cfg)) == cfg);

  // Default-constructed fields and an empty fractions list survive too.
  SimulationConfig plain;
  plain.scenario.id = ScenarioId::kBfExponential;
  plain.scenario.n = 100;
  plain.statistics = {StatId::kEdgeworth};
  plain.prepivots = {PrepivotKind::kBootstrap};
  CHECK(parse_config(emit_config(plain)) == plain);
}

TEST_CASE("parser accepts comments, spacing, and mixed numerals") {
  const std::string text =
      "# rejection study\n"
      "scenario = \"custom_null\"   # two equal groups\n"
      "n=20\n"
      "  statistics = [ \"diff_means\" ,\"anova_F\" ]\n"
      "prepivots = [\"none\"]\n"
      "alpha = 5e-2\n"
      "nsim = 100\n"
      "\n"
      "seed = 7\n";
  const SimulationConfig cfg = parse_config(text);
  CHECK(cfg.scenario.id == ScenarioId::kCustomNull);
  CHECK(cfg.scenario.n == 20);
  CHECK(cfg.statistics == std::vector<StatId>{StatId::kDiffMeans, StatId::kAnovaF});
  CHECK(cfg.prepivots == std::vector<PrepivotKind>{PrepivotKind::kNone});
  CHECK(cfg.alpha == 0.05);
  CHECK(cfg.nsim == 100);
  CHECK(cfg.seed == 7);
  CHECK(cfg.nperm == 499);   // defaults fill unlisted keys
  CHECK(cfg.nboot == 200);
  CHECK(cfg.mc_draws == 1000);
}

TEST_CASE("parser rejects malformed input with line numbers") {
  const char* missing_required = "n = 10\nstatistics = [\"diff_means\"]\nprepivots = [\"none\"]\n";
  CHECK_THROWS_AS(parse_config(missing_required), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("scenario = \"custom_null\"\nscenario = \"custom_null\"\n"),
                       doctest::Contains("line 2"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[simulation]\n"),
                       doctest::Contains("flat keys"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("just words\n"), doctest::Contains("line 1"),
                       ConfigError);
  CHECK_THROWS_AS(parse_config("n = \"ten\"\nscenario = \"custom_null\"\n"
                               "statistics = [\"diff_means\"]\nprepivots = [\"none\"]\n"),
                  ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("scenario = \"custom_null\"\nn = 10\n"
                                    "statistics = [\"diff_means\"]\nprepivots = [\"none\"]\n"
                                    "typo_key = 3\n"),
                       doctest::Contains("typo_key"), ConfigError);
  CHECK_THROWS_AS(parse_config("scenario = \"custom_null\"\nn = 10\n"
                               "statistics = [\"diff_means\"]\nprepivots = [\"nope\"]\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config("scenario = \"custom_null\"\nn = 10\nseed = -3\n"
                               "statistics = [\"diff_means\"]\nprepivots = [\"none\"]\n"),
                  ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("scenario = \"custom_null\nn = 10\n"),
                       doctest::Contains("unterminated"), ConfigError);
  CHECK_THROWS_AS(parse_config("scenario = \"custom_null\"\nn = 10\nnsim = 0\n"
                               "statistics = [\"diff_means\"]\nprepivots = [\"none\"]\n"),
                  ConfigError);
}

TEST_CASE("config files load with the path in diagnostics") {
  const std::string path = "simulate_config_roundtrip.toml";
  SimulationConfig cfg = small_config();
  {
    std::ofstream out(path);
    out << emit_config(cfg);
  }
  CHECK(load_config_file(path) == cfg);
  std::remove(path.c_str());

  CHECK_THROWS_WITH_AS(load_config_file("does_not_exist.toml"),
                       doctest::Contains("does_not_exist.toml"), ConfigError);
}

TEST_CASE("grid cells cross statistics with prepivots in declared order") {
  SimulationConfig cfg = small_config();
  const std::vector<GridCell> cells = config_grid(cfg);
  REQUIRE(cells.size() == 4);
  CHECK(cells[0].stat.id == StatId::kDiffMeans);
  CHECK(cells[0].prep.kind == PrepivotKind::kNone);
  CHECK(cells[1].stat.id == StatId::kDiffMeans);
  CHECK(cells[1].prep.kind == PrepivotKind::kBootstrap);
  CHECK(cells[2].stat.id == StatId::kStudentized);
  CHECK(cells[2].prep.kind == PrepivotKind::kNone);
  CHECK(cells[3].stat.id == StatId::kStudentized);
  CHECK(cells[3].prep.kind == PrepivotKind::kBootstrap);
  for (const GridCell& c : cells) {
    CHECK(c.stat.vboot == cfg.vboot);
    CHECK(c.prep.nboot == cfg.nboot);
    CHECK(c.prep.mc_draws == cfg.mc_draws);
    CHECK(c.prep.gaussian_mode == cfg.gaussian_mode);
  }
}

TEST_CASE("validation catches inadmissible and incompatible grids") {
  SimulationConfig cfg = small_config();
  CHECK_NOTHROW(validate_simulation(cfg));

  SimulationConfig empty = cfg;
  empty.statistics.clear();
  CHECK_THROWS_AS(validate_simulation(empty), ConfigError);

  SimulationConfig badalpha = cfg;
  badalpha.alpha = 1.0;
  CHECK_THROWS_AS(validate_simulation(badalpha), ConfigError);

  // hotelling needs exactly 2 groups; the 4-group scenario rejects it.
  SimulationConfig wrongk = cfg;
  wrongk.scenario.id = ScenarioId::kKsampleLognormal;
  wrongk.scenario.n = 40;
  wrongk.statistics = {StatId::kHotellingPooled};
  CHECK_THROWS_AS(validate_simulation(wrongk), ConfigError);

  // anova_F has no closed-form gaussian reference.
  SimulationConfig noclosed = cfg;
  noclosed.statistics = {StatId::kAnovaF};
  noclosed.prepivots = {PrepivotKind::kGaussian};
  noclosed.gaussian_mode = GaussianMode::kClosedForm;
  CHECK_THROWS_AS(validate_simulation(noclosed), ConfigError);

  // The same grid under auto mode falls back to Monte Carlo and is fine.
  noclosed.gaussian_mode = GaussianMode::kAuto;
  CHECK_NOTHROW(validate_simulation(noclosed));
}

TEST_CASE("simulation matches an independent replication of its stream layout") {
  SimulationConfig cfg = small_config();
  const RejectionTable table = run_simulation(cfg);
  REQUIRE(table.rows.size() == 4);
  CHECK(table.requested_nsim == 60);
  CHECK(table.error_count == 0);
  CHECK(table.first_error.empty());
  for (int j = 0; j < 4; ++j) {
    const RejectionRow& row = table.rows[std::size_t(j)];
    CHECK(row.nsim == 60);
    CHECK(row.rate == replicate_rate(cfg, j));
    CHECK(row.se == std::sqrt(row.rate * (1.0 - row.rate) / 60.0));
  }
}

TEST_CASE("reruns and thread counts do not change the table") {
  SimulationConfig cfg = small_config();
  cfg.nsim = 30;
  const RejectionTable a = run_simulation(cfg, 1);
  const RejectionTable b = run_simulation(cfg, 1);
  const RejectionTable c = run_simulation(cfg, 4);
  REQUIRE(a.rows.size() == b.rows.size());
  REQUIRE(a.rows.size() == c.rows.size());
  for (std::size_t j = 0; j < a.rows.size(); ++j) {
    CHECK(a.rows[j].rate == b.rows[j].rate);
    CHECK(a.rows[j].rate == c.rows[j].rate);
    CHECK(a.rows[j].se == c.rows[j].se);
  }
}

TEST_CASE("null scenario rates stay within exactness bands") {
  // Permutation tests are exact when both groups share one law, so each
  // rate estimates a binomial proportion with mean <= alpha. With nsim=250
  // the 4.5-sigma band around 0.05 is about 0.062.
  SimulationConfig cfg;
  cfg.scenario.id = ScenarioId::kCustomNull;
  cfg.scenario.n = 16;
  cfg.statistics = {StatId::kDiffMeans, StatId::kMedianDiff};
  cfg.prepivots = {PrepivotKind::kNone, PrepivotKind::kBootstrap};
  cfg.nsim = 250;
  cfg.nperm = 59;
  cfg.nboot = 12;
  cfg.vboot = 8;
  cfg.alpha = 0.05;
  cfg.seed = 31337;
  const RejectionTable table = run_simulation(cfg);
  REQUIRE(table.error_count == 0);
  const double band = 0.05 + 4.5 * std::sqrt(0.05 * 0.95 / cfg.nsim);
  for (const RejectionRow& row : table.rows) {
    CHECK(row.rate >= 0.0);
    CHECK(row.rate <= band);
  }
}

TEST_CASE("replicates that cannot evaluate are excluded and counted") {
  // The studentized median with only 2 variance-bootstrap draws frequently
  // sees both resampled median differences coincide, which degenerates the
  // statistic for that permutation and aborts the replicate. That gives a
  // deterministic mix of failed and clean replicates to audit.
  SimulationConfig cfg;
  cfg.scenario.id = ScenarioId::kCustomNull;
  cfg.scenario.n = 8;
  cfg.statistics = {StatId::kMedianStudentized};
  cfg.prepivots = {PrepivotKind::kNone};
  cfg.nsim = 40;
  cfg.nperm = 5;
  cfg.vboot = 2;
  cfg.seed = 99;
  const RejectionTable table = run_simulation(cfg);
  REQUIRE(table.requested_nsim == 40);
  CHECK(table.error_count > 0);
  CHECK(table.error_count < 40);
  CHECK(table.rows[0].nsim == 40 - table.error_count);
  CHECK(table.first_error.rfind("replicate ", 0) == 0);

  // Independent replication of the exclusion arithmetic.
  const std::vector<GridCell> cells = config_grid(cfg);
  int errors = 0, rejects = 0;
  std::string first;
  for (int r = 0; r < cfg.nsim; ++r) {
    RngStream rep = derive_stream(cfg.seed, {{std::uint64_t(r)}});
    RngStream data_rng = rep.child(0);
    GroupedDataset ds = generate_scenario(cfg.scenario, data_rng);
    try {
      std::vector<TestResult> res =
          run_test_grid(ds, cells, cfg.nperm, rep.child(1), cfg.seed, 1);
      if (res[0].p_value <= cfg.alpha) ++rejects;
    } catch (const Error& e) {
      ++errors;
      if (first.empty()) first = "replicate " + std::to_string(r) + ": " + e.what();
    }
  }
  CHECK(errors == table.error_count);
  CHECK(first == table.first_error);
  CHECK(table.rows[0].rate == double(rejects) / (cfg.nsim - errors));

  // The exclusion bookkeeping is independent of the worker count.
  const RejectionTable threaded = run_simulation(cfg, 4);
  CHECK(threaded.error_count == table.error_count);
  CHECK(threaded.first_error == table.first_error);
  CHECK(threaded.rows[0].rate == table.rows[0].rate);
}

TEST_CASE("csv output carries the exact header and one row per cell") {
  SimulationConfig cfg = small_config();
  cfg.nsim = 20;
  const RejectionTable table = run_simulation(cfg);
  const std::string csv = rejection_table_csv(table);
  std::istringstream in(csv);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "statistic,prepivot,rate,se,nsim");
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].rfind("diff_means,none,", 0) == 0);
  CHECK(rows[1].rfind("diff_means,bootstrap,", 0) == 0);
  CHECK(rows[2].rfind("studentized,none,", 0) == 0);
  CHECK(rows[3].rfind("studentized,bootstrap,", 0) == 0);
  for (const std::string& r : rows) {
    CHECK(std::count(r.begin(), r.end(), ',') == 4);
    CHECK(r.back() != ',');
  }
}

}  // TEST_SUITE
