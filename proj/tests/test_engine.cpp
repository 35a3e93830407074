#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "prepivot/engine.hpp"

using namespace prepivot;

namespace {

StatisticSpec stat(StatId id) {
  StatisticSpec s;
  s.id = id;
  return s;
}

PrepivotSpec prep(PrepivotKind kind, GaussianMode mode = GaussianMode::kAuto,
                  int mc_draws = 200, int nboot = 30) {
  PrepivotSpec p;
  p.kind = kind;
  p.gaussian_mode = mode;
  p.mc_draws = mc_draws;
  p.nboot = nboot;
  return p;
}

GroupedDataset random_groups(const std::vector<int>& sizes, int dim,
                             std::uint64_t seed) {
  GroupedDataset ds(dim, sizes);
  RngStream rng(seed, {});
  for (int g = 0; g < ds.k(); ++g)
    for (int i = 0; i < ds.size(g); ++i)
      for (int c = 0; c < dim; ++c) ds.mutable_row(g, i)[c] = rng.normal();
  return ds;
}

double mean_diff21(const GroupedDataset& ds) {
  double m1 = 0, m2 = 0;
  for (int i = 0; i < ds.size(0); ++i) m1 += ds.value(0, i);
  for (int i = 0; i < ds.size(1); ++i) m2 += ds.value(1, i);
  return m2 / ds.size(1) - m1 / ds.size(0);
}

}  // namespace

TEST_SUITE("engine") {

TEST_CASE("empirical distribution tail counts and quantiles") {
  EmpiricalDistribution d({3.0, 1.0, 2.0, 2.0});
  CHECK(d.count() == 4);
  CHECK(d.values() == std::vector<double>{1.0, 2.0, 2.0, 3.0});
  CHECK(d.count_geq(2.0) == 3);
  CHECK(d.count_geq(2.5) == 1);
  CHECK(d.count_geq(0.0) == 4);
  CHECK(d.count_geq(3.5) == 0);
  CHECK(d.quantile(0.5) == 2.0);
  CHECK(d.quantile(0.75) == 2.0);
  CHECK(d.quantile(0.76) == 3.0);
  CHECK(d.quantile(1.0) == 3.0);
  CHECK(d.quantile(1e-9) == 1.0);
  CHECK_THROWS_AS(d.quantile(0.0), ParameterError);
  CHECK_THROWS_AS(d.quantile(1.5), ParameterError);
  CHECK_THROWS_AS(EmpiricalDistribution({}), ParameterError);
}

TEST_CASE("the add one p value counts ties as extreme") {
  EmpiricalDistribution d({1.0, 2.0, 2.0, 3.0});
  CHECK(mc_p_value(2.0, d) == doctest::Approx(4.0 / 5.0));
  CHECK(mc_p_value(3.5, d) == doctest::Approx(1.0 / 5.0));
  CHECK(mc_p_value(0.0, d) == doctest::Approx(1.0));
}

TEST_CASE("assignment counts are multinomial coefficients") {
  CHECK(assignment_count({2, 2}) == 6);
  CHECK(assignment_count({3, 3}) == 20);
  CHECK(assignment_count({1, 1, 1}) == 6);
  CHECK(assignment_count({12, 12}) == 2704156);
  CHECK(assignment_count({2, 3, 4}) == 1260);
  CHECK(assignment_count({40, 40}) == UINT64_MAX);  // saturates
}

TEST_CASE("exact enumeration recovers a closed form p value") {
  // mean2 - mean1 on groups {1,2} and {3,4}: the observed split is the
  // unique maximizer of the 6 assignments, so p = 1/6.
  auto ds = GroupedDataset::from_groups({{1, 2}, {3, 4}});
  const double p = exact_p_value(mean_diff21, ds);
  CHECK(p == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("exact enumeration visits every assignment including the identity") {
  auto ds = GroupedDataset::from_groups({{1, 2}, {3, 4}});
  int calls = 0;
  const double p = exact_p_value(
      [&](const GroupedDataset&) {
        ++calls;
        return 0.0;
      },
      ds);
  CHECK(calls == 1 + 6);  // one observed evaluation plus the enumeration
  CHECK(p == 1.0);        // constant statistic ties everywhere
}

TEST_CASE("exact enumeration refuses an oversized problem") {
  auto ds = random_groups({12, 12}, 1, 3);
  CHECK_THROWS_AS(exact_p_value(mean_diff21, ds), EnumerationTooLargeError);
  CHECK_NOTHROW(exact_p_value(mean_diff21, ds, 3000000));
}

TEST_CASE("permutation draws are uniform over assignments") {
  auto ds = GroupedDataset::from_groups({{1.0}, {2.0}});
  const int nperm = 6000;
  auto dist = permutation_distribution(
      [](const GroupedDataset& d, RngStream&) {
        return evaluate(StatisticSpec{}, d);
      },
      ds, nperm, RngStream(17, {}));
  // Two equally likely assignments with values -sqrt(2) and sqrt(2).
  const auto& v = dist.values();
  const int low = int(std::count(v.begin(), v.end(), v.front()));
  CHECK(std::abs(low - nperm / 2) < 4.5 * std::sqrt(nperm * 0.25));
  CHECK(v.front() == doctest::Approx(-std::sqrt(2.0)));
  CHECK(v.back() == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("permutation failures carry the permutation index") {
  auto ds = GroupedDataset::from_groups({{1, 2}, {3, 4}});
  int calls = 0;
  try {
    permutation_distribution(
        [&](const GroupedDataset&, RngStream&) -> double {
          if (++calls == 3) throw ParameterError("inner failure");
          return 0.0;
        },
        ds, 10, RngStream(1, {}));
    FAIL("expected a throw");
  } catch (const ParameterError& e) {
    CHECK(std::string(e.what()).find("permutation 3:") != std::string::npos);
    CHECK(std::string(e.what()).find("inner failure") != std::string::npos);
  }
}

TEST_CASE("tests are pure functions of the seed") {
  auto ds = random_groups({8, 9}, 1, 23);
  auto grid = std::vector<GridCell>{
      {stat(StatId::kStudentized), prep(PrepivotKind::kBootstrap)},
      {stat(StatId::kAnovaF), prep(PrepivotKind::kGaussian, GaussianMode::kMonteCarlo, 1000)},
  };
  auto a = run_test_grid(ds, grid, 80, 424242);
  auto b = run_test_grid(ds, grid, 80, 424242);
  CHECK(a[0].p_value == b[0].p_value);
  CHECK(a[0].observed_prepivoted == b[0].observed_prepivoted);
  CHECK(a[1].observed_prepivoted == b[1].observed_prepivoted);
  auto c = run_test_grid(ds, grid, 80, 5);
  // A fresh seed redraws the 1000 reference draws behind the observed value.
  CHECK(a[1].observed_prepivoted != c[1].observed_prepivoted);
}

TEST_CASE("p values land on the add one grid") {
  auto ds = random_groups({6, 7}, 1, 29);
  auto r = run_test(ds, stat(StatId::kStudentized), prep(PrepivotKind::kNone), 99, 7);
  const double scaled = r.p_value * 100.0;
  CHECK(std::abs(scaled - std::round(scaled)) < 1e-9);
  CHECK(r.p_value >= 1.0 / 100.0);
  CHECK(r.p_value <= 1.0);
}

TEST_CASE("a monotone closed reference preserves the permutation p value") {
  auto ds = random_groups({10, 12}, 1, 31);
  auto rs = run_test_grid(
      ds,
      {{stat(StatId::kStudentized), prep(PrepivotKind::kNone)},
       {stat(StatId::kStudentized),
        prep(PrepivotKind::kGaussian, GaussianMode::kClosedForm)}},
      199, 11);
  CHECK(rs[0].p_value == rs[1].p_value);
  CHECK(rs[1].observed_prepivoted ==
        doctest::Approx(std_normal_cdf(rs[0].observed_raw)).epsilon(1e-12));
}

TEST_CASE("deterministic cells agree between grid and standalone runs") {
  auto ds = random_groups({10, 12}, 1, 37);
  auto grid = run_test_grid(
      ds,
      {{stat(StatId::kStudentized), prep(PrepivotKind::kNone)},
       {stat(StatId::kStudentized),
        prep(PrepivotKind::kGaussian, GaussianMode::kClosedForm)}},
      99, 13);
  auto single0 = run_test(ds, stat(StatId::kStudentized), prep(PrepivotKind::kNone), 99, 13);
  CHECK(grid[0].p_value == single0.p_value);
  CHECK(grid[0].observed_raw == single0.observed_raw);
}

TEST_CASE("resample streams depend on the grid width, not the cell order") {
  auto ds = random_groups({9, 11}, 1, 41);
  auto ab = run_test_grid(ds,
                          {{stat(StatId::kStudentized), prep(PrepivotKind::kBootstrap)},
                           {stat(StatId::kDiffMeans), prep(PrepivotKind::kNone)}},
                          60, 19);
  auto ba = run_test_grid(ds,
                          {{stat(StatId::kDiffMeans), prep(PrepivotKind::kNone)},
                           {stat(StatId::kStudentized), prep(PrepivotKind::kBootstrap)}},
                          60, 19);
  CHECK(ab[0].p_value == ba[1].p_value);
  CHECK(ab[1].p_value == ba[0].p_value);
}

TEST_CASE("worker count never changes the result") {
  auto ds = random_groups({9, 10}, 1, 43);
  std::vector<GridCell> cells = {
      {stat(StatId::kStudentized), prep(PrepivotKind::kBootstrap)},
      {stat(StatId::kAnovaF), prep(PrepivotKind::kBootAfterGauss, GaussianMode::kAuto, 50, 20)},
      {stat(StatId::kDiffMeans), prep(PrepivotKind::kGaussian, GaussianMode::kMonteCarlo, 80)},
  };
  auto one = run_test_grid(ds, cells, 61, 47, 1);
  auto four = run_test_grid(ds, cells, 61, 47, 4);
  for (std::size_t j = 0; j < cells.size(); ++j) {
    CHECK(one[j].p_value == four[j].p_value);
    CHECK(one[j].observed_prepivoted == four[j].observed_prepivoted);
  }
}

TEST_CASE("result echoes the run parameters") {
  auto ds = random_groups({8, 8}, 1, 53);
  auto r = run_test(ds, stat(StatId::kStudentized),
                    prep(PrepivotKind::kBootAfterGauss, GaussianMode::kClosedForm, 0, 25),
                    49, 99);
  CHECK(r.nperm == 49);
  CHECK(r.nboot == 25);
  CHECK(r.mc_draws == 0);  // closed form consumed no reference draws
  CHECK(r.seed == 99);
  CHECK(r.statistic == StatId::kStudentized);
  CHECK(r.prepivot == PrepivotKind::kBootAfterGauss);
  auto r2 = run_test(ds, stat(StatId::kAnovaF),
                     prep(PrepivotKind::kGaussian, GaussianMode::kAuto, 64), 49, 99);
  CHECK(r2.mc_draws == 64);
  CHECK(r2.nboot == 0);
}

TEST_CASE("degenerate permutations abort with their index") {
  // Groups {1,3},{1,3}: some relabelings put both 1s together, collapsing
  // both group variances.
  auto ds = GroupedDataset::from_groups({{1, 3}, {1, 3}});
  try {
    run_test(ds, stat(StatId::kStudentized), prep(PrepivotKind::kNone), 50, 3);
    FAIL("expected a degenerate permutation");
  } catch (const DegenerateStatisticError& e) {
    CHECK(std::string(e.what()).find("permutation") != std::string::npos);
  }
}

TEST_CASE("monte carlo p values approach the exact enumeration") {
  auto ds = random_groups({4, 4}, 1, 59);
  const double exact = exact_p_value(
      [](const GroupedDataset& d) { return evaluate(StatisticSpec{}, d); }, ds);
  const int nperm = 20000;
  auto r = run_test(ds, stat(StatId::kDiffMeans), prep(PrepivotKind::kNone), nperm, 61);
  const double band =
      4.5 * std::sqrt(exact * (1 - exact) / nperm) + 2.0 / (nperm + 1);
  CHECK(std::abs(r.p_value - exact) < band);
}

}  // TEST_SUITE
