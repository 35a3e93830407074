#include "prepivot/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "prepivot/distributions.hpp"
#include "prepivot/errors.hpp"

namespace prepivot {

namespace {

struct ScenarioName {
  ScenarioId id;
  const char* name;
};

constexpr ScenarioName kNames[] = {
    {ScenarioId::kBfExponential, "bf_exponential"},
    {ScenarioId::kMvLognormalVsNormal, "mv_lognormal_vs_normal"},
    {ScenarioId::kKsampleLognormal, "ksample_lognormal"},
    {ScenarioId::kManovaLognormal, "manova_lognormal"},
    {ScenarioId::kMedianNormal, "median_normal"},
    {ScenarioId::kCustomNull, "custom_null"},
};

// Unit-diagonal covariance with constant off-diagonal correlation rho,
// scaled by var.
Eigen::MatrixXd equicorrelated(int d, double rho, double var) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(d, d, var * rho);
  m.diagonal().setConstant(var);
  return m;
}

}  // namespace

std::string to_string(ScenarioId id) {
  for (const auto& e : kNames)
    if (e.id == id) return e.name;
  throw ParameterError("unknown ScenarioId value");
}

ScenarioId scenario_from_string(const std::string& name) {
  for (const auto& e : kNames)
    if (name == e.name) return e.id;
  std::ostringstream os;
  os << "unknown scenario \"" << name << "\"; valid scenarios:";
  for (const auto& e : kNames) os << " " << e.name;
  throw ConfigError(os.str());
}

const std::vector<ScenarioId>& all_scenarios() {
  static const std::vector<ScenarioId> ids = [] {
    std::vector<ScenarioId> v;
    for (const auto& e : kNames) v.push_back(e.id);
    return v;
  }();
  return ids;
}

std::vector<double> default_fractions(ScenarioId id) {
  switch (id) {
    case ScenarioId::kBfExponential:
    case ScenarioId::kMvLognormalVsNormal:
      return {0.3, 0.7};
    case ScenarioId::kKsampleLognormal:
    case ScenarioId::kManovaLognormal:
      return {0.1, 0.2, 0.3, 0.4};
    case ScenarioId::kMedianNormal:
    case ScenarioId::kCustomNull:
      return {0.5, 0.5};
  }
  throw ParameterError("unknown ScenarioId value");
}

int default_dim(ScenarioId id) {
  switch (id) {
    case ScenarioId::kMvLognormalVsNormal:
      return 15;
    case ScenarioId::kManovaLognormal:
      return 10;
    default:
      return 1;
  }
}

int scenario_group_count(ScenarioId id) {
  switch (id) {
    case ScenarioId::kKsampleLognormal:
    case ScenarioId::kManovaLognormal:
      return 4;
    default:
      return 2;
  }
}

std::vector<int> fractions_to_sizes(const std::vector<double>& fractions, int n) {
  if (fractions.empty()) throw ConfigError("group_fractions must be non-empty");
  if (n < 1) throw ConfigError("total sample size must be at least 1");
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ConfigError("group fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-8) {
    std::ostringstream os;
    os << "group fractions sum to " << sum << ", expected 1";
    throw ConfigError(os.str());
  }

  const int k = int(fractions.size());
  std::vector<int> sizes(k);
  std::vector<double> remainder(k);
  int assigned = 0;
  for (int g = 0; g < k; ++g) {
    double target = fractions[g] * n;
    sizes[g] = int(std::floor(target));
    remainder[g] = target - sizes[g];
    assigned += sizes[g];
  }
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return remainder[a] > remainder[b]; });
  for (int j = 0; assigned < n; ++j, ++assigned) sizes[order[j % k]] += 1;

  for (int g = 0; g < k; ++g) {
    if (sizes[g] == 0) {
      std::ostringstream os;
      os << "group " << g << " resolves to size 0 at n=" << n
         << "; increase n or its fraction";
      throw ConfigError(os.str());
    }
  }
  return sizes;
}

ScenarioShape resolve_shape(const ScenarioSpec& spec) {
  const int k = scenario_group_count(spec.id);
  std::vector<double> fractions =
      spec.group_fractions.empty() ? default_fractions(spec.id) : spec.group_fractions;
  if (int(fractions.size()) != k && spec.id != ScenarioId::kCustomNull) {
    std::ostringstream os;
    os << "scenario " << to_string(spec.id) << " has " << k
       << " groups but got " << fractions.size() << " fractions";
    throw ConfigError(os.str());
  }
  if (fractions.size() < 2) {
    throw ConfigError("scenario needs at least 2 groups");
  }

  ScenarioShape shape;
  if (spec.dim == 0) {
    shape.dim = default_dim(spec.id);
  } else if (spec.dim == default_dim(spec.id) || spec.id == ScenarioId::kCustomNull) {
    if (spec.dim < 1) throw ConfigError("dimension must be at least 1");
    shape.dim = spec.dim;
  } else {
    std::ostringstream os;
    os << "scenario " << to_string(spec.id) << " has fixed dimension "
       << default_dim(spec.id) << "; cannot override with " << spec.dim;
    throw ConfigError(os.str());
  }
  shape.sizes = fractions_to_sizes(fractions, spec.n);
  return shape;
}

GroupedDataset generate_scenario(const ScenarioSpec& spec, RngStream& rng) {
  const ScenarioShape shape = resolve_shape(spec);
  const int d = shape.dim;
  GroupedDataset ds(d, shape.sizes);

  switch (spec.id) {
    case ScenarioId::kBfExponential: {
      for (int i = 0; i < ds.size(0); ++i)
        *ds.mutable_row(0, i) = 8.0 - rng.exponential(8.0);
      for (int i = 0; i < ds.size(1); ++i)
        *ds.mutable_row(1, i) = rng.exponential(5.0) - 5.0;
      break;
    }

    case ScenarioId::kMvLognormalVsNormal: {
      for (int i = 0; i < ds.size(0); ++i) {
        double* row = ds.mutable_row(0, i);
        for (int c = 0; c < d; ++c) row[c] = std::exp(rng.normal());
      }
      const double mean = std::exp(0.5);  // matches the group-1 lognormal mean
      const GaussianFactor factor(equicorrelated(d, 0.8, 1.0));
      for (int i = 0; i < ds.size(1); ++i) {
        double* row = ds.mutable_row(1, i);
        factor.sample(rng, row);
        for (int c = 0; c < d; ++c) row[c] += mean;
      }
      break;
    }

    case ScenarioId::kKsampleLognormal: {
      static constexpr double kSd[] = {0.70, 0.55, 0.40, 0.25};
      for (int g = 0; g < 4; ++g) {
        const double center = std::exp(kSd[g] * kSd[g] / 2.0);
        for (int i = 0; i < ds.size(g); ++i)
          *ds.mutable_row(g, i) = std::exp(kSd[g] * rng.normal()) - center;
      }
      break;
    }

    case ScenarioId::kManovaLognormal: {
      static constexpr double kVar[] = {1.0, 0.8, 0.6, 0.4};
      static constexpr double kRho[] = {0.3, 0.5, 0.7, 0.9};
      for (int g = 0; g < 4; ++g) {
        const GaussianFactor factor(equicorrelated(d, kRho[g], kVar[g]));
        const double center = std::exp(kVar[g] / 2.0);
        for (int i = 0; i < ds.size(g); ++i) {
          double* row = ds.mutable_row(g, i);
          factor.sample(rng, row);
          for (int c = 0; c < d; ++c) row[c] = std::exp(row[c]) - center;
        }
      }
      break;
    }

    case ScenarioId::kMedianNormal: {
      for (int i = 0; i < ds.size(0); ++i)
        *ds.mutable_row(0, i) = rng.normal();
      for (int i = 0; i < ds.size(1); ++i)
        *ds.mutable_row(1, i) = 5.0 * rng.normal();
      break;
    }

    case ScenarioId::kCustomNull: {
      for (int g = 0; g < ds.k(); ++g) {
        for (int i = 0; i < ds.size(g); ++i) {
          double* row = ds.mutable_row(g, i);
          for (int c = 0; c < d; ++c) row[c] = rng.normal();
        }
      }
      break;
    }
  }
  return ds;
}

}  // namespace prepivot
