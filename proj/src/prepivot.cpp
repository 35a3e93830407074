#include "prepivot/prepivot.hpp"

#include "prepivot/engine.hpp"
#include "prepivot/errors.hpp"

namespace prepivot {

const char* to_string(PrepivotKind kind) {
  switch (kind) {
    case PrepivotKind::kNone: return "none";
    case PrepivotKind::kGaussian: return "gaussian";
    case PrepivotKind::kBootstrap: return "bootstrap";
    case PrepivotKind::kBootAfterGauss: return "boot_after_gauss";
  }
  throw ParameterError("unknown prepivot kind");
}

PrepivotKind prepivot_kind_from_string(const std::string& s) {
  if (s == "none") return PrepivotKind::kNone;
  if (s == "gaussian") return PrepivotKind::kGaussian;
  if (s == "bootstrap") return PrepivotKind::kBootstrap;
  if (s == "boot_after_gauss") return PrepivotKind::kBootAfterGauss;
  throw ConfigError("unknown prepivot kind '" + s +
                    "' (expected none, gaussian, bootstrap, boot_after_gauss)");
}

const char* to_string(GaussianMode mode) {
  switch (mode) {
    case GaussianMode::kAuto: return "auto";
    case GaussianMode::kClosedForm: return "closed_form";
    case GaussianMode::kMonteCarlo: return "monte_carlo";
  }
  throw ParameterError("unknown gaussian mode");
}

GaussianMode gaussian_mode_from_string(const std::string& s) {
  if (s == "auto") return GaussianMode::kAuto;
  if (s == "closed_form") return GaussianMode::kClosedForm;
  if (s == "monte_carlo") return GaussianMode::kMonteCarlo;
  throw ConfigError("unknown gaussian mode '" + s +
                    "' (expected auto, closed_form, monte_carlo)");
}

bool closed_form_available(StatId id) {
  switch (id) {
    case StatId::kDiffMeans:
    case StatId::kStudentized:
    case StatId::kHotellingUnpooled:
    case StatId::kCrWn:
      return true;
    default:
      return false;
  }
}

void check_compatible(const PrepivotSpec& pspec, const StatisticSpec& spec) {
  const bool gauss = pspec.kind == PrepivotKind::kGaussian ||
                     pspec.kind == PrepivotKind::kBootAfterGauss;
  const bool boot = pspec.kind == PrepivotKind::kBootstrap ||
                    pspec.kind == PrepivotKind::kBootAfterGauss;
  if (gauss) {
    if (pspec.gaussian_mode == GaussianMode::kClosedForm &&
        !closed_form_available(spec.id))
      throw ConfigError(std::string("statistic ") + to_string(spec.id) +
                        " has no closed-form gaussian reference");
    const bool mc = pspec.gaussian_mode == GaussianMode::kMonteCarlo ||
                    (pspec.gaussian_mode == GaussianMode::kAuto &&
                     !closed_form_available(spec.id));
    if (mc && pspec.mc_draws < 1)
      throw ParameterError("gaussian reference draw count must be >= 1");
  }
  if (boot && pspec.nboot < 1)
    throw ParameterError("bootstrap resample count must be >= 1");
}

namespace {

double run_single_cell(const StatisticSpec& spec, const PrepivotSpec& pspec,
                       const GroupedDataset& ds, RngStream ctx) {
  GridCell cell;
  cell.stat = spec;
  cell.prep = pspec;
  std::vector<GridCell> cells;
  cells.push_back(cell);
  CellGrid grid(std::move(cells));
  std::vector<double> out;
  grid.run(ds, ctx, out);
  return out[0];
}

}  // namespace

double gaussian_prepivot(const StatisticSpec& spec, const GroupedDataset& ds,
                         GaussianMode mode, int mc_draws, RngStream ctx) {
  PrepivotSpec pspec;
  pspec.kind = PrepivotKind::kGaussian;
  pspec.gaussian_mode = mode;
  pspec.mc_draws = mc_draws;
  return run_single_cell(spec, pspec, ds, ctx);
}

double bootstrap_prepivot(const StatisticSpec& spec, const GroupedDataset& ds,
                          int nboot, RngStream ctx) {
  PrepivotSpec pspec;
  pspec.kind = PrepivotKind::kBootstrap;
  pspec.nboot = nboot;
  return run_single_cell(spec, pspec, ds, ctx);
}

double boot_after_gauss(const StatisticSpec& spec, const GroupedDataset& ds,
                        int nboot, GaussianMode mode, int mc_draws, RngStream ctx) {
  PrepivotSpec pspec;
  pspec.kind = PrepivotKind::kBootAfterGauss;
  pspec.gaussian_mode = mode;
  pspec.mc_draws = mc_draws;
  pspec.nboot = nboot;
  return run_single_cell(spec, pspec, ds, ctx);
}

double apply_prepivot(const PrepivotSpec& pspec, const StatisticSpec& spec,
                      const GroupedDataset& ds, RngStream ctx) {
  return run_single_cell(spec, pspec, ds, ctx);
}

}  // namespace prepivot
