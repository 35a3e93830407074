#pragma once

#include <string>

#include "prepivot/dataset.hpp"
#include "prepivot/rng.hpp"
#include "prepivot/statistics.hpp"

namespace prepivot {

enum class PrepivotKind { kNone, kGaussian, kBootstrap, kBootAfterGauss };

// kAuto resolves to kClosedForm for the ids with a registered closed form
// (diff_means, studentized, hotelling_unpooled, cr_Wn) and kMonteCarlo for
// everything else. Requesting kClosedForm for an id without one is a
// configuration error.
enum class GaussianMode { kAuto, kClosedForm, kMonteCarlo };

struct PrepivotSpec {
  PrepivotKind kind = PrepivotKind::kNone;
  GaussianMode gaussian_mode = GaussianMode::kAuto;
  int mc_draws = 1000;  // B, Monte Carlo Gaussian reference draws
  int nboot = 100;      // bootstrap resamples for the bootstrap kinds
};

const char* to_string(PrepivotKind kind);
PrepivotKind prepivot_kind_from_string(const std::string& s);
const char* to_string(GaussianMode mode);
GaussianMode gaussian_mode_from_string(const std::string& s);

// Validates counts and the closed-form registry; throws ConfigError or
// ParameterError.
void check_compatible(const PrepivotSpec& pspec, const StatisticSpec& spec);
bool closed_form_available(StatId id);

// Stream discipline
// -----------------
// Every operation below receives a context stream ctx and consumes only
// derived children of it, never ctx itself, so evaluation order cannot change
// any draw. The layout, with j the grid cell index and ncells the number of
// (statistic, prepivot) cells sharing the context (standalone calls are the
// single-cell case j = 0, ncells = 1):
//
//   ctx.child(0)                 group assignment draws (owned by the caller;
//                                unused by the prepivot layer)
//   ctx.child(1)                 kernel auxiliary root; the median variance
//                                kernel with vboot draws uses
//                                ctx.child(1).child(vboot)
//   ctx.child(2 + j)             Gaussian reference Monte Carlo draws, cell j
//   ctx.child(2 + ncells + b)    bootstrap resample context b = 0..nboot-1:
//     .child(0)                  within-group resampling index draws
//     .child(1)                  kernel auxiliary root for the resample
//     .child(2 + j)              inner Gaussian Monte Carlo draws, cell j
//
// Bootstrap resample patterns are therefore shared by every cell of one
// context, which is what makes paired grid comparisons meaningful and keeps
// the nested cost independent of the grid width.

// K(T_n, P-hat): probability that a centered Gaussian vector with the
// blockwise covariance (n/n_i) Sigma-hat_i, contracted through the
// statistic's own (C, eta), lands at or below the observed statistic.
double gaussian_prepivot(const StatisticSpec& spec, const GroupedDataset& ds,
                         GaussianMode mode, int mc_draws, RngStream ctx);

// J(T_n): fraction of nboot within-group resamples whose recentered statistic
// value is <= the observed statistic (ties count).
double bootstrap_prepivot(const StatisticSpec& spec, const GroupedDataset& ds,
                          int nboot, RngStream ctx);

// J(K): fraction of resamples b with K(T-breve_b, P-hat*_b) <= K(T_n, P-hat),
// the inner K rebuilt from each resample's own kernels. A resample on which
// the statistic itself is degenerate contributes an inner value of 1 (the
// +infinity convention through a distribution function).
double boot_after_gauss(const StatisticSpec& spec, const GroupedDataset& ds,
                        int nboot, GaussianMode mode, int mc_draws, RngStream ctx);

// Dispatch on pspec.kind; kNone evaluates the raw statistic.
double apply_prepivot(const PrepivotSpec& pspec, const StatisticSpec& spec,
                      const GroupedDataset& ds, RngStream ctx);

}  // namespace prepivot
