#include "prepivot/engine.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "prepivot/errors.hpp"

namespace prepivot {

namespace {

GaussianMode resolve_gaussian_mode(GaussianMode mode, StatId id) {
  if (mode == GaussianMode::kAuto)
    return closed_form_available(id) ? GaussianMode::kClosedForm
                                     : GaussianMode::kMonteCarlo;
  return mode;
}

// Rethrows the in-flight exception with a message prefix, preserving the
// error category for the common typed errors.
[[noreturn]] void rethrow_prefixed(const std::string& prefix) {
  try {
    throw;
  } catch (const DegenerateStatisticError& e) {
    throw DegenerateStatisticError(prefix + e.what());
  } catch (const InsufficientDataError& e) {
    throw InsufficientDataError(prefix + e.what());
  } catch (const CovarianceError& e) {
    throw CovarianceError(prefix + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const ParameterError& e) {
    throw ParameterError(prefix + e.what());
  } catch (const Error& e) {
    throw Error(prefix + e.what());
  }
}

bool needs_boot(PrepivotKind kind) {
  return kind == PrepivotKind::kBootstrap || kind == PrepivotKind::kBootAfterGauss;
}

bool needs_gauss_obs(PrepivotKind kind) {
  return kind == PrepivotKind::kGaussian || kind == PrepivotKind::kBootAfterGauss;
}

}  // namespace

EmpiricalDistribution::EmpiricalDistribution(std::vector<double> values)
    : values_(std::move(values)) {
  if (values_.empty())
    throw ParameterError("empirical distribution needs at least one draw");
  std::sort(values_.begin(), values_.end());
}

int EmpiricalDistribution::count_geq(double x) const {
  return static_cast<int>(values_.end() -
                          std::lower_bound(values_.begin(), values_.end(), x));
}

double EmpiricalDistribution::quantile(double q) const {
  if (!(q > 0.0 && q <= 1.0))
    throw ParameterError("quantile level must lie in (0, 1]");
  const auto idx = static_cast<std::size_t>(
      std::max(0.0, std::ceil(q * static_cast<double>(values_.size())) - 1.0));
  return values_[std::min(idx, values_.size() - 1)];
}

struct CellGrid::StatSlot {
  StatisticSpec spec;
  std::unique_ptr<StatEvaluator> ev;
};

CellGrid::CellGrid(std::vector<GridCell> cells) : cells_(std::move(cells)) {
  if (cells_.empty()) throw ParameterError("grid needs at least one cell");
  cell_slot_.resize(cells_.size());
  for (std::size_t j = 0; j < cells_.size(); ++j) {
    const GridCell& c = cells_[j];
    check_compatible(c.prep, c.stat);
    int slot = -1;
    for (std::size_t s = 0; s < slots_.size(); ++s)
      if (slots_[s]->spec.id == c.stat.id && slots_[s]->spec.vboot == c.stat.vboot) {
        slot = static_cast<int>(s);
        break;
      }
    if (slot < 0) {
      slot = static_cast<int>(slots_.size());
      auto ss = std::make_unique<StatSlot>();
      ss->spec = c.stat;
      ss->ev = StatEvaluator::create(c.stat);
      slots_.push_back(std::move(ss));
    }
    cell_slot_[j] = slot;
    if (needs_boot(c.prep.kind)) {
      any_boot_ = true;
      max_nboot_ = std::max(max_nboot_, c.prep.nboot);
    }
  }
  const std::size_t ns = slots_.size();
  raw_.resize(ns);
  tbreve_.resize(ns);
  tdegen_.resize(ns);
  slot_boot_.assign(ns, 0);
  for (std::size_t j = 0; j < cells_.size(); ++j)
    if (needs_boot(cells_[j].prep.kind))
      slot_boot_[static_cast<std::size_t>(cell_slot_[j])] = 1;
  origin_.resize(ns);
  kobs_.resize(cells_.size());
  boot_count_.resize(cells_.size());
}

CellGrid::~CellGrid() = default;

std::unique_ptr<CellGrid> CellGrid::clone() const {
  return std::make_unique<CellGrid>(cells_);
}

double CellGrid::last_raw(int j) const {
  return raw_[static_cast<std::size_t>(cell_slot_[static_cast<std::size_t>(j)])];
}

void CellGrid::run(const GroupedDataset& ds, RngStream ctx, std::vector<double>& out) {
  const int nc = size();
  const std::size_t ns = slots_.size();
  out.resize(static_cast<std::size_t>(nc));
  kc_.bind(ds, ctx.child(1));

  for (std::size_t s = 0; s < ns; ++s) {
    StatEvaluator& ev = *slots_[s]->ev;
    ev.bind(ds, kc_);
    raw_[s] = ev.value();  // observed degeneracy aborts here
    if (slot_boot_[s]) origin_[s] = ev.theta();
  }

  for (int j = 0; j < nc; ++j) {
    const GridCell& c = cells_[static_cast<std::size_t>(j)];
    const std::size_t s = static_cast<std::size_t>(cell_slot_[static_cast<std::size_t>(j)]);
    StatEvaluator& ev = *slots_[s]->ev;
    boot_count_[static_cast<std::size_t>(j)] = 0;
    if (c.prep.kind == PrepivotKind::kNone) {
      out[static_cast<std::size_t>(j)] = raw_[s];
      continue;
    }
    if (needs_gauss_obs(c.prep.kind)) {
      const GaussianMode mode = resolve_gaussian_mode(c.prep.gaussian_mode, c.stat.id);
      double k;
      if (mode == GaussianMode::kClosedForm) {
        k = ev.closed_k(raw_[s]);
      } else {
        ev.mc_prepare();
        RngStream g = ctx.child(static_cast<std::uint64_t>(2 + j));
        int cnt = 0;
        for (int b = 0; b < c.prep.mc_draws; ++b)
          if (ev.mc_draw(g) <= raw_[s]) ++cnt;
        k = static_cast<double>(cnt) / c.prep.mc_draws;
      }
      if (c.prep.kind == PrepivotKind::kGaussian)
        out[static_cast<std::size_t>(j)] = k;
      else
        kobs_[static_cast<std::size_t>(j)] = k;
    }
  }

  if (!any_boot_) return;

  if (!boot_ds_.same_shape(ds)) boot_ds_ = GroupedDataset(ds.dim(), ds.sizes());
  for (int b = 0; b < max_nboot_; ++b) {
    RngStream bctx = ctx.child(static_cast<std::uint64_t>(2 + nc + b));
    {
      RngStream rs = bctx.child(0);
      bootstrap_resample_into(ds, rs, boot_ds_);
    }
    boot_kc_.bind(boot_ds_, bctx.child(1));
    for (std::size_t s = 0; s < ns; ++s) {
      if (!slot_boot_[s]) continue;
      StatEvaluator& ev = *slots_[s]->ev;
      ev.bind(boot_ds_, boot_kc_);
      if (ev.degenerate()) {
        tdegen_[s] = 1;
      } else {
        tdegen_[s] = 0;
        tbreve_[s] = ev.centered(origin_[s]);
      }
    }
    for (int j = 0; j < nc; ++j) {
      const GridCell& c = cells_[static_cast<std::size_t>(j)];
      if (!needs_boot(c.prep.kind) || b >= c.prep.nboot) continue;
      const std::size_t s = static_cast<std::size_t>(cell_slot_[static_cast<std::size_t>(j)]);
      if (c.prep.kind == PrepivotKind::kBootstrap) {
        // A degenerate resample counts as +infinity: never <= a finite
        // observed value.
        if (!tdegen_[s] && tbreve_[s] <= raw_[s]) ++boot_count_[static_cast<std::size_t>(j)];
        continue;
      }
      double kb;
      if (tdegen_[s]) {
        kb = 1.0;  // distribution function at +infinity
      } else {
        StatEvaluator& ev = *slots_[s]->ev;
        const GaussianMode mode = resolve_gaussian_mode(c.prep.gaussian_mode, c.stat.id);
        if (mode == GaussianMode::kClosedForm) {
          kb = ev.closed_k(tbreve_[s]);
        } else {
          ev.mc_prepare();
          RngStream g = bctx.child(static_cast<std::uint64_t>(2 + j));
          int cnt = 0;
          for (int i = 0; i < c.prep.mc_draws; ++i)
            if (ev.mc_draw(g) <= tbreve_[s]) ++cnt;
          kb = static_cast<double>(cnt) / c.prep.mc_draws;
        }
      }
      if (kb <= kobs_[static_cast<std::size_t>(j)]) ++boot_count_[static_cast<std::size_t>(j)];
    }
  }
  for (int j = 0; j < nc; ++j) {
    const GridCell& c = cells_[static_cast<std::size_t>(j)];
    if (needs_boot(c.prep.kind))
      out[static_cast<std::size_t>(j)] =
          static_cast<double>(boot_count_[static_cast<std::size_t>(j)]) / c.prep.nboot;
  }
}

EmpiricalDistribution permutation_distribution(const PermutationEval& eval,
                                               const GroupedDataset& ds, int nperm,
                                               RngStream rng) {
  if (nperm < 1) throw ParameterError("permutation count must be >= 1");
  std::vector<double> vals(static_cast<std::size_t>(nperm));
  GroupAssignment asg;
  GroupedDataset permuted(ds.dim(), ds.sizes());
  for (int p = 1; p <= nperm; ++p) {
    RngStream ctx = rng.child(static_cast<std::uint64_t>(p));
    {
      RngStream rs = ctx.child(0);
      random_assignment_into(ds, rs, asg);
    }
    permute_into(ds, asg, permuted);
    try {
      vals[static_cast<std::size_t>(p - 1)] = eval(permuted, ctx);
    } catch (const Error&) {
      rethrow_prefixed("permutation " + std::to_string(p) + ": ");
    }
  }
  return EmpiricalDistribution(std::move(vals));
}

double mc_p_value(double observed, const EmpiricalDistribution& dist) {
  return (1.0 + dist.count_geq(observed)) / (1.0 + dist.count());
}

std::uint64_t assignment_count(const std::vector<int>& sizes) {
  // Product of binomials C(m_1 + ... + m_i, m_i), each computed exactly.
  std::uint64_t total = 1;
  std::uint64_t pool = 0;
  for (int sz : sizes) {
    for (int i = 1; i <= sz; ++i) {
      ++pool;
      // total *= pool / i, exact at every step for binomial prefixes.
      const unsigned __int128 t =
          static_cast<unsigned __int128>(total) * pool / static_cast<std::uint64_t>(i);
      if (t > static_cast<unsigned __int128>(UINT64_MAX)) return UINT64_MAX;
      total = static_cast<std::uint64_t>(t);
    }
  }
  return total;
}

double exact_p_value(const ExactEval& eval, const GroupedDataset& ds,
                     std::uint64_t cap) {
  const std::uint64_t total = assignment_count(ds.sizes());
  if (total > cap)
    throw EnumerationTooLargeError(
        "assignment count " + std::to_string(total) + " exceeds cap " +
        std::to_string(cap));
  const double observed = eval(ds);
  GroupAssignment asg;
  asg.reserve(static_cast<std::size_t>(ds.n()));
  for (int g = ds.k() - 1; g >= 0; --g)
    asg.insert(asg.end(), static_cast<std::size_t>(ds.size(g)), g);
  GroupedDataset work(ds.dim(), ds.sizes());
  std::uint64_t geq = 0, seen = 0;
  do {
    permute_into(ds, asg, work);
    if (eval(work) >= observed) ++geq;
    ++seen;
  } while (std::prev_permutation(asg.begin(), asg.end()));
  if (seen != total)
    throw Error("assignment enumeration drifted from the multinomial count");
  return static_cast<double>(geq) / static_cast<double>(total);
}

void parallel_chunks(int items, int threads,
                     const std::function<void(int, int)>& fn) {
  if (items <= 0) return;
  const int t = std::max(1, std::min(threads, items));
  if (t == 1) {
    fn(0, items);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(t));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(t));
  const int base = items / t, extra = items % t;
  int first = 0;
  for (int w = 0; w < t; ++w) {
    const int len = base + (w < extra ? 1 : 0);
    const int last = first + len;
    workers.emplace_back([&fn, &errors, w, first, last] {
      try {
        fn(first, last);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
    first = last;
  }
  for (auto& th : workers) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<TestResult> run_test_grid(const GroupedDataset& ds,
                                      const std::vector<GridCell>& cells, int nperm,
                                      RngStream root, std::uint64_t seed_echo,
                                      int threads) {
  if (nperm < 1) throw ParameterError("permutation count must be >= 1");
  CellGrid grid(cells);
  const int nc = grid.size();
  std::vector<double> obs;
  grid.run(ds, root.child(0), obs);
  std::vector<double> obs_raw(static_cast<std::size_t>(nc));
  for (int j = 0; j < nc; ++j) obs_raw[static_cast<std::size_t>(j)] = grid.last_raw(j);

  std::vector<double> vals(static_cast<std::size_t>(nperm) * static_cast<std::size_t>(nc));
  parallel_chunks(nperm, threads, [&](int first, int last) {
    auto worker = grid.clone();
    std::vector<double> tmp;
    GroupAssignment asg;
    GroupedDataset permuted(ds.dim(), ds.sizes());
    for (int i = first; i < last; ++i) {
      const int p = i + 1;
      RngStream ctx = root.child(static_cast<std::uint64_t>(p));
      {
        RngStream rs = ctx.child(0);
        random_assignment_into(ds, rs, asg);
      }
      permute_into(ds, asg, permuted);
      try {
        worker->run(permuted, ctx, tmp);
      } catch (const Error&) {
        rethrow_prefixed("permutation " + std::to_string(p) + ": ");
      }
      std::copy(tmp.begin(), tmp.end(),
                vals.begin() + static_cast<std::size_t>(i) * static_cast<std::size_t>(nc));
    }
  });

  std::vector<TestResult> out(static_cast<std::size_t>(nc));
  std::vector<double> col(static_cast<std::size_t>(nperm));
  for (int j = 0; j < nc; ++j) {
    for (int i = 0; i < nperm; ++i)
      col[static_cast<std::size_t>(i)] =
          vals[static_cast<std::size_t>(i) * static_cast<std::size_t>(nc) +
               static_cast<std::size_t>(j)];
    EmpiricalDistribution dist(col);
    TestResult& r = out[static_cast<std::size_t>(j)];
    const GridCell& c = cells[static_cast<std::size_t>(j)];
    r.observed_raw = obs_raw[static_cast<std::size_t>(j)];
    r.observed_prepivoted = obs[static_cast<std::size_t>(j)];
    r.p_value = mc_p_value(obs[static_cast<std::size_t>(j)], dist);
    r.nperm = nperm;
    r.nboot = needs_boot(c.prep.kind) ? c.prep.nboot : 0;
    const bool mc_gauss =
        needs_gauss_obs(c.prep.kind) &&
        resolve_gaussian_mode(c.prep.gaussian_mode, c.stat.id) == GaussianMode::kMonteCarlo;
    r.mc_draws = mc_gauss ? c.prep.mc_draws : 0;
    r.seed = seed_echo;
    r.statistic = c.stat.id;
    r.prepivot = c.prep.kind;
  }
  return out;
}

std::vector<TestResult> run_test_grid(const GroupedDataset& ds,
                                      const std::vector<GridCell>& cells, int nperm,
                                      std::uint64_t seed, int threads) {
  return run_test_grid(ds, cells, nperm, derive_stream(seed, {}), seed, threads);
}

TestResult run_test(const GroupedDataset& ds, const StatisticSpec& spec,
                    const PrepivotSpec& pspec, int nperm, std::uint64_t seed,
                    int threads) {
  GridCell cell;
  cell.stat = spec;
  cell.prep = pspec;
  return run_test_grid(ds, {cell}, nperm, seed, threads)[0];
}

}  // namespace prepivot
