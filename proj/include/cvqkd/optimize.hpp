#pragma once

#include <array>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "cvqkd/coherent.hpp"
#include "cvqkd/scenario.hpp"

namespace cvqkd {

/// Memoizes binned channel statistics per (loss, excess, delta, alpha);
/// alpha is +infinity for the unbounded scheme. The statistics are by far
/// the most expensive part of a grid search, and they do not depend on the
/// round counts, so a sweep over N reuses every entry.
class StatsCache {
 public:
  const BinnedChannelStats& get(const ScenarioConfig& cfg,
                                const BinningScheme& scheme);
  std::size_t size() const { return cache_.size(); }

 private:
  std::map<std::array<double, 4>, BinnedChannelStats> cache_;
};

/// The winning grid point of one optimization, with the full breakdown.
struct OptimizerOutcome {
  bool feasible = false;
  std::string binding_constraint;  // why the feasible set is empty
  double k_fraction = 0.0;
  double delta = 0.0;
  double alpha = std::numeric_limits<double>::infinity();  // inf = unbounded
  long long k = 0;
  long long n = 0;
  double d0 = 0.0;
  KeyRateResult result;
};

/// Exhaustive search over the config's (k/N, delta, alpha) grids maximizing
/// the key length; deterministic tie-break smallest k, then delta, then
/// alpha. The collective and dw attacks use the unbounded scheme, so their
/// alpha axis collapses. An empty feasible set yields ell = 0 with the
/// binding constraint named.
OptimizerOutcome optimize_parameters(const ScenarioConfig& cfg,
                                     long long rounds_total,
                                     StatsCache& cache);

struct SweepRow {
  double axis_value = 0.0;
  OptimizerOutcome outcome;
  std::string error;  // nonempty when the point failed outright
};

/// One optimization per sweep axis point; per-point errors are recorded
/// inline and the sweep continues.
std::vector<SweepRow> sweep(const ScenarioConfig& cfg);

/// Fixed-schema CSV (header row naming every breakdown column); identical
/// inputs produce byte-identical output.
std::string sweep_csv(const ScenarioConfig& cfg,
                      const std::vector<SweepRow>& rows);

}  // namespace cvqkd
