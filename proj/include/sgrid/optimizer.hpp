#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sgrid/augmented_grid.hpp"
#include "sgrid/dataset.hpp"
#include "sgrid/workload.hpp"

namespace sgrid {

// Linear query-time model: w0 * (#cell ranges) + w1 * (#scanned points) *
// (#filtered dims). Aggregation time is a fixed cost and is excluded.
struct CostWeights {
  double w0 = 100e-9;  // seconds per cell-range lookup
  double w1 = 2e-9;    // seconds per point-dimension scanned
};

struct GridConfig {
  Skeleton skeleton;
  std::vector<uint32_t> parts;  // per original dim
  double predicted_cost = 0;    // average predicted seconds per query
};

struct TraceEntry {
  int iteration = 0;
  std::string skeleton;
  std::vector<uint32_t> parts;
  double cost = 0;
};
using OptTrace = std::vector<TraceEntry>;

struct OptResult {
  GridConfig config;
  OptTrace trace;
};

// Shared optimization context for one region: a fixed-seed row sample with
// per-dimension sorted copies, the region-intersecting queries, and memo
// caches for fitted models and evaluated configs.
class OptimizerEnv {
 public:
  OptimizerEnv(const Dataset& ds, const std::vector<uint64_t>& region_rows,
               std::vector<Query> queries, CostWeights weights, uint64_t cell_budget = 0,
               uint64_t seed = 11, uint64_t sample_cap = 100000);

  const Dataset& dataset() const { return *ds_; }
  uint64_t region_size() const { return region_size_; }
  const std::vector<Query>& queries() const { return queries_; }
  const CostWeights& weights() const { return weights_; }
  uint64_t cell_budget() const { return budget_; }
  bool dim_filtered(uint32_t dim) const { return filtered_[dim]; }
  double avg_selectivity(uint32_t dim) const { return avg_sel_[dim]; }
  const std::vector<uint64_t>& sorted_sample(uint32_t dim) const { return sorted_[dim]; }
  const std::vector<uint64_t>& sample() const { return sample_; }

  // Fits the grid's models on the sample (memoized) and lays out sample rows.
  AugmentedGrid fit_sample_grid(const Skeleton& skeleton,
                                const std::vector<uint32_t>& parts) const;

  // Average predicted cost of the workload under (S, P); memoized.
  double average_cost(const Skeleton& skeleton, const std::vector<uint32_t>& parts) const;

  std::optional<FunctionalMapping> try_mapping(uint32_t mapped_dim, uint32_t target_dim,
                                               double max_error_frac = 0.10) const;
  // Fraction of empty cells in a probe x probe independent grid over (x, y).
  double probe_empty_fraction(uint32_t x, uint32_t y, uint32_t probe = 16) const;

 private:
  const Dataset* ds_;
  std::vector<uint64_t> sample_;
  uint64_t region_size_ = 0;
  std::vector<Query> queries_;
  CostWeights weights_;
  uint64_t budget_ = 0;
  std::vector<bool> filtered_;
  std::vector<double> avg_sel_;
  std::vector<std::vector<uint64_t>> sorted_;  // per-dim sorted sample values
  std::vector<std::pair<uint64_t, uint64_t>> minmax_;
  size_t k_knots_ = 256;

  mutable std::map<std::pair<uint32_t, uint32_t>, std::optional<FunctionalMapping>> mapping_cache_;
  mutable std::map<std::tuple<uint32_t, uint32_t, uint32_t>, ConditionalCDF> conditional_cache_;
  mutable std::map<std::string, double> cost_cache_;
};

inline double cost_formula(double cell_ranges, double scanned_points, double filtered_dims,
                           const CostWeights& w) {
  return w.w0 * cell_ranges + w.w1 * scanned_points * filtered_dims;
}

// Predicted time for one query against a grid fitted on a sample; `scale`
// converts sample row counts to region row counts.
double estimate_query_cost(const Query& q, const AugmentedGrid& sample_grid, double scale,
                           const CostWeights& w);

// Nonnegative least squares (2x2 normal equations) of measured seconds
// against (cell ranges, scanned point-dims); defaults when singular.
CostWeights fit_cost_weights(const std::vector<double>& cell_ranges,
                             const std::vector<double>& point_dims,
                             const std::vector<double>& seconds);

// Least-squares fit of measured times against (cell ranges, scanned
// point-dims) on a pilot grid; falls back to the defaults when the design
// matrix is singular. Weights are clamped nonnegative.
CostWeights calibrate_cost_model(const Dataset& store, const AugmentedGrid& pilot,
                                 uint64_t region_offset, const std::vector<Query>& pilot_queries,
                                 int repeats = 3);

// Heuristic initialization: per dimension, prefer a functional mapping with
// residual span under 10% of the target's width, else a conditional CDF when
// independent partitioning would leave >25% of probe-grid cells empty, else
// independent. Targets and bases are forced independent.
Skeleton initialize_skeleton(const OptimizerEnv& env);

// Partition counts proportional to 1/avg filter selectivity per grid dim,
// scaled to the cell budget. Unfiltered grid dims that are referenced as
// targets or bases get the minimum filtered share; unreferenced unfiltered
// dims stay at one partition.
std::vector<uint32_t> initialize_partitions(const OptimizerEnv& env, const Skeleton& skeleton);

// One numerical-gradient descent step over P in log space (multiplicative
// probe 1.25) with backtracking halving; the result never exceeds the cell
// budget. `cost` is updated to the accepted configuration's cost.
std::vector<uint32_t> gradient_step_partitions(const OptimizerEnv& env, const Skeleton& skeleton,
                                               std::vector<uint32_t> parts, double& cost);

// All structurally valid skeletons differing from s in exactly one
// dimension's strategy.
std::vector<Skeleton> one_hop_skeletons(const Skeleton& s);

// Evaluates every one-hop skeleton (re-fitting models as needed) and returns
// the argmin including the current skeleton itself.
std::pair<Skeleton, std::vector<uint32_t>> local_skeleton_search(const OptimizerEnv& env,
                                                                 Skeleton skeleton,
                                                                 std::vector<uint32_t> parts,
                                                                 double& cost);

// Alternates gradient steps over P with local skeleton search until the
// relative improvement stays under 1% for 3 iterations (30 max); returns the
// best configuration seen.
OptResult adaptive_gradient_descent(const OptimizerEnv& env);

// AGD with the skeleton frozen at its heuristic initialization.
OptResult gd_only(const OptimizerEnv& env);

// Gradient descent over P with the skeleton frozen at `s`.
OptResult gd_fixed_skeleton(const OptimizerEnv& env, Skeleton s);

// AGD from the naive all-independent skeleton.
OptResult agd_naive_init(const OptimizerEnv& env);

// Seeded random-restart hill climber over (S, P); the black-box stand-in.
OptResult random_restart_hillclimb(const OptimizerEnv& env, int iters = 50, uint64_t seed = 17);

uint64_t default_cell_budget(uint64_t region_rows);

std::string trace_to_jsonl(const OptTrace& trace);

}  // namespace sgrid
