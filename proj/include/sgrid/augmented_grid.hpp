#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sgrid/column_store.hpp"
#include "sgrid/dataset.hpp"
#include "sgrid/workload.hpp"

namespace sgrid {

// Piecewise-linear empirical CDF from quantile knots at fractions j/K.
// eval(x) approximates the fraction of values strictly below x, so the
// minimum maps to 0 and a constant column keeps every point in partition 0.
struct EmpiricalCDF {
  std::vector<uint64_t> knots;  // K+1 ascending codes

  static EmpiricalCDF fit(std::vector<uint64_t> values, size_t k_knots = 256);
  double eval(uint64_t x) const;  // monotone nondecreasing into [0, 1]
  uint32_t partition(uint64_t x, uint32_t p) const;  // min(floor(eval(x)*p), p-1)
};

// Linear predictor target = slope*mapped + intercept with max-residual
// bounds: for every fitted point, predict(y) - e_lo <= x <= predict(y) + e_hi.
// Four stored reals plus the two dimension ids.
struct FunctionalMapping {
  uint32_t mapped_dim = 0;
  uint32_t target_dim = 0;
  double slope = 0;
  double intercept = 0;
  double e_lo = 0;
  double e_hi = 0;

  double predict(double y) const { return slope * y + intercept; }

  // Conservative predicate on the target dim implied by a predicate on the
  // mapped dim; nullopt when no integer code can satisfy it.
  std::optional<RangePredicate> induce(const RangePredicate& on_mapped,
                                       uint64_t target_domain) const;
};

// Always returns the fitted mapping (unless the mapped values are
// degenerate); used by grid builds, where residual bounds must cover every
// region point regardless of size.
std::optional<FunctionalMapping> fit_linear_bounds(const std::vector<uint64_t>& mapped_vals,
                                                   const std::vector<uint64_t>& target_vals,
                                                   uint32_t mapped_dim, uint32_t target_dim);

// Adds the acceptance rule: rejects when (e_lo + e_hi) exceeds
// max_error_frac of the target dimension's observed width.
std::optional<FunctionalMapping> fit_functional_mapping(const std::vector<uint64_t>& mapped_vals,
                                                        const std::vector<uint64_t>& target_vals,
                                                        uint32_t mapped_dim, uint32_t target_dim,
                                                        double max_error_frac = 0.10);

// CDF(Y | X partition): one quantile model of Y per base partition, plus
// per-partition min/max of Y so query ranges can skip partitions that are
// guaranteed empty.
struct ConditionalCDF {
  uint32_t dependent_dim = 0;
  uint32_t base_dim = 0;
  std::vector<EmpiricalCDF> per_base;
  std::vector<std::pair<uint64_t, uint64_t>> y_minmax;  // min > max marks an empty base bucket
};

enum class Strategy : uint8_t { Independent, Mapped, Dependent };

struct DimStrategy {
  Strategy kind = Strategy::Independent;
  uint32_t other = 0;  // target dim for Mapped, base dim for Dependent

  bool operator==(const DimStrategy&) const = default;
};

// Per-dimension partitioning strategies. Targets and bases must themselves
// be Independent, which keeps the restriction graph acyclic.
struct Skeleton {
  std::vector<DimStrategy> dims;

  void validate() const;
  std::vector<uint32_t> grid_dims() const;  // non-mapped dims, ascending
  size_t mapping_count() const;
  size_t conditional_count() const;
  std::string label() const;  // e.g. "[X0, X1|X0, X2->X0]"

  bool operator==(const Skeleton&) const = default;
};

// A fitted grid over one region: models per dimension, a mixed-radix cell
// layout over the grid dims (ascending dim order, last dim least
// significant), and a prefix-offset lookup table into the region's rows.
struct AugmentedGrid {
  Skeleton skeleton;
  std::vector<uint32_t> parts;      // per original dim; 1 for mapped dims
  std::vector<uint32_t> grid_dims;  // ascending
  std::vector<uint64_t> strides;    // parallel to grid_dims
  std::vector<std::optional<EmpiricalCDF>> cdf;
  std::vector<std::optional<FunctionalMapping>> mapping;
  std::vector<std::optional<ConditionalCDF>> conditional;
  std::vector<std::pair<uint64_t, uint64_t>> data_minmax;  // per dim, observed
  std::vector<uint64_t> offsets;  // length cells+1; region-local row offsets
  uint64_t n_rows = 0;

  uint64_t cells() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  uint64_t lookup_table_bytes() const { return 8 * (cells() + 1); }

  std::vector<uint32_t> cell_coordinate(const std::vector<uint64_t>& point) const;
  uint64_t cell_index(const std::vector<uint32_t>& coords) const;

  std::string to_json() const;  // skeleton, P, knots, mappings, table size
};

struct GridBuildResult {
  AugmentedGrid grid;
  std::vector<uint64_t> rows;  // region source rows, reordered by cell index
};

// Fits all models on the given rows, stable-sorts rows by cell index, and
// emits the permutation plus the prefix-offset lookup table.
GridBuildResult build_grid(const Dataset& ds, std::vector<uint64_t> region_rows,
                           const Skeleton& skeleton, const std::vector<uint32_t>& parts,
                           size_t k_knots = 256);

// Region-local physical ranges covering every row that can match q. Mapped
// predicates are first rewritten onto their targets; dependent dims resolve
// per base partition, skipping bases whose y min/max excludes the predicate.
// Ranges are maximal runs of adjacent cells; exact only when every filtered
// dim's partitions sit strictly inside the predicate and no mapped-dim
// predicate exists on this grid.
std::vector<PhysicalRange> intersecting_cell_ranges(const AugmentedGrid& grid, const Query& q);

// Composes intersecting_cell_ranges (offset into global rows) with a
// column-store scan of the query's original predicates.
uint64_t execute_region_query(const AugmentedGrid& grid, const Dataset& store,
                              uint64_t region_offset, const Query& q,
                              ScanStats* stats = nullptr);

}  // namespace sgrid
