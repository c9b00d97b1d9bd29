#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sgrid/dataset.hpp"
#include "sgrid/workload.hpp"

namespace sgrid {

// Per-dimension source for synthetic data: either uniform integer codes in
// [lo, hi), or linearly correlated to a base dimension with bounded noise
// (|value - (slope*base + intercept)| <= noise_pct * base domain width).
struct DimSpec {
  enum class Kind { Uniform, Correlated } kind = Kind::Uniform;
  uint64_t lo = 0, hi = 1;            // Uniform
  uint32_t base_dim = 0;              // Correlated
  double slope = 1.0, intercept = 0.0, noise_pct = 0.0;
};

struct DataGenSpec {
  uint64_t n = 0;
  std::vector<DimSpec> dims;

  static DataGenSpec from_json_file(const std::string& path);
  static DataGenSpec from_json_text(const std::string& text);
  std::string to_json_text() const;
};

// Center placement for a predicate: quantile-rank band the predicate window
// is centered in. The default [0,1] band gives uniform centers; a narrow
// band concentrates queries and induces workload skew.
struct PredicateSpec {
  uint32_t dim = 0;
  double selectivity = 0.1;  // target fraction of points matched on this dim
  double center_lo = 0.0, center_hi = 1.0;
};

struct TypeSpec {
  uint64_t count = 0;
  std::vector<PredicateSpec> predicates;
};

struct WorkloadGenSpec {
  std::vector<TypeSpec> types;

  static WorkloadGenSpec from_json_file(const std::string& path);
  static WorkloadGenSpec from_json_text(const std::string& text);
  std::string to_json_text() const;
};

// Deterministic for a fixed (spec, seed). Throws ConfigError on cyclic
// correlation specs or empty dimensions.
Dataset generate_synthetic(const DataGenSpec& spec, uint64_t seed);

// Predicate widths are derived from target selectivity against the dataset's
// per-dimension quantiles; deterministic for a fixed (spec, seed). Queries
// carry their generating type as type_hint.
Workload generate_workload(const WorkloadGenSpec& spec, const Dataset& ds, uint64_t seed);

}  // namespace sgrid
