#pragma once

#include <cstdint>
#include <vector>

#include "sgrid/dataset.hpp"

namespace sgrid {

// Inclusive range filter on one dimension. Equality filters have lo == hi.
struct RangePredicate {
  uint32_t dim = 0;
  uint64_t lo = 0;
  uint64_t hi = 0;

  bool contains(uint64_t v) const { return v >= lo && v <= hi; }
  bool operator==(const RangePredicate&) const = default;
};

// Conjunction of per-dimension range predicates; the aggregation is COUNT.
// Predicates are kept sorted by dim with at most one predicate per dimension.
struct Query {
  std::vector<RangePredicate> predicates;
  int type_hint = -1;  // generator-assigned type id, -1 if unknown

  const RangePredicate* predicate_on(uint32_t dim) const {
    for (const auto& p : predicates)
      if (p.dim == dim) return &p;
    return nullptr;
  }
  bool filters(uint32_t dim) const { return predicate_on(dim) != nullptr; }

  void normalize();  // sort by dim, validate invariants
};

// A cluster of queries sharing a filtered-dimension set and similar
// selectivities. Types partition the workload.
struct QueryType {
  int type_id = 0;
  std::vector<uint32_t> filtered_dims;   // ascending
  std::vector<size_t> member_query_ids;  // indices into Workload::queries
};

struct Workload {
  std::vector<Query> queries;
  std::vector<QueryType> types;  // populated by cluster_query_types

  bool clustered() const { return !types.empty(); }
};

// Brute-force count of rows matching all predicates; the oracle every index
// is verified against.
uint64_t count_matching(const Dataset& ds, const Query& q);

// Per-filtered-dim selectivities of q in [0,1], estimated on `sample_rows`
// (row indices into ds). Entry order follows ascending dim.
std::vector<double> selectivity_embedding(const Query& q, const Dataset& ds,
                                          const std::vector<uint64_t>& sample_rows);

// Uniform row sample of min(cap, n) rows with a fixed per-build seed.
std::vector<uint64_t> sample_rows(uint64_t n, uint64_t cap, uint64_t seed);

// Groups queries by filtered-dimension set, then runs DBSCAN (eps=0.2,
// minPts=max(3, 1% of group size)) over selectivity embeddings within each
// group. Noise points form one extra type per group. Types partition the
// workload.
void cluster_query_types(Workload& w, const Dataset& ds, uint64_t seed = 7);

// Per-dim average selectivity over the queries filtering that dim (1.0 for
// unfiltered dims), sample-estimated.
std::vector<double> average_selectivities(const Workload& w, const Dataset& ds,
                                          uint64_t seed = 7);

}  // namespace sgrid
