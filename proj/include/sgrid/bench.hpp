#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgrid/baselines.hpp"
#include "sgrid/dataset.hpp"
#include "sgrid/index.hpp"
#include "sgrid/workload.hpp"

namespace sgrid {

// An index returned counts that disagree with the full-scan oracle.
class VerificationError : public std::runtime_error {
 public:
  VerificationError(std::string index_name, size_t query_id, uint64_t expected, uint64_t got)
      : std::runtime_error("verification failed: index '" + index_name + "' query " +
                           std::to_string(query_id) + " expected " + std::to_string(expected) +
                           " got " + std::to_string(got)),
        index_name(std::move(index_name)),
        query_id(query_id),
        expected(expected),
        got(got) {}

  std::string index_name;
  size_t query_id;
  uint64_t expected;
  uint64_t got;
};

struct BenchOptions {
  uint64_t seed = 11;
  CostWeights weights;
  bool calibrate = false;  // measure w0/w1 on a pilot grid before optimizing
  uint64_t cell_budget = 0;
  bool page_size_sweep = false;  // sweep kd-tree page sizes 2^7..2^17
  uint64_t page_size = 4096;
  int warmup_passes = 1;
  int timed_passes = 3;
  bool inject_fault = false;  // testing aid: break a lookup table after build
  uint64_t dataset_hash = 0;
  uint64_t workload_hash = 0;
};

struct TimingSummary {
  double avg_seconds = 0;  // median over passes of the per-pass mean
  double p50_seconds = 0;
  double p99_seconds = 0;
  double queries_per_sec = 0;
};

// Brute-force oracle counts for every workload query.
std::vector<uint64_t> oracle_counts(const Dataset& ds, const Workload& w);

// Median w0/w1 calibration on a pilot grid over a dataset sample.
CostWeights calibrate_on_sample(const Dataset& ds, const Workload& w, uint64_t seed);

// Builds each requested index (names: tsunami, flood, kdtree, clustered,
// fullscan), verifies every workload count against the oracle, then runs
// warmup + timed passes. Throws VerificationError on the first mismatch; no
// timing is ever reported for an unverified index.
nlohmann::json run_bench(const Dataset& ds, const Workload& w,
                         const std::vector<std::string>& index_names, const BenchOptions& opts);

// Benches workload A, replays workload B on the stale index, rebuilds for B,
// and benches B again; reports degraded vs restored throughput and the
// rebuild split into optimize/sort seconds.
nlohmann::json run_shift(const Dataset& ds, const Workload& a, const Workload& b,
                         const BenchOptions& opts);

// Component lesion (tsunami, gridtree-only, aggrid-only, flood) and optimizer
// comparison (agd, gd, agd-ni, hillclimb) including predicted-vs-actual cost
// error per optimizer-chosen config.
nlohmann::json run_ablate(const Dataset& ds, const Workload& w, const BenchOptions& opts);

}  // namespace sgrid
