#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "sgrid/augmented_grid.hpp"
#include "sgrid/column_store.hpp"
#include "sgrid/dataset.hpp"
#include "sgrid/grid_tree.hpp"
#include "sgrid/optimizer.hpp"
#include "sgrid/workload.hpp"

namespace sgrid {

enum class OptimizerMode {
  Agd,          // heuristic init, joint (S, P) search
  GdOnly,       // heuristic init, partitions only
  AgdNaiveInit, // all-independent init, joint search
  HillClimb,    // seeded random-restart hill climber
  NaiveGd,      // all-independent skeleton frozen (a per-region Flood grid)
};

struct IndexBuildOptions {
  CostWeights weights;
  uint64_t cell_budget = 0;  // 0: auto per region (points / 200, clamped)
  SkewParams skew;
  int max_tree_depth = 12;   // 0 degenerates to a single grid over the space
  size_t k_knots = 256;
  uint64_t seed = 11;
  OptimizerMode optimizer = OptimizerMode::Agd;
};

struct IndexStats {
  uint64_t tree_nodes = 0;
  uint64_t tree_depth = 0;
  uint64_t leaf_regions = 0;
  uint64_t indexed_regions = 0;
  uint64_t min_points = 0, median_points = 0, max_points = 0;
  double avg_mappings = 0;      // functional mappings per region
  double avg_conditionals = 0;  // conditional CDFs per region
  uint64_t total_cells = 0;
  uint64_t index_bytes = 0;  // tree JSON bytes + lookup table bytes
  double build_seconds = 0;
  double optimize_seconds = 0;
  double sort_seconds = 0;

  std::string to_json() const;
};

// The end-to-end index: a skew-reducing region tree over the data space with
// one workload-optimized grid per queried region, laid out over a single
// reordered column store. Immutable after build; concurrent reads are safe.
class RegionGridIndex {
 public:
  struct Region {
    uint64_t offset = 0;  // global row offset of the region's rows
    uint64_t count = 0;
    std::optional<AugmentedGrid> grid;  // absent: region is scanned fully
    OptTrace trace;
  };

  static RegionGridIndex build(const Dataset& dataset, const Workload& workload,
                               const IndexBuildOptions& opts = {});

  uint64_t query(const Query& q, ScanStats* stats = nullptr) const;

  // Full re-optimization against the already-reordered store; `this` stays
  // queryable until the caller swaps the handles.
  RegionGridIndex rebuild(const Workload& new_workload, const IndexBuildOptions& opts = {}) const;

  const Dataset& store() const { return store_; }
  const GridTree& tree() const { return tree_; }
  const std::vector<Region>& regions() const { return regions_; }
  const IndexStats& stats() const { return stats_; }
  const std::string& tree_json() const { return tree_json_; }
  std::string traces_jsonl() const;

  // Testing aid: damages one grid's lookup table so oracle verification must
  // catch the resulting wrong counts.
  void corrupt_lookup_table_for_testing();

 private:
  Dataset store_;
  GridTree tree_;
  std::vector<Region> regions_;
  std::string tree_json_;
  IndexStats stats_;
};

// Swappable handle so a rebuild can publish atomically while readers keep
// using the previous version.
class IndexHandle {
 public:
  explicit IndexHandle(std::shared_ptr<const RegionGridIndex> idx = nullptr)
      : idx_(std::move(idx)) {}

  std::shared_ptr<const RegionGridIndex> current() const {
    std::lock_guard<std::mutex> lock(m_);
    return idx_;
  }
  void swap(std::shared_ptr<const RegionGridIndex> next) {
    std::lock_guard<std::mutex> lock(m_);
    idx_ = std::move(next);
  }

 private:
  mutable std::mutex m_;
  std::shared_ptr<const RegionGridIndex> idx_;
};

}  // namespace sgrid
