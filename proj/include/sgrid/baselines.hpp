#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sgrid/augmented_grid.hpp"
#include "sgrid/column_store.hpp"
#include "sgrid/dataset.hpp"
#include "sgrid/optimizer.hpp"
#include "sgrid/workload.hpp"

namespace sgrid {

enum class BaselineKind { FullScan, ClusteredSingle, KdTree, Flood };

BaselineKind baseline_kind_from_name(const std::string& name);  // throws ConfigError
std::string baseline_kind_name(BaselineKind kind);

struct BaselineTuning {
  uint64_t page_size = 4096;  // tree kinds
  int sort_dim = -1;          // ClusteredSingle; -1 picks the most selective dim
};

struct KdTreeNode {
  uint32_t dim = 0;
  uint64_t split = 0;  // left child holds values < split
  int left = -1, right = -1;
  uint64_t begin = 0, end = 0;  // leaf row span

  bool is_leaf() const { return left < 0; }
};

// Reference indexes sharing the column store and its scan optimizations.
// Each baseline owns its own reordered copy of the dataset.
class BaselineIndex {
 public:
  static BaselineIndex build(BaselineKind kind, const Dataset& ds, const Workload& w,
                             const BaselineTuning& tuning = {},
                             const CostWeights& weights = {}, uint64_t cell_budget = 0,
                             uint64_t seed = 11);

  uint64_t query(const Query& q, ScanStats* stats = nullptr) const;

  BaselineKind kind() const { return kind_; }
  const Dataset& store() const { return store_; }
  uint64_t index_bytes() const { return index_bytes_; }
  double build_seconds() const { return build_seconds_; }
  const std::vector<KdTreeNode>& kd_nodes() const { return kd_nodes_; }
  const std::optional<AugmentedGrid>& grid() const { return grid_; }
  const OptTrace& trace() const { return trace_; }
  std::string stats_json() const;

 private:
  BaselineKind kind_ = BaselineKind::FullScan;
  Dataset store_;
  uint64_t index_bytes_ = 0;
  double build_seconds_ = 0;

  // ClusteredSingle
  uint32_t sort_dim_ = 0;

  // KdTree
  std::vector<KdTreeNode> kd_nodes_;
  std::vector<std::pair<uint64_t, uint64_t>> root_bounds_;

  // Flood
  std::optional<AugmentedGrid> grid_;
  OptTrace trace_;
};

}  // namespace sgrid
