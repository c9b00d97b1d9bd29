#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgrid/dataset.hpp"
#include "sgrid/skew.hpp"
#include "sgrid/workload.hpp"

namespace sgrid {

// Space-partitioning decision tree node. Internal nodes split one dimension
// at k ascending values into k+1 children covering [lo,v1), [v1,v2), ...,
// [vk,hi) of the parent's range (left-closed); leaves own non-overlapping
// regions of data space.
struct GridTreeNode {
  std::vector<std::pair<uint64_t, uint64_t>> bounds;  // per-dim [lo, hi)
  uint64_t point_count = 0;
  uint64_t query_count = 0;

  // Internal
  uint32_t split_dim = 0;
  std::vector<uint64_t> split_values;
  std::vector<int> children;

  // Leaf
  int region_id = -1;

  bool is_leaf() const { return children.empty(); }
};

struct GridTree {
  std::vector<GridTreeNode> nodes;  // nodes[0] is the root
  std::vector<int> leaf_node_ids;   // region_id -> node index, DFS order
  int depth = 0;

  size_t regions() const { return leaf_node_ids.size(); }
  const GridTreeNode& leaf(int region_id) const { return nodes[leaf_node_ids[region_id]]; }
};

struct GridTreeBuild {
  GridTree tree;
  // Region r owns rows [region_offsets[r], region_offsets[r+1]) of row_perm;
  // row_perm[i] is the source row that lands at physical position i.
  std::vector<uint64_t> row_perm;
  std::vector<uint64_t> region_offsets;
};

// Greedy construction: restrict points and queries to each node's bounds,
// select the best skew-reducing split, recurse; stops on the skew and
// 1%-of-total thresholds and on max_depth.
GridTreeBuild build_grid_tree(const Dataset& ds, const Workload& w,
                              const SkewParams& params = {}, int max_depth = 12);

// All leaf regions whose bounds intersect the query's rectangle.
std::vector<int> intersecting_regions(const GridTree& tree, const Query& q);

// The unique leaf containing the point (split values are left-closed).
int region_of_point(const GridTree& tree, const std::vector<uint64_t>& point);

// JSON form: {split_dim, values, children} | {region_id, bounds}.
std::string tree_to_json(const GridTree& tree);

}  // namespace sgrid
