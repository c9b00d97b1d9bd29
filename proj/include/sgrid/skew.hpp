#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "sgrid/dataset.hpp"
#include "sgrid/workload.hpp"

namespace sgrid {

// Bin layout for a query histogram over a code range [a, b): equal-width
// bins, or one bin per distinct value when the data has fewer distinct
// values in range than requested bins.
struct Binning {
  std::vector<uint64_t> boundaries;  // n_bins+1 ascending codes; bin j = [b_j, b_{j+1})
  bool unique_bins = false;

  size_t bins() const { return boundaries.empty() ? 0 : boundaries.size() - 1; }
  uint64_t lo() const { return boundaries.front(); }
  uint64_t hi() const { return boundaries.back(); }
  // Index of the bin containing `code` (clamped to the outer bins).
  size_t bin_of(uint64_t code) const;
};

// sorted_unique: distinct data values within [a,b) if there are fewer than
// n_bins of them, otherwise nullopt (forces equal-width bins).
Binning make_binning(uint64_t a, uint64_t b, size_t n_bins,
                     const std::optional<std::vector<uint64_t>>& sorted_unique);

// Approximate per-dimension query PDF: a query intersecting m contiguous
// bins contributes 1/m mass to each, so total mass equals the number of
// contributing queries. Queries not filtering `dim` count as full-range.
struct QueryHistogram {
  uint32_t dim = 0;
  Binning binning;
  std::vector<double> masses;

  double total_mass() const;
};

QueryHistogram build_histogram(const std::vector<Query>& queries, uint32_t dim,
                               const Binning& binning);

// Convenience form matching the data-driven binning rule: distinct values of
// `rows` in [a,b) decide between equal-width and unique-value bins.
QueryHistogram build_histogram(const std::vector<Query>& queries, uint32_t dim, uint64_t a,
                               uint64_t b, size_t n_bins, const Dataset& ds,
                               const std::vector<uint64_t>& rows);

// Earth Mover's Distance between two equal-mass vectors over the same bins,
// in bin units (adjacent bins are distance 1): sum |cumsum(p1 - p2)|, the
// closed form of 1-D optimal transport. Throws on unequal total mass.
double emd_1d(const std::vector<double>& p1, const std::vector<double>& p2);

// Skew of one mass vector over bins [x, y): EMD between the normalized
// restriction of `masses` (a probability distribution) and the uniform
// distribution, in bin units. Zero for y - x < 2 or zero mass.
double skew_over_bins(const std::vector<double>& masses, size_t x, size_t y);

// Per-type mass vectors over a shared binning; evaluates the summed skew of
// all types over any bin range. Types that do not filter the dimension are
// omitted by the caller (their PDF is uniform-equivalent, skew 0). Each
// type's empirical EMD is debiased by its expectation under the uniform
// null, so sampling noise from small types does not register as skew.
class SkewEvaluator {
 public:
  explicit SkewEvaluator(std::vector<std::vector<double>> type_masses);

  double skew(size_t x, size_t y) const;
  size_t bins() const { return bins_; }

 private:
  std::vector<std::vector<double>> masses_;
  std::vector<std::vector<double>> prefix_;
  size_t bins_ = 0;
};

// Balanced binary tree over histogram bins; each node stores the summed
// query skew of its bin range. A tool for split-value selection only.
struct SkewTreeNode {
  size_t bin_lo = 0, bin_hi = 0;  // [lo, hi) bins
  double skew = 0;
  double min_cover_skew = 0;  // annotation: minimum combined skew over the subtree
  int left = -1, right = -1;

  bool is_leaf() const { return left < 0; }
};

struct SkewTree {
  std::vector<SkewTreeNode> nodes;  // nodes[0] is the root when non-empty
};

// Leaves cover 2 bins for equal-width binnings and 1 bin per unique value.
SkewTree build_skew_tree(const SkewEvaluator& eval, bool unique_bins);

// A covering set: nodes whose bin ranges disjointly tile the domain.
struct CoverRange {
  size_t bin_lo = 0, bin_hi = 0;
  double skew = 0;
};

// Two-pass dynamic program: annotates min(node skew, sum of child
// annotations) from the leaves up, then selects from the root down the
// shallowest nodes whose skew equals their annotation. Returns the selected
// node indices in bin order.
std::vector<int> optimal_covering_set(SkewTree& tree);

std::vector<CoverRange> cover_ranges(const SkewTree& tree, const std::vector<int>& node_ids);

// Single ordered pass: adjacent ranges merge while the combined skew is at
// most `factor` times the sum of their individual skews (1e-9 relative
// slack). skew_fn evaluates the combined range.
std::vector<CoverRange> merge_covering_nodes(const std::vector<CoverRange>& cover,
                                             const std::function<double(size_t, size_t)>& skew_fn,
                                             double factor = 1.1);

// Split values = internal boundaries between adjacent cover ranges.
std::vector<uint64_t> split_values(const Binning& binning, const std::vector<CoverRange>& cover);

struct SplitChoice {
  uint32_t split_dim = 0;
  std::vector<uint64_t> values;  // ascending, strictly inside the node range
  double reduction = 0;          // Rmax of the chosen dimension
};

struct SkewParams {
  size_t n_bins = 128;
  double merge_factor = 1.1;
  double min_reduction_frac = 0.05;  // of the node's query count
  double min_node_frac = 0.01;       // of total points / queries
};

struct SplitInputs {
  const Dataset& ds;
  const std::vector<uint64_t>& rows;  // node's point rows
  const std::vector<std::pair<uint64_t, uint64_t>>& bounds;  // per-dim [lo, hi)
  // Node-intersecting queries grouped by type; parallel to type_filters_dim.
  const std::vector<std::vector<Query>>& type_queries;
  uint64_t total_points = 0;
  uint64_t total_queries = 0;
};

// Greedy split selection: per dimension, largest skew reduction achievable
// by the merged optimal cover; returns the argmax dimension, or nullopt when
// the node is below the point/query thresholds or no dimension reaches the
// minimum reduction.
std::optional<SplitChoice> select_split(const SplitInputs& in, const SkewParams& params = {});

}  // namespace sgrid
