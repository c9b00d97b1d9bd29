#include "sgrid/skew.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace sgrid {

size_t Binning::bin_of(uint64_t code) const {
  if (code < boundaries.front()) return 0;
  auto it = std::upper_bound(boundaries.begin(), boundaries.end(), code);
  size_t idx = static_cast<size_t>(it - boundaries.begin());
  if (idx == 0) return 0;
  return std::min(idx - 1, bins() - 1);
}

Binning make_binning(uint64_t a, uint64_t b, size_t n_bins,
                     const std::optional<std::vector<uint64_t>>& sorted_unique) {
  if (a >= b) throw InputError("make_binning: empty range");
  Binning bn;
  if (sorted_unique.has_value() && !sorted_unique->empty() &&
      sorted_unique->size() < n_bins) {
    // One bin per distinct value: bin j owns the j-th value. The first bin
    // starts at `a` so the bins still tile [a, b).
    const auto& u = *sorted_unique;
    bn.unique_bins = true;
    bn.boundaries.reserve(u.size() + 1);
    bn.boundaries.push_back(a);
    for (size_t i = 1; i < u.size(); ++i) bn.boundaries.push_back(u[i]);
    bn.boundaries.push_back(b);
  } else {
    uint64_t width = b - a;
    size_t k = std::min<uint64_t>(n_bins, width);
    bn.boundaries.reserve(k + 1);
    for (size_t j = 0; j <= k; ++j)
      bn.boundaries.push_back(a + static_cast<uint64_t>((static_cast<__uint128_t>(width) * j) / k));
  }
  return bn;
}

double QueryHistogram::total_mass() const {
  double s = 0;
  for (double m : masses) s += m;
  return s;
}

QueryHistogram build_histogram(const std::vector<Query>& queries, uint32_t dim,
                               const Binning& binning) {
  if (binning.bins() == 0) throw InputError("build_histogram: empty binning");
  QueryHistogram h;
  h.dim = dim;
  h.binning = binning;
  h.masses.assign(binning.bins(), 0.0);
  const uint64_t a = binning.lo();
  const uint64_t b = binning.hi();
  for (const auto& q : queries) {
    uint64_t lo = a, hi = b - 1;
    if (const RangePredicate* p = q.predicate_on(dim)) {
      lo = std::max(lo, p->lo);
      hi = std::min(hi, p->hi);
      if (lo > hi) continue;  // does not intersect the range
    }
    size_t bl = binning.bin_of(lo);
    size_t bh = binning.bin_of(hi);
    double share = 1.0 / static_cast<double>(bh - bl + 1);
    for (size_t j = bl; j <= bh; ++j) h.masses[j] += share;
  }
  return h;
}

QueryHistogram build_histogram(const std::vector<Query>& queries, uint32_t dim, uint64_t a,
                               uint64_t b, size_t n_bins, const Dataset& ds,
                               const std::vector<uint64_t>& rows) {
  std::optional<std::vector<uint64_t>> uniq;
  std::unordered_set<uint64_t> seen;
  const auto& col = ds.columns[dim];
  bool overflow = false;
  for (uint64_t r : rows) {
    uint64_t v = col[r];
    if (v < a || v >= b) continue;
    seen.insert(v);
    if (seen.size() >= n_bins) {
      overflow = true;
      break;
    }
  }
  if (!overflow && !seen.empty()) {
    uniq = std::vector<uint64_t>(seen.begin(), seen.end());
    std::sort(uniq->begin(), uniq->end());
  }
  return build_histogram(queries, dim, make_binning(a, b, n_bins, uniq));
}

double emd_1d(const std::vector<double>& p1, const std::vector<double>& p2) {
  if (p1.size() != p2.size()) throw InputError("emd_1d: vectors differ in length");
  double t1 = 0, t2 = 0;
  for (double v : p1) t1 += v;
  for (double v : p2) t2 += v;
  double scale = std::max({std::abs(t1), std::abs(t2), 1.0});
  if (std::abs(t1 - t2) > 1e-9 * scale) throw InputError("emd_1d: unequal total mass");
  double cum = 0, dist = 0;
  for (size_t j = 0; j < p1.size(); ++j) {
    cum += p1[j] - p2[j];
    dist += std::abs(cum);
  }
  return dist;
}

double skew_over_bins(const std::vector<double>& masses, size_t x, size_t y) {
  if (y > masses.size() || x >= y) throw InputError("skew_over_bins: bad bin range");
  if (y - x < 2) return 0.0;  // a single bin cannot exhibit skew
  double total = 0;
  for (size_t j = x; j < y; ++j) total += masses[j];
  if (total <= 0) return 0.0;
  // EMD between probability distributions: the PDF is normalized to unit
  // mass so skew stays in bin units regardless of how many queries
  // contribute. Mass-scaled EMD would grow like a random walk with range
  // length and drown real skew in sampling noise.
  double uni = 1.0 / static_cast<double>(y - x);
  double cum = 0, dist = 0;
  for (size_t j = x; j < y; ++j) {
    cum += masses[j] / total - uni;
    dist += std::abs(cum);
  }
  return dist;
}

SkewEvaluator::SkewEvaluator(std::vector<std::vector<double>> type_masses)
    : masses_(std::move(type_masses)) {
  if (!masses_.empty()) bins_ = masses_[0].size();
  prefix_.reserve(masses_.size());
  for (const auto& m : masses_) {
    if (m.size() != bins_) throw InputError("SkewEvaluator: mass vectors differ in length");
    std::vector<double> pre(bins_ + 1, 0.0);
    for (size_t j = 0; j < bins_; ++j) pre[j + 1] = pre[j] + m[j];
    prefix_.push_back(std::move(pre));
  }
}

double SkewEvaluator::skew(size_t x, size_t y) const {
  if (y > bins_ || x >= y) throw InputError("SkewEvaluator: bad bin range");
  if (y - x < 2) return 0.0;
  const double len = static_cast<double>(y - x);
  double total_skew = 0;
  for (size_t t = 0; t < masses_.size(); ++t) {
    double total = prefix_[t][y] - prefix_[t][x];
    if (total <= 0) continue;
    double uni = 1.0 / len;
    double cum = 0, dist = 0, null_bias = 0;
    const auto& m = masses_[t];
    for (size_t j = x; j < y; ++j) {
      cum += m[j] / total - uni;
      dist += std::abs(cum);
      double p = static_cast<double>(j - x + 1) / len;
      null_bias += std::sqrt(p * (1.0 - p));
    }
    // The empirical EMD of even a perfectly uniform query type is positive:
    // M queries yield a binomial bridge with E sum|dev| = sqrt(2/pi)/sqrt(M)
    // * sum sqrt(p(1-p)). Subtract that expectation so uniform types read as
    // zero and only real structure drives splits.
    null_bias *= std::sqrt(2.0 / 3.14159265358979323846) / std::sqrt(total);
    total_skew += std::max(0.0, dist - null_bias);
  }
  return total_skew;
}

namespace {

int build_subtree(const SkewEvaluator& eval, const std::vector<std::pair<size_t, size_t>>& leaves,
                  size_t leaf_lo, size_t leaf_hi, SkewTree& tree) {
  SkewTreeNode node;
  node.bin_lo = leaves[leaf_lo].first;
  node.bin_hi = leaves[leaf_hi - 1].second;
  node.skew = eval.skew(node.bin_lo, node.bin_hi);
  int id = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back(node);
  if (leaf_hi - leaf_lo > 1) {
    size_t mid = leaf_lo + (leaf_hi - leaf_lo) / 2;
    int l = build_subtree(eval, leaves, leaf_lo, mid, tree);
    int r = build_subtree(eval, leaves, mid, leaf_hi, tree);
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
  }
  return id;
}

double annotate(SkewTree& tree, int id) {
  auto& node = tree.nodes[id];
  if (node.is_leaf()) {
    node.min_cover_skew = node.skew;
    return node.skew;
  }
  double children = annotate(tree, node.left) + annotate(tree, node.right);
  node.min_cover_skew = std::min(node.skew, children);
  return node.min_cover_skew;
}

void extract(const SkewTree& tree, int id, std::vector<int>& out) {
  const auto& node = tree.nodes[id];
  // Prefer the shallowest node when the skew ties with its subtree cover.
  if (node.skew == node.min_cover_skew) {
    out.push_back(id);
    return;
  }
  extract(tree, node.left, out);
  extract(tree, node.right, out);
}

}  // namespace

SkewTree build_skew_tree(const SkewEvaluator& eval, bool unique_bins) {
  SkewTree tree;
  size_t n = eval.bins();
  if (n == 0) return tree;
  std::vector<std::pair<size_t, size_t>> leaves;
  if (unique_bins) {
    for (size_t j = 0; j < n; ++j) leaves.emplace_back(j, j + 1);
  } else {
    for (size_t j = 0; j < n; j += 2) leaves.emplace_back(j, std::min(j + 2, n));
  }
  tree.nodes.reserve(2 * leaves.size());
  build_subtree(eval, leaves, 0, leaves.size(), tree);
  return tree;
}

std::vector<int> optimal_covering_set(SkewTree& tree) {
  std::vector<int> out;
  if (tree.nodes.empty()) return out;
  annotate(tree, 0);
  extract(tree, 0, out);
  std::sort(out.begin(), out.end(), [&](int a, int b) {
    return tree.nodes[a].bin_lo < tree.nodes[b].bin_lo;
  });
  return out;
}

std::vector<CoverRange> cover_ranges(const SkewTree& tree, const std::vector<int>& node_ids) {
  std::vector<CoverRange> out;
  out.reserve(node_ids.size());
  for (int id : node_ids) {
    const auto& n = tree.nodes[id];
    out.push_back({n.bin_lo, n.bin_hi, n.skew});
  }
  return out;
}

std::vector<CoverRange> merge_covering_nodes(const std::vector<CoverRange>& cover,
                                             const std::function<double(size_t, size_t)>& skew_fn,
                                             double factor) {
  std::vector<CoverRange> out;
  for (const auto& r : cover) {
    if (out.empty()) {
      out.push_back(r);
      continue;
    }
    auto& cur = out.back();
    double combined = skew_fn(cur.bin_lo, r.bin_hi);
    double budget = factor * (cur.skew + r.skew);
    if (combined <= budget + 1e-9 * std::max(1.0, budget)) {
      cur.bin_hi = r.bin_hi;
      cur.skew = combined;
    } else {
      out.push_back(r);
    }
  }
  return out;
}

std::vector<uint64_t> split_values(const Binning& binning, const std::vector<CoverRange>& cover) {
  std::vector<uint64_t> v;
  for (size_t i = 1; i < cover.size(); ++i) v.push_back(binning.boundaries[cover[i].bin_lo]);
  return v;
}

std::optional<SplitChoice> select_split(const SplitInputs& in, const SkewParams& params) {
  uint64_t node_queries = 0;
  for (const auto& tq : in.type_queries) node_queries += tq.size();
  if (static_cast<double>(in.rows.size()) < params.min_node_frac * in.total_points) return std::nullopt;
  if (static_cast<double>(node_queries) < params.min_node_frac * in.total_queries) return std::nullopt;
  if (node_queries == 0) return std::nullopt;

  std::optional<SplitChoice> best;
  for (uint32_t dim = 0; dim < in.ds.d; ++dim) {
    auto [a, b] = in.bounds[dim];
    if (b - a < 2) continue;

    // Types whose queries don't filter this dimension have uniform PDFs and
    // contribute zero skew; skip them.
    std::vector<const std::vector<Query>*> filtering;
    for (const auto& tq : in.type_queries) {
      if (!tq.empty() && tq.front().filters(dim)) filtering.push_back(&tq);
    }
    if (filtering.empty()) continue;

    std::optional<std::vector<uint64_t>> uniq;
    {
      std::unordered_set<uint64_t> seen;
      bool overflow = false;
      const auto& col = in.ds.columns[dim];
      for (uint64_t r : in.rows) {
        uint64_t v = col[r];
        if (v < a || v >= b) continue;
        seen.insert(v);
        if (seen.size() >= params.n_bins) {
          overflow = true;
          break;
        }
      }
      if (!overflow && !seen.empty()) {
        uniq = std::vector<uint64_t>(seen.begin(), seen.end());
        std::sort(uniq->begin(), uniq->end());
      }
    }
    Binning binning = make_binning(a, b, params.n_bins, uniq);
    if (binning.bins() < 2) continue;

    std::vector<std::vector<double>> type_masses;
    type_masses.reserve(filtering.size());
    for (const auto* tq : filtering)
      type_masses.push_back(build_histogram(*tq, dim, binning).masses);
    SkewEvaluator eval(std::move(type_masses));

    SkewTree tree = build_skew_tree(eval, binning.unique_bins);
    auto cover = cover_ranges(tree, optimal_covering_set(tree));
    auto merged = merge_covering_nodes(
        cover, [&](size_t x, size_t y) { return eval.skew(x, y); }, params.merge_factor);

    double full = eval.skew(0, eval.bins());
    double subs = 0;
    for (const auto& r : merged) subs += r.skew;
    double reduction = full - subs;

    auto values = split_values(binning, merged);
    if (values.empty()) continue;
    if (!best || reduction > best->reduction) {
      best = SplitChoice{dim, std::move(values), reduction};
    }
  }

  if (!best) return std::nullopt;
  if (best->reduction < params.min_reduction_frac * static_cast<double>(node_queries))
    return std::nullopt;
  return best;
}

}  // namespace sgrid
