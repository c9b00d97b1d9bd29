#include "sgrid/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include <nlohmann/json.hpp>

namespace sgrid {

BaselineKind baseline_kind_from_name(const std::string& name) {
  if (name == "fullscan") return BaselineKind::FullScan;
  if (name == "clustered") return BaselineKind::ClusteredSingle;
  if (name == "kdtree") return BaselineKind::KdTree;
  if (name == "flood") return BaselineKind::Flood;
  throw ConfigError("unknown baseline kind '" + name + "'");
}

std::string baseline_kind_name(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::FullScan: return "fullscan";
    case BaselineKind::ClusteredSingle: return "clustered";
    case BaselineKind::KdTree: return "kdtree";
    case BaselineKind::Flood: return "flood";
  }
  return "?";
}

namespace {

struct KdBuilder {
  const Dataset& ds;
  uint64_t page_size;
  std::vector<uint32_t> dim_order;  // round-robin rotation, most selective first
  std::vector<uint64_t> rows;
  std::vector<KdTreeNode> nodes;

  int build(uint64_t begin, uint64_t end, int depth) {
    int id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    if (end - begin <= page_size) {
      nodes[id].begin = begin;
      nodes[id].end = end;
      return id;
    }
    // Median split; rows equal to the median value stay in the lower half.
    for (size_t attempt = 0; attempt < dim_order.size(); ++attempt) {
      uint32_t dim = dim_order[(depth + attempt) % dim_order.size()];
      const auto& col = ds.columns[dim];
      uint64_t k = (end - begin - 1) / 2;
      std::nth_element(rows.begin() + begin, rows.begin() + begin + k, rows.begin() + end,
                       [&](uint64_t a, uint64_t b) { return col[a] < col[b]; });
      uint64_t median = col[rows[begin + k]];
      auto mid_it = std::partition(rows.begin() + begin, rows.begin() + end,
                                   [&](uint64_t r) { return col[r] <= median; });
      uint64_t mid = static_cast<uint64_t>(mid_it - rows.begin());
      if (mid == begin || mid == end) continue;  // all values equal; try next dim
      nodes[id].dim = dim;
      nodes[id].split = median + 1;  // left: value < split
      int l = build(begin, mid, depth + 1);
      int r = build(mid, end, depth + 1);
      nodes[id].left = l;
      nodes[id].right = r;
      return id;
    }
    nodes[id].begin = begin;  // no dimension can split this span
    nodes[id].end = end;
    return id;
  }
};

void kd_collect(const std::vector<KdTreeNode>& nodes, int id,
                std::vector<std::pair<uint64_t, uint64_t>>& bounds, const Query& q,
                std::vector<PhysicalRange>& out) {
  const auto& node = nodes[id];
  if (node.is_leaf()) {
    bool exact = true;
    for (const auto& p : q.predicates) {
      auto [lo, hi] = bounds[p.dim];
      if (!(p.lo <= lo && hi - 1 <= p.hi)) {
        exact = false;
        break;
      }
    }
    out.push_back({node.begin, node.end, exact});
    return;
  }
  const RangePredicate* p = nullptr;
  for (const auto& pred : q.predicates)
    if (pred.dim == node.dim) p = &pred;
  auto saved = bounds[node.dim];
  if (!p || p->lo < node.split) {
    bounds[node.dim] = {saved.first, node.split};
    kd_collect(nodes, node.left, bounds, q, out);
    bounds[node.dim] = saved;
  }
  if (!p || p->hi >= node.split) {
    bounds[node.dim] = {node.split, saved.second};
    kd_collect(nodes, node.right, bounds, q, out);
    bounds[node.dim] = saved;
  }
}

}  // namespace

BaselineIndex BaselineIndex::build(BaselineKind kind, const Dataset& ds, const Workload& w,
                                   const BaselineTuning& tuning, const CostWeights& weights,
                                   uint64_t cell_budget, uint64_t seed) {
  auto t0 = std::chrono::steady_clock::now();
  BaselineIndex idx;
  idx.kind_ = kind;
  switch (kind) {
    case BaselineKind::FullScan: {
      idx.store_ = ds;
      idx.index_bytes_ = 0;
      break;
    }
    case BaselineKind::ClusteredSingle: {
      uint32_t dim = 0;
      if (tuning.sort_dim >= 0) {
        dim = static_cast<uint32_t>(tuning.sort_dim);
        if (dim >= ds.d) throw ConfigError("sort dim out of range");
      } else {
        auto sel = average_selectivities(w, ds, seed);
        double best = 2.0;
        for (uint32_t i = 0; i < ds.d; ++i) {
          if (sel[i] < best) {
            best = sel[i];
            dim = i;
          }
        }
      }
      idx.sort_dim_ = dim;
      std::vector<uint64_t> perm(ds.n);
      std::iota(perm.begin(), perm.end(), 0);
      const auto& col = ds.columns[dim];
      std::stable_sort(perm.begin(), perm.end(),
                       [&](uint64_t a, uint64_t b) { return col[a] < col[b]; });
      idx.store_ = reorder(ds, perm);
      idx.index_bytes_ = 8;  // the sort dimension
      break;
    }
    case BaselineKind::KdTree: {
      if (tuning.page_size < 1) throw ConfigError("page_size must be >= 1");
      auto sel = average_selectivities(w, ds, seed);
      std::vector<uint32_t> order(ds.d);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](uint32_t a, uint32_t b) { return sel[a] < sel[b]; });
      KdBuilder b{ds, tuning.page_size, std::move(order), {}, {}};
      b.rows.resize(ds.n);
      std::iota(b.rows.begin(), b.rows.end(), 0);
      b.build(0, ds.n, 0);
      idx.kd_nodes_ = std::move(b.nodes);
      idx.store_ = reorder(ds, b.rows);
      idx.root_bounds_.clear();
      for (uint32_t i = 0; i < ds.d; ++i) idx.root_bounds_.emplace_back(0, ds.domains[i]);
      idx.index_bytes_ = idx.kd_nodes_.size() * sizeof(KdTreeNode);
      break;
    }
    case BaselineKind::Flood: {
      std::vector<uint64_t> rows(ds.n);
      std::iota(rows.begin(), rows.end(), 0);
      Skeleton s;
      s.dims.assign(ds.d, {Strategy::Independent, 0});
      OptimizerEnv env(ds, rows, w.queries, weights, cell_budget, seed);
      OptResult opt = gd_fixed_skeleton(env, s);
      idx.trace_ = std::move(opt.trace);
      auto built = build_grid(ds, std::move(rows), opt.config.skeleton, opt.config.parts);
      idx.grid_ = std::move(built.grid);
      idx.store_ = reorder(ds, built.rows);
      idx.index_bytes_ = idx.grid_->lookup_table_bytes();
      break;
    }
  }
  idx.build_seconds_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return idx;
}

uint64_t BaselineIndex::query(const Query& q, ScanStats* stats) const {
  switch (kind_) {
    case BaselineKind::FullScan: {
      std::vector<PhysicalRange> full{{0, store_.n, false}};
      return scan_count(store_, full, q.predicates, stats);
    }
    case BaselineKind::ClusteredSingle: {
      const RangePredicate* p = q.predicate_on(sort_dim_);
      if (!p) {
        std::vector<PhysicalRange> full{{0, store_.n, false}};
        return scan_count(store_, full, q.predicates, stats);
      }
      const auto& col = store_.columns[sort_dim_];
      uint64_t lo = std::lower_bound(col.begin(), col.end(), p->lo) - col.begin();
      uint64_t hi = std::upper_bound(col.begin(), col.end(), p->hi) - col.begin();
      bool exact = q.predicates.size() == 1;
      std::vector<PhysicalRange> ranges{{lo, hi, exact}};
      return scan_count(store_, ranges, q.predicates, stats);
    }
    case BaselineKind::KdTree: {
      std::vector<PhysicalRange> ranges;
      auto bounds = root_bounds_;
      kd_collect(kd_nodes_, 0, bounds, q, ranges);
      return scan_count(store_, ranges, q.predicates, stats);
    }
    case BaselineKind::Flood:
      return execute_region_query(*grid_, store_, 0, q, stats);
  }
  return 0;
}

std::string BaselineIndex::stats_json() const {
  nlohmann::json j{{"kind", baseline_kind_name(kind_)},
                   {"index_bytes", index_bytes_},
                   {"build_seconds", build_seconds_}};
  if (kind_ == BaselineKind::KdTree) j["nodes"] = kd_nodes_.size();
  if (kind_ == BaselineKind::ClusteredSingle) j["sort_dim"] = sort_dim_;
  if (grid_) {
    j["cells"] = grid_->cells();
    j["skeleton"] = grid_->skeleton.label();
  }
  return j.dump();
}

}  // namespace sgrid
