#include "sgrid/grid_tree.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

namespace sgrid {

namespace {

bool intersects(const Query& q, const std::vector<std::pair<uint64_t, uint64_t>>& bounds) {
  for (const auto& p : q.predicates) {
    auto [lo, hi] = bounds[p.dim];
    if (p.hi < lo || p.lo >= hi) return false;
  }
  return true;
}

struct Builder {
  const Dataset& ds;
  const SkewParams& params;
  int max_depth;
  uint64_t total_points;
  uint64_t total_queries;
  GridTree tree;
  std::vector<uint64_t> rows;  // permuted in place; leaves own contiguous spans
  std::vector<std::pair<uint64_t, uint64_t>> leaf_spans;  // by region id

  int build(std::vector<std::pair<uint64_t, uint64_t>> bounds, uint64_t begin, uint64_t end,
            const std::vector<std::vector<Query>>& type_queries, int depth) {
    int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[id].bounds = bounds;
    tree.nodes[id].point_count = end - begin;
    uint64_t qcount = 0;
    for (const auto& tq : type_queries) qcount += tq.size();
    tree.nodes[id].query_count = qcount;
    tree.depth = std::max(tree.depth, depth);

    std::optional<SplitChoice> choice;
    if (depth < max_depth) {
      std::vector<uint64_t> node_rows(rows.begin() + begin, rows.begin() + end);
      SplitInputs in{ds, node_rows, bounds, type_queries, total_points, total_queries};
      choice = select_split(in, params);
    }
    if (!choice) {
      int region = static_cast<int>(tree.leaf_node_ids.size());
      tree.nodes[id].region_id = region;
      tree.leaf_node_ids.push_back(id);
      leaf_spans.emplace_back(begin, end);
      return id;
    }

    const uint32_t dim = choice->split_dim;
    const auto& values = choice->values;
    const size_t k = values.size();

    // Stable bucket partition of the node's rows by split interval.
    std::vector<uint64_t> tmp(rows.begin() + begin, rows.begin() + end);
    std::vector<uint64_t> counts(k + 1, 0);
    const auto& col = ds.columns[dim];
    auto bucket_of = [&](uint64_t v) {
      return static_cast<size_t>(std::upper_bound(values.begin(), values.end(), v) -
                                 values.begin());
    };
    for (uint64_t r : tmp) counts[bucket_of(col[r])]++;
    std::vector<uint64_t> offsets(k + 2, 0);
    for (size_t i = 0; i <= k; ++i) offsets[i + 1] = offsets[i] + counts[i];
    std::vector<uint64_t> cursor(offsets.begin(), offsets.end() - 1);
    for (uint64_t r : tmp) rows[begin + cursor[bucket_of(col[r])]++] = r;

    tree.nodes[id].split_dim = dim;
    tree.nodes[id].split_values = values;
    tree.nodes[id].children.resize(k + 1);
    auto [dim_lo, dim_hi] = bounds[dim];
    for (size_t c = 0; c <= k; ++c) {
      auto child_bounds = bounds;
      uint64_t clo = c == 0 ? dim_lo : values[c - 1];
      uint64_t chi = c == k ? dim_hi : values[c];
      child_bounds[dim] = {clo, chi};
      std::vector<std::vector<Query>> child_queries;
      child_queries.reserve(type_queries.size());
      for (const auto& tq : type_queries) {
        std::vector<Query> kept;
        for (const auto& q : tq)
          if (intersects(q, child_bounds)) kept.push_back(q);
        if (!kept.empty()) child_queries.push_back(std::move(kept));
      }
      int child =
          build(std::move(child_bounds), begin + offsets[c], begin + offsets[c + 1],
                child_queries, depth + 1);
      tree.nodes[id].children[c] = child;
    }
    return id;
  }
};

}  // namespace

GridTreeBuild build_grid_tree(const Dataset& ds, const Workload& w, const SkewParams& params,
                              int max_depth) {
  if (!w.clustered()) throw InputError("build_grid_tree: workload must be clustered into types");
  Builder b{ds, params, max_depth, ds.n, w.queries.size(), {}, {}, {}};
  b.rows.resize(ds.n);
  for (uint64_t i = 0; i < ds.n; ++i) b.rows[i] = i;

  std::vector<std::pair<uint64_t, uint64_t>> bounds;
  bounds.reserve(ds.d);
  for (uint32_t i = 0; i < ds.d; ++i) bounds.emplace_back(0, ds.domains[i]);

  std::vector<std::vector<Query>> type_queries;
  for (const auto& t : w.types) {
    std::vector<Query> qs;
    qs.reserve(t.member_query_ids.size());
    for (size_t qi : t.member_query_ids) qs.push_back(w.queries[qi]);
    if (!qs.empty()) type_queries.push_back(std::move(qs));
  }

  b.build(std::move(bounds), 0, ds.n, type_queries, 0);

  GridTreeBuild out;
  out.tree = std::move(b.tree);
  out.row_perm = std::move(b.rows);
  out.region_offsets.reserve(b.leaf_spans.size() + 1);
  out.region_offsets.push_back(0);
  for (const auto& [lo, hi] : b.leaf_spans) out.region_offsets.push_back(hi);
  return out;
}

std::vector<int> intersecting_regions(const GridTree& tree, const Query& q) {
  std::vector<int> out;
  if (tree.nodes.empty()) return out;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    const auto& node = tree.nodes[id];
    if (node.is_leaf()) {
      if (intersects(q, node.bounds)) out.push_back(node.region_id);
      continue;
    }
    const RangePredicate* p = q.predicate_on(node.split_dim);
    auto [dim_lo, dim_hi] = node.bounds[node.split_dim];
    for (size_t c = node.children.size(); c-- > 0;) {
      if (p) {
        uint64_t clo = c == 0 ? dim_lo : node.split_values[c - 1];
        uint64_t chi = c == node.split_values.size() ? dim_hi : node.split_values[c];
        if (p->hi < clo || p->lo >= chi) continue;
      }
      stack.push_back(node.children[c]);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

int region_of_point(const GridTree& tree, const std::vector<uint64_t>& point) {
  if (tree.nodes.empty()) return -1;
  int id = 0;
  while (!tree.nodes[id].is_leaf()) {
    const auto& node = tree.nodes[id];
    uint64_t v = point[node.split_dim];
    size_t c = static_cast<size_t>(
        std::upper_bound(node.split_values.begin(), node.split_values.end(), v) -
        node.split_values.begin());
    id = node.children[c];
  }
  return tree.nodes[id].region_id;
}

namespace {

nlohmann::json node_to_json(const GridTree& tree, int id) {
  const auto& node = tree.nodes[id];
  nlohmann::json j;
  if (node.is_leaf()) {
    j["region_id"] = node.region_id;
    nlohmann::json bounds = nlohmann::json::array();
    for (auto [lo, hi] : node.bounds) bounds.push_back({lo, hi});
    j["bounds"] = std::move(bounds);
    j["points"] = node.point_count;
    j["queries"] = node.query_count;
  } else {
    j["split_dim"] = node.split_dim;
    j["values"] = node.split_values;
    nlohmann::json children = nlohmann::json::array();
    for (int c : node.children) children.push_back(node_to_json(tree, c));
    j["children"] = std::move(children);
  }
  return j;
}

}  // namespace

std::string tree_to_json(const GridTree& tree) {
  if (tree.nodes.empty()) return "{}";
  return node_to_json(tree, 0).dump();
}

}  // namespace sgrid
