#include <doctest.h>

#include <algorithm>
#include <random>

#include <nlohmann/json.hpp>

#include "sgrid/grid_tree.hpp"

using namespace sgrid;

namespace {

Dataset uniform_ds(uint64_t n, uint32_t d, uint64_t domain, uint32_t seed) {
  Dataset ds;
  ds.n = n;
  ds.d = d;
  ds.columns.resize(d);
  std::mt19937_64 rng(seed);
  for (uint32_t c = 0; c < d; ++c)
    for (uint64_t i = 0; i < n; ++i) ds.columns[c].push_back(rng() % domain);
  ds.refresh_domains();
  for (uint32_t c = 0; c < d; ++c) ds.domains[c] = domain;
  return ds;
}

Query make_query(std::initializer_list<RangePredicate> preds) {
  Query q;
  q.predicates = preds;
  q.normalize();
  return q;
}

// Manually typed workload (types known by construction).
Workload typed_workload(std::vector<std::vector<Query>> groups) {
  Workload w;
  for (size_t t = 0; t < groups.size(); ++t) {
    QueryType qt;
    qt.type_id = static_cast<int>(t);
    if (!groups[t].empty())
      for (const auto& p : groups[t][0].predicates) qt.filtered_dims.push_back(p.dim);
    for (auto& q : groups[t]) {
      qt.member_query_ids.push_back(w.queries.size());
      w.queries.push_back(q);
    }
    w.types.push_back(std::move(qt));
  }
  return w;
}

// Wide year-span queries everywhere plus narrow queries over the last
// quarter of dim 0 (the running two-type example).
Workload skewed_two_type_workload() {
  std::vector<Query> wide, narrow;
  for (int i = 0; i < 60; ++i) {
    uint64_t lo = (i * 750) / 60;
    wide.push_back(make_query({{0, lo, lo + 249}}));
    uint64_t nlo = 750 + (i * 230) / 60;
    narrow.push_back(make_query({{0, nlo, nlo + 19}, {1, 100, 899}}));
  }
  return typed_workload({wide, narrow});
}

std::vector<uint64_t> point_at(const Dataset& ds, uint64_t row) {
  std::vector<uint64_t> p(ds.d);
  for (uint32_t c = 0; c < ds.d; ++c) p[c] = ds.columns[c][row];
  return p;
}

}  // namespace

TEST_CASE("uniform data and workload keep a single root leaf") {
  auto ds = uniform_ds(5000, 2, 1000, 3);
  std::vector<Query> full;
  for (int i = 0; i < 50; ++i) full.push_back(make_query({{0, 0, 999}}));
  auto w = typed_workload({full});
  auto built = build_grid_tree(ds, w);
  CHECK(built.tree.nodes.size() == 1);
  CHECK(built.tree.regions() == 1);
  CHECK(built.tree.depth == 0);
  CHECK(built.region_offsets.back() == ds.n);
}

TEST_CASE("two-type workload splits the time dimension") {
  auto ds = uniform_ds(20000, 2, 1000, 5);
  auto w = skewed_two_type_workload();
  auto built = build_grid_tree(ds, w);
  REQUIRE(!built.tree.nodes[0].is_leaf());
  CHECK(built.tree.nodes[0].split_dim == 0);
  CHECK(built.tree.regions() >= 2);
  bool near_band = false;
  for (uint64_t v : built.tree.nodes[0].split_values) near_band |= (v >= 700 && v <= 800);
  CHECK(near_band);

  SUBCASE("leaves tile the space") {
    CHECK(built.region_offsets.front() == 0);
    CHECK(built.region_offsets.back() == ds.n);
    std::vector<uint64_t> seen(ds.n, 0);
    for (uint64_t i = 0; i < ds.n; ++i) seen[built.row_perm[i]]++;
    CHECK(std::all_of(seen.begin(), seen.end(), [](uint64_t c) { return c == 1; }));

    std::vector<uint64_t> region_count(built.tree.regions(), 0);
    for (uint64_t i = 0; i < ds.n; ++i) {
      int r = region_of_point(built.tree, point_at(ds, i));
      REQUIRE(r >= 0);
      region_count[r]++;
    }
    uint64_t total = 0;
    for (size_t r = 0; r < region_count.size(); ++r) {
      CHECK(region_count[r] == built.tree.leaf(r).point_count);
      total += region_count[r];
    }
    CHECK(total == ds.n);
  }

  SUBCASE("rows assigned to a region lie inside its bounds") {
    for (size_t r = 0; r < built.tree.regions(); ++r) {
      const auto& leaf = built.tree.leaf(r);
      for (uint64_t i = built.region_offsets[r]; i < built.region_offsets[r + 1]; ++i) {
        uint64_t row = built.row_perm[i];
        for (uint32_t c = 0; c < ds.d; ++c) {
          uint64_t v = ds.columns[c][row];
          CHECK(v >= leaf.bounds[c].first);
          CHECK(v < leaf.bounds[c].second);
        }
      }
    }
  }

  SUBCASE("tree json shape") {
    auto j = nlohmann::json::parse(tree_to_json(built.tree));
    CHECK(j.contains("split_dim"));
    CHECK(j.contains("values"));
    CHECK(j["children"].is_array());
  }
}

TEST_CASE("paper-like selectivities keep the tree small") {
  // Narrow filters (about 1-2% per dim), one type concentrated in the top
  // quarter of dim 0, one spread out: the shape the depth/leaf expectations
  // are stated for.
  auto ds = uniform_ds(50000, 2, 1000, 19);
  std::vector<Query> hot, cold;
  for (int i = 0; i < 100; ++i) {
    uint64_t lo = 750 + (i * 230) / 100;
    hot.push_back(make_query({{0, lo, lo + 19}, {1, 0, 999}}));
    uint64_t clo = (i * 980) / 100;
    cold.push_back(make_query({{1, clo, clo + 19}}));
  }
  auto w = typed_workload({hot, cold});
  auto built = build_grid_tree(ds, w);
  CHECK(built.tree.depth <= 6);
  CHECK(built.tree.regions() <= 64);
  CHECK(built.tree.regions() >= 2);
}

TEST_CASE("intersecting_regions") {
  auto ds = uniform_ds(20000, 2, 1000, 7);
  auto w = skewed_two_type_workload();
  auto built = build_grid_tree(ds, w);
  const auto& tree = built.tree;

  SUBCASE("query inside one child interval reaches only that side") {
    uint64_t v1 = tree.nodes[0].split_values.front();
    auto q = make_query({{0, 0, v1 - 1}});
    for (int r : intersecting_regions(tree, q)) {
      CHECK(tree.leaf(r).bounds[0].first < v1);
    }
  }
  SUBCASE("query not filtering the split dim reaches all leaves that overlap") {
    auto q = make_query({{1, 0, 999}});
    CHECK(intersecting_regions(tree, q).size() == tree.regions());
  }
  SUBCASE("routing matches brute-force bounds intersection") {
    std::mt19937_64 rng(11);
    for (int iter = 0; iter < 200; ++iter) {
      Query q;
      for (uint32_t dim = 0; dim < 2; ++dim) {
        if (rng() % 3 == 0) continue;
        uint64_t lo = rng() % 1000;
        uint64_t hi = std::min<uint64_t>(999, lo + rng() % 400);
        q.predicates.push_back({dim, lo, hi});
      }
      if (q.predicates.empty()) q.predicates.push_back({0, 0, 999});
      q.normalize();
      auto got = intersecting_regions(tree, q);
      std::vector<int> expect;
      for (size_t r = 0; r < tree.regions(); ++r) {
        bool ok = true;
        for (const auto& p : q.predicates) {
          auto [lo, hi] = tree.leaf(r).bounds[p.dim];
          if (p.hi < lo || p.lo >= hi) ok = false;
        }
        if (ok) expect.push_back(static_cast<int>(r));
      }
      CHECK(got == expect);
    }
  }
  SUBCASE("routing completeness: all matching points live in returned regions") {
    std::mt19937_64 rng(13);
    for (int iter = 0; iter < 30; ++iter) {
      uint64_t lo = rng() % 900;
      auto q = make_query({{0, lo, lo + 99}});
      auto regions = intersecting_regions(tree, q);
      for (uint64_t i = 0; i < ds.n; ++i) {
        if (!q.predicates[0].contains(ds.columns[0][i])) continue;
        int r = region_of_point(tree, point_at(ds, i));
        CHECK(std::find(regions.begin(), regions.end(), r) != regions.end());
      }
    }
  }
}

TEST_CASE("region_of_point boundary convention is left-closed") {
  auto ds = uniform_ds(20000, 2, 1000, 17);
  auto w = skewed_two_type_workload();
  auto built = build_grid_tree(ds, w);
  const auto& root = built.tree.nodes[0];
  REQUIRE(!root.is_leaf());
  uint64_t v1 = root.split_values.front();

  auto at = region_of_point(built.tree, {v1, 500});
  auto below = region_of_point(built.tree, {v1 - 1, 500});
  CHECK(at != below);
  // The point at the split value belongs to the right (second) child.
  const auto& leaf_at = built.tree.leaf(at);
  CHECK(leaf_at.bounds[0].first >= v1);
  const auto& leaf_below = built.tree.leaf(below);
  CHECK(leaf_below.bounds[0].second <= v1);
}

TEST_CASE("max depth guard terminates adversarial recursion") {
  auto ds = uniform_ds(5000, 1, 1000, 23);
  std::vector<Query> narrow;
  for (int i = 0; i < 200; ++i) narrow.push_back(make_query({{0, 990, 999}}));
  auto w = typed_workload({narrow});
  auto built = build_grid_tree(ds, w, {}, 3);
  CHECK(built.tree.depth <= 3);
}

TEST_CASE("unclustered workload is rejected") {
  auto ds = uniform_ds(100, 1, 100, 29);
  Workload w;
  w.queries.push_back(make_query({{0, 0, 99}}));
  CHECK_THROWS_AS(build_grid_tree(ds, w), InputError);
}
