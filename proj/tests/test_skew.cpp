#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "sgrid/skew.hpp"

using namespace sgrid;

namespace {

// Independent oracle: minimum-cost transport between two equal-mass bin
// vectors with ground distance |i-j|, solved as a min-cost flow by
// successive shortest paths (Bellman-Ford). Small instances only.
double transport_lp(const std::vector<double>& p1, const std::vector<double>& p2) {
  const int n = static_cast<int>(p1.size());
  const int source = 2 * n, sink = 2 * n + 1, nodes = 2 * n + 2;
  struct Edge {
    int to;
    double cap;
    double cost;
    int rev;
  };
  std::vector<std::vector<Edge>> g(nodes);
  auto add_edge = [&](int u, int v, double cap, double cost) {
    g[u].push_back({v, cap, cost, static_cast<int>(g[v].size())});
    g[v].push_back({u, 0.0, -cost, static_cast<int>(g[u].size()) - 1});
  };
  double total = 0;
  for (int i = 0; i < n; ++i) {
    add_edge(source, i, p1[i], 0.0);
    add_edge(n + i, sink, p2[i], 0.0);
    total += p1[i];
    for (int j = 0; j < n; ++j) add_edge(i, n + j, 1e18, std::abs(i - j));
  }
  double moved = 0, cost = 0;
  while (moved < total - 1e-12) {
    std::vector<double> dist(nodes, 1e30);
    std::vector<std::pair<int, int>> parent(nodes, {-1, -1});
    dist[source] = 0;
    for (int it = 0; it < nodes; ++it) {
      bool changed = false;
      for (int u = 0; u < nodes; ++u) {
        if (dist[u] >= 1e29) continue;
        for (size_t e = 0; e < g[u].size(); ++e) {
          const Edge& ed = g[u][e];
          if (ed.cap > 1e-12 && dist[u] + ed.cost < dist[ed.to] - 1e-12) {
            dist[ed.to] = dist[u] + ed.cost;
            parent[ed.to] = {u, static_cast<int>(e)};
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    if (dist[sink] >= 1e29) break;
    double push = total - moved;
    for (int v = sink; v != source;) {
      auto [u, e] = parent[v];
      push = std::min(push, g[u][e].cap);
      v = u;
    }
    for (int v = sink; v != source;) {
      auto [u, e] = parent[v];
      g[u][e].cap -= push;
      g[g[u][e].to][g[u][e].rev].cap += push;
      v = u;
    }
    moved += push;
    cost += push * dist[sink];
  }
  return cost;
}

std::vector<double> random_masses(std::mt19937& rng, size_t bins, double total) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> m(bins);
  double s = 0;
  for (auto& v : m) {
    v = u(rng);
    s += v;
  }
  for (auto& v : m) v *= total / s;
  return m;
}

Query make_query(uint32_t dim, uint64_t lo, uint64_t hi) {
  Query q;
  q.predicates.push_back({dim, lo, hi});
  return q;
}

// Structural tree with `leaves` single-bin leaves and zeroed skews, for
// direct skew assignment in DP tests.
SkewTree structural_tree(size_t leaves) {
  SkewEvaluator eval({std::vector<double>(leaves, 0.0)});
  return build_skew_tree(eval, true);
}

// Every covering set of the subtree rooted at id.
std::vector<std::vector<int>> all_covers(const SkewTree& t, int id) {
  std::vector<std::vector<int>> out{{id}};
  const auto& node = t.nodes[id];
  if (!node.is_leaf()) {
    auto left = all_covers(t, node.left);
    auto right = all_covers(t, node.right);
    for (const auto& l : left)
      for (const auto& r : right) {
        std::vector<int> c = l;
        c.insert(c.end(), r.begin(), r.end());
        out.push_back(std::move(c));
      }
  }
  return out;
}

double cover_skew(const SkewTree& t, const std::vector<int>& cover) {
  double s = 0;
  for (int id : cover) s += t.nodes[id].skew;
  return s;
}

// Reference minimal cover with the shallowest-node tie rule.
std::vector<int> reference_cover(const SkewTree& t, int id) {
  const auto& node = t.nodes[id];
  if (node.is_leaf()) return {id};
  auto l = reference_cover(t, node.left);
  auto r = reference_cover(t, node.right);
  double child_sum = cover_skew(t, l) + cover_skew(t, r);
  if (node.skew <= child_sum) return {id};
  l.insert(l.end(), r.begin(), r.end());
  return l;
}

}  // namespace

TEST_CASE("emd closed form basics") {
  CHECK(emd_1d({1, 0}, {1, 0}) == 0.0);
  CHECK(emd_1d({1, 0}, {0, 1}) == 1.0);
  CHECK(emd_1d({0.5, 0.5, 0, 0}, {0, 0, 0.5, 0.5}) == doctest::Approx(2.0));
  CHECK(emd_1d({0.5, 0.5, 0, 0}, {0, 0, 0.5, 0.5}) ==
        doctest::Approx(transport_lp({0.5, 0.5, 0, 0}, {0, 0, 0.5, 0.5})));
  CHECK_THROWS_AS(emd_1d({1, 0}, {0.5, 0}), InputError);
  CHECK_THROWS_AS(emd_1d({1, 0}, {1, 0, 0}), InputError);
}

TEST_CASE("emd equals transport LP on random small instances") {
  std::mt19937 rng(42);
  for (int iter = 0; iter < 300; ++iter) {
    size_t bins = 2 + rng() % 11;  // up to 12 bins
    double total = 0.1 + (rng() % 100) / 10.0;
    auto p1 = random_masses(rng, bins, total);
    auto p2 = random_masses(rng, bins, total);
    double closed = emd_1d(p1, p2);
    double lp = transport_lp(p1, p2);
    CHECK(closed == doctest::Approx(lp).epsilon(1e-9));
  }
}

TEST_CASE("emd metric properties on equal-mass vectors") {
  std::mt19937 rng(7);
  for (int iter = 0; iter < 100; ++iter) {
    size_t bins = 2 + rng() % 10;
    auto a = random_masses(rng, bins, 5.0);
    auto b = random_masses(rng, bins, 5.0);
    auto c = random_masses(rng, bins, 5.0);
    double ab = emd_1d(a, b), ba = emd_1d(b, a);
    CHECK(ab >= 0.0);
    CHECK(ab == doctest::Approx(ba));
    CHECK(emd_1d(a, a) == 0.0);
    CHECK(emd_1d(a, c) <= ab + emd_1d(b, c) + 1e-9);
  }
}

TEST_CASE("histogram mass placement") {
  Binning bn = make_binning(0, 800, 8, std::nullopt);
  REQUIRE(bn.bins() == 8);

  SUBCASE("query spanning bins 2..5 adds quarter mass each") {
    auto h = build_histogram({make_query(0, 200, 599)}, 0, bn);
    std::vector<double> expect{0, 0, 0.25, 0.25, 0.25, 0.25, 0, 0};
    for (size_t j = 0; j < 8; ++j) CHECK(h.masses[j] == doctest::Approx(expect[j]));
  }
  SUBCASE("query within one bin adds unit mass") {
    auto h = build_histogram({make_query(0, 310, 340)}, 0, bn);
    CHECK(h.masses[3] == doctest::Approx(1.0));
    CHECK(h.total_mass() == doctest::Approx(1.0));
  }
  SUBCASE("total mass equals contributing query count") {
    std::mt19937 rng(3);
    std::vector<Query> qs;
    for (int i = 0; i < 200; ++i) {
      uint64_t lo = rng() % 800;
      uint64_t hi = std::min<uint64_t>(799, lo + rng() % 300);
      qs.push_back(make_query(0, lo, hi));
    }
    auto h = build_histogram(qs, 0, bn);
    CHECK(h.total_mass() == doctest::Approx(200.0));
  }
  SUBCASE("query not filtering the dim counts as full range") {
    Query q;
    q.predicates.push_back({1, 0, 10});
    auto h = build_histogram({q}, 0, bn);
    for (size_t j = 0; j < 8; ++j) CHECK(h.masses[j] == doctest::Approx(1.0 / 8));
  }
  SUBCASE("empty range is rejected") {
    CHECK_THROWS_AS(make_binning(5, 5, 8, std::nullopt), InputError);
  }
}

TEST_CASE("unique-value binning") {
  std::vector<uint64_t> uniq{3, 10, 17, 40};
  Binning bn = make_binning(0, 100, 128, uniq);
  CHECK(bn.unique_bins);
  REQUIRE(bn.bins() == 4);
  // Bin j owns the j-th distinct value.
  CHECK(bn.bin_of(3) == 0);
  CHECK(bn.bin_of(9) == 0);
  CHECK(bn.bin_of(10) == 1);
  CHECK(bn.bin_of(17) == 2);
  CHECK(bn.bin_of(40) == 3);
  CHECK(bn.bin_of(99) == 3);
}

TEST_CASE("skew over bins") {
  SUBCASE("uniform masses have zero skew") {
    CHECK(skew_over_bins({2, 2, 2, 2}, 0, 4) == 0.0);
  }
  SUBCASE("all mass in one of four bins") {
    CHECK(skew_over_bins({1, 0, 0, 0}, 0, 4) == doctest::Approx(1.5));
    CHECK(skew_over_bins({1, 0, 0, 0}, 0, 4) ==
          doctest::Approx(transport_lp({0.25, 0.25, 0.25, 0.25}, {1, 0, 0, 0})));
  }
  SUBCASE("single-bin range is zero by definition") {
    CHECK(skew_over_bins({5, 1, 1, 1}, 0, 1) == 0.0);
  }
}

namespace {

// Reference for SkewEvaluator's estimate: the plain normalized EMD minus the
// closed-form expectation of the uniform-null binomial bridge.
double debiased_reference(const std::vector<double>& masses, size_t x, size_t y) {
  double total = 0;
  for (size_t j = x; j < y; ++j) total += masses[j];
  if (total <= 0 || y - x < 2) return 0.0;
  double bias = 0;
  double len = static_cast<double>(y - x);
  for (size_t k = 1; k <= y - x; ++k) {
    double p = static_cast<double>(k) / len;
    bias += std::sqrt(p * (1 - p));
  }
  bias *= std::sqrt(2.0 / M_PI) / std::sqrt(total);
  return std::max(0.0, skew_over_bins(masses, x, y) - bias);
}

}  // namespace

TEST_CASE("per-type skew does not cancel") {
  // Mass-left type plus mass-right type: pooled histogram is uniform, but
  // the per-type sum stays strictly positive.
  std::vector<double> left{2, 0}, right{0, 2};
  SkewEvaluator per_type({left, right});
  CHECK(per_type.skew(0, 2) > 0.1);
  std::vector<double> pooled{2, 2};
  CHECK(skew_over_bins(pooled, 0, 2) == 0.0);
  SkewEvaluator single({left});
  CHECK(single.skew(0, 2) == doctest::Approx(debiased_reference(left, 0, 2)));
  CHECK(per_type.skew(0, 2) ==
        doctest::Approx(debiased_reference(left, 0, 2) + debiased_reference(right, 0, 2)));
}

TEST_CASE("skew tree shape") {
  SUBCASE("128 equal-width bins give 64 leaves") {
    SkewEvaluator eval({std::vector<double>(128, 1.0)});
    auto tree = build_skew_tree(eval, false);
    size_t leaves = 0;
    for (const auto& n : tree.nodes) leaves += n.is_leaf();
    CHECK(leaves == 64);
    CHECK(tree.nodes[0].bin_lo == 0);
    CHECK(tree.nodes[0].bin_hi == 128);
  }
  SUBCASE("unique-value bins give one leaf per value, all zero skew") {
    std::mt19937 rng(5);
    auto masses = random_masses(rng, 10, 50.0);
    SkewEvaluator eval({masses});
    auto tree = build_skew_tree(eval, true);
    size_t leaves = 0;
    for (const auto& n : tree.nodes) {
      if (n.is_leaf()) {
        ++leaves;
        CHECK(n.skew == 0.0);
        CHECK(n.bin_hi - n.bin_lo == 1);
      }
    }
    CHECK(leaves == 10);
    CHECK(tree.nodes[0].skew == doctest::Approx(debiased_reference(masses, 0, 10)));
  }
}

TEST_CASE("covering set DP") {
  SUBCASE("all-zero skews select the root alone") {
    auto tree = structural_tree(8);
    auto cover = optimal_covering_set(tree);
    REQUIRE(cover.size() == 1);
    CHECK(cover[0] == 0);
  }
  SUBCASE("matches exhaustive minimum with shallow tie-breaking") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::uniform_int_distribution<int> leaf_dist(2, 16);
    for (int iter = 0; iter < 200; ++iter) {
      auto tree = structural_tree(leaf_dist(rng));
      for (auto& n : tree.nodes) n.skew = u(rng);
      auto chosen = optimal_covering_set(tree);

      double best = 1e30;
      for (const auto& cover : all_covers(tree, 0)) best = std::min(best, cover_skew(tree, cover));
      CHECK(cover_skew(tree, chosen) == doctest::Approx(best).epsilon(1e-9));

      auto ref = reference_cover(tree, 0);
      std::sort(ref.begin(), ref.end());
      auto got = chosen;
      std::sort(got.begin(), got.end());
      CHECK(ref == got);

      // Disjoint cover of the whole domain, in bin order.
      size_t pos = 0;
      for (int id : chosen) {
        CHECK(tree.nodes[id].bin_lo == pos);
        pos = tree.nodes[id].bin_hi;
      }
      CHECK(pos == tree.nodes[0].bin_hi);
    }
  }
}

TEST_CASE("merge pass") {
  auto skew_zero = [](size_t, size_t) { return 0.0; };
  SUBCASE("all-zero skews merge into one range") {
    std::vector<CoverRange> cover{{0, 2, 0}, {2, 4, 0}, {4, 6, 0}, {6, 8, 0}};
    auto merged = merge_covering_nodes(cover, skew_zero, 1.1);
    REQUIRE(merged.size() == 1);
    CHECK(merged[0].bin_lo == 0);
    CHECK(merged[0].bin_hi == 8);
    Binning bn = make_binning(0, 800, 8, std::nullopt);
    CHECK(split_values(bn, merged).empty());
  }
  SUBCASE("factor 1.0 with superadditive skew never merges") {
    std::vector<CoverRange> cover{{0, 2, 1.0}, {2, 4, 1.0}};
    auto strictly_super = [](size_t, size_t) { return 2.5; };
    auto merged = merge_covering_nodes(cover, strictly_super, 1.0);
    CHECK(merged.size() == 2);
  }
  SUBCASE("threshold is combined <= factor * (a + b)") {
    std::vector<CoverRange> cover{{0, 2, 10.0}, {2, 4, 5.0}};
    auto at_threshold = [](size_t, size_t) { return 15.0 * 1.1; };
    CHECK(merge_covering_nodes(cover, at_threshold, 1.1).size() == 1);
    auto above = [](size_t, size_t) { return 15.0 * 1.1 + 1e-3; };
    CHECK(merge_covering_nodes(cover, above, 1.1).size() == 2);
  }
}

namespace {

// Two query types over a year-and-sales space: wide year-span queries spread
// over the whole domain, and narrow queries concentrated in the last
// quarter. The best split is the year dimension at the band boundary.
struct YearWorkload {
  Dataset ds;
  std::vector<std::vector<Query>> type_queries;
  std::vector<uint64_t> rows;

  YearWorkload() {
    ds.n = 4000;
    ds.d = 2;
    ds.columns.resize(2);
    std::mt19937 rng(9);
    for (uint64_t i = 0; i < ds.n; ++i) {
      ds.columns[0].push_back(rng() % 1000);
      ds.columns[1].push_back(rng() % 1000);
    }
    ds.refresh_domains();
    ds.domains[0] = 1000;
    ds.domains[1] = 1000;

    std::vector<Query> wide, narrow;
    for (int i = 0; i < 50; ++i) {
      uint64_t lo = (i * 750) / 50;
      wide.push_back(make_query(0, lo, lo + 249));
      uint64_t nlo = 750 + (i * 230) / 50;
      Query q = make_query(0, nlo, nlo + 19);
      q.predicates.push_back({1, 100, 900});
      q.normalize();
      narrow.push_back(q);
    }
    type_queries = {wide, narrow};
    rows.resize(ds.n);
    for (uint64_t i = 0; i < ds.n; ++i) rows[i] = i;
  }
};

}  // namespace

TEST_CASE("select_split picks the skewed dimension at the band boundary") {
  YearWorkload w;
  std::vector<std::pair<uint64_t, uint64_t>> bounds{{0, 1000}, {0, 1000}};
  SplitInputs in{w.ds, w.rows, bounds, w.type_queries, w.ds.n, 100};
  auto choice = select_split(in);
  REQUIRE(choice.has_value());
  CHECK(choice->split_dim == 0);
  REQUIRE(!choice->values.empty());
  bool near_band = false;
  for (uint64_t v : choice->values) near_band |= (v >= 700 && v <= 800);
  CHECK(near_band);
  CHECK(choice->reduction > 0.05 * 100);
}

TEST_CASE("select_split declines uniform workloads and tiny nodes") {
  Dataset ds;
  ds.n = 2000;
  ds.d = 1;
  ds.columns.resize(1);
  std::mt19937 rng(13);
  for (uint64_t i = 0; i < ds.n; ++i) ds.columns[0].push_back(rng() % 1000);
  ds.refresh_domains();
  ds.domains[0] = 1000;
  std::vector<uint64_t> rows(ds.n);
  for (uint64_t i = 0; i < ds.n; ++i) rows[i] = i;

  // A perfectly uniform placement: every query spreads equal mass over the
  // whole domain, so every skew is exactly zero.
  std::vector<Query> uniform;
  for (int i = 0; i < 100; ++i) uniform.push_back(make_query(0, 0, 999));
  std::vector<std::vector<Query>> types{uniform};
  std::vector<std::pair<uint64_t, uint64_t>> bounds{{0, 1000}};

  SUBCASE("uniform workload -> leaf") {
    SplitInputs in{ds, rows, bounds, types, ds.n, 100};
    CHECK(!select_split(in).has_value());
  }
  SUBCASE("node below 1% of points -> leaf regardless of skew") {
    std::vector<uint64_t> few(rows.begin(), rows.begin() + 5);
    std::vector<Query> skewed;
    for (int i = 0; i < 100; ++i) skewed.push_back(make_query(0, 900, 999));
    std::vector<std::vector<Query>> t2{skewed};
    SplitInputs in{ds, few, bounds, t2, 10000000, 100};
    CHECK(!select_split(in).has_value());
  }
  SUBCASE("node below 1% of queries -> leaf") {
    std::vector<Query> one{make_query(0, 900, 999)};
    std::vector<std::vector<Query>> t2{one};
    SplitInputs in{ds, rows, bounds, t2, ds.n, 1000};
    CHECK(!select_split(in).has_value());
  }
}

TEST_CASE("fig-5 shaped fixture extracts V = {250, 375, 500}") {
  // Skew tree over [0, 1000) with eight leaves; the minimal cover is
  // {[0,250), [250,375), [375,500), [500,1000)} with the first cover node
  // tying its children (shallow preference) and the first two cover nodes
  // summing to 15.
  SkewEvaluator eval({std::vector<double>(8, 0.0)});
  auto tree = build_skew_tree(eval, true);
  auto set_skew = [&](size_t lo, size_t hi, double s) {
    for (auto& n : tree.nodes)
      if (n.bin_lo == lo && n.bin_hi == hi) n.skew = s;
  };
  // Bins are 125 wide: bin index k covers [125k, 125(k+1)).
  set_skew(0, 8, 30);  // root
  set_skew(0, 4, 20);
  set_skew(4, 8, 5);
  set_skew(0, 2, 10);
  set_skew(2, 4, 9);
  set_skew(4, 6, 7);
  set_skew(6, 8, 6);
  set_skew(0, 1, 4);
  set_skew(1, 2, 6);
  set_skew(2, 3, 5);
  set_skew(3, 4, 3);
  set_skew(4, 5, 2);
  set_skew(5, 6, 2);
  set_skew(6, 7, 1);
  set_skew(7, 8, 2);

  auto cover_ids = optimal_covering_set(tree);
  auto cover = cover_ranges(tree, cover_ids);
  Binning bn = make_binning(0, 1000, 8, std::nullopt);
  auto v = split_values(bn, cover);
  REQUIRE(v.size() == 3);
  CHECK(v[0] == 250);
  CHECK(v[1] == 375);
  CHECK(v[2] == 500);
  CHECK(cover[0].skew + cover[1].skew == doctest::Approx(15.0));
}
