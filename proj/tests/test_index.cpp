#include <doctest.h>

#include <memory>
#include <random>

#include "sgrid/bench.hpp"
#include "sgrid/index.hpp"
#include "sgrid/synthetic.hpp"

using namespace sgrid;

namespace {

// Skewed two-type workload over partly correlated data: the standing
// end-to-end fixture.
struct Fixture {
  Dataset ds;
  Workload w;

  explicit Fixture(uint64_t n = 60000) {
    auto spec = DataGenSpec::from_json_text(R"({"n": )" + std::to_string(n) + R"(, "dims": [
      {"kind":"uniform","lo":0,"hi":1000000},
      {"kind":"uniform","lo":0,"hi":1000000},
      {"kind":"uniform","lo":0,"hi":1000000},
      {"kind":"correlated","base":0,"slope":1.0,"intercept":0.0,"noise_pct":0.05}]})");
    ds = generate_synthetic(spec, 42);
    auto wspec = WorkloadGenSpec::from_json_text(R"({"types":[
      {"count":100, "predicates":[
        {"dim":0,"selectivity":0.08,"center":{"lo":0.8,"hi":1.0}},
        {"dim":3,"selectivity":0.15,"center":{"lo":0.8,"hi":1.0}}]},
      {"count":100, "predicates":[
        {"dim":1,"selectivity":0.1},
        {"dim":2,"selectivity":0.3}]}]})");
    w = generate_workload(wspec, ds, 43);
  }
};

Query make_query(std::initializer_list<RangePredicate> preds) {
  Query q;
  q.predicates = preds;
  q.normalize();
  return q;
}

}  // namespace

TEST_CASE("uniform workload degenerates to a single region") {
  auto spec = DataGenSpec::from_json_text(R"({"n": 20000, "dims": [
    {"kind":"uniform","lo":0,"hi":100000},
    {"kind":"uniform","lo":0,"hi":100000}]})");
  auto ds = generate_synthetic(spec, 7);
  auto wspec = WorkloadGenSpec::from_json_text(R"({"types":[
    {"count":100, "predicates":[{"dim":0,"selectivity":0.2},{"dim":1,"selectivity":0.2}]}]})");
  auto w = generate_workload(wspec, ds, 8);
  auto idx = RegionGridIndex::build(ds, w);
  CHECK(idx.tree().regions() == 1);
  CHECK(idx.stats().leaf_regions == 1);
  CHECK(idx.stats().indexed_regions == 1);

  auto oracle = oracle_counts(ds, w);
  for (size_t i = 0; i < w.queries.size(); ++i) CHECK(idx.query(w.queries[i]) == oracle[i]);
}

TEST_CASE("skewed correlated workload builds a real tree") {
  Fixture f;
  auto idx = RegionGridIndex::build(f.ds, f.w);

  SUBCASE("at least two regions with their own grids") {
    CHECK(idx.tree().regions() >= 2);
    CHECK(idx.stats().indexed_regions >= 1);
    CHECK(idx.stats().tree_depth >= 1);
  }

  SUBCASE("every workload query matches the oracle") {
    auto oracle = oracle_counts(f.ds, f.w);
    for (size_t i = 0; i < f.w.queries.size(); ++i)
      CHECK(idx.query(f.w.queries[i]) == oracle[i]);
  }

  SUBCASE("off-workload queries match the oracle too") {
    std::mt19937_64 rng(101);
    for (int iter = 0; iter < 60; ++iter) {
      Query q;
      for (uint32_t dim = 0; dim < f.ds.d; ++dim) {
        if (rng() % 2) continue;
        uint64_t domain = f.ds.domains[dim];
        uint64_t lo = rng() % domain;
        uint64_t hi = std::min<uint64_t>(domain - 1, lo + rng() % (domain / 2));
        q.predicates.push_back({dim, lo, hi});
      }
      if (q.predicates.empty()) q.predicates.push_back({0, 0, f.ds.domains[0] - 1});
      q.normalize();
      CHECK(idx.query(q) == count_matching(f.ds, q));
    }
  }

  SUBCASE("bounds-level queries behave") {
    CHECK(idx.query(make_query({{0, 0, f.ds.domains[0] - 1}})) == f.ds.n);
    // Far outside any data.
    CHECK(idx.query(make_query({{1, f.ds.domains[1] + 10, f.ds.domains[1] + 20}})) == 0);
  }

  SUBCASE("index bytes follow the accounting identity") {
    uint64_t expect = idx.tree_json().size();
    for (const auto& r : idx.regions())
      if (r.grid) expect += 8 * (r.grid->cells() + 1);
    CHECK(idx.stats().index_bytes == expect);
  }

  SUBCASE("stats json carries the layout fields") {
    auto j = idx.stats().to_json();
    for (const char* key :
         {"tree_nodes", "tree_depth", "leaf_regions", "min_points_per_region",
          "median_points_per_region", "max_points_per_region",
          "avg_functional_mappings_per_region", "avg_conditional_cdfs_per_region", "total_cells",
          "index_bytes"}) {
      CHECK(j.find(key) != std::string::npos);
    }
  }

  SUBCASE("optimizer traces are recorded per indexed region") {
    auto text = idx.traces_jsonl();
    CHECK(text.find("\"region\"") != std::string::npos);
    CHECK(text.find("\"cost\"") != std::string::npos);
  }
}

TEST_CASE("rebuild") {
  Fixture f(40000);
  auto idx = std::make_shared<RegionGridIndex>(RegionGridIndex::build(f.ds, f.w));

  SUBCASE("rebuilding with the identical workload reproduces the structure") {
    auto again = idx->rebuild(f.w);
    CHECK(again.tree().regions() == idx->tree().regions());
    CHECK(again.stats().total_cells == idx->stats().total_cells);
    CHECK(again.stats().index_bytes == idx->stats().index_bytes);
  }

  SUBCASE("rebuild for a shifted workload stays oracle-correct") {
    auto wspec = WorkloadGenSpec::from_json_text(R"({"types":[
      {"count":100, "predicates":[
        {"dim":1,"selectivity":0.05,"center":{"lo":0.0,"hi":0.2}},
        {"dim":2,"selectivity":0.25}]}]})");
    auto wb = generate_workload(wspec, f.ds, 91);
    auto rebuilt = idx->rebuild(wb);
    for (const auto& q : wb.queries)
      CHECK(rebuilt.query(q) == count_matching(rebuilt.store(), q));
    // The old index keeps answering while the new one exists.
    for (size_t i = 0; i < 10; ++i)
      CHECK(idx->query(wb.queries[i]) == count_matching(idx->store(), wb.queries[i]));
  }

  SUBCASE("handle swap publishes the new version atomically") {
    IndexHandle handle(idx);
    auto before = handle.current();
    CHECK(before == idx);
    auto rebuilt =
        std::make_shared<RegionGridIndex>(idx->rebuild(f.w));
    handle.swap(rebuilt);
    CHECK(handle.current() == rebuilt);
    // The previous version is still alive through its shared_ptr.
    CHECK(idx->query(f.w.queries[0]) == rebuilt->query(f.w.queries[0]));
  }
}

TEST_CASE("degenerate inputs") {
  SUBCASE("empty dataset is rejected") {
    Dataset ds;
    ds.n = 0;
    ds.d = 1;
    ds.columns.resize(1);
    ds.domains = {1};
    Workload w;
    w.queries.push_back(make_query({{0, 0, 0}}));
    CHECK_THROWS_AS(RegionGridIndex::build(ds, w), InputError);
  }
  SUBCASE("constant columns survive the whole pipeline") {
    Dataset ds;
    ds.n = 5000;
    ds.d = 2;
    ds.columns.assign(2, std::vector<uint64_t>(5000, 0));
    std::mt19937_64 rng(7);
    for (auto& v : ds.columns[1]) v = rng() % 1000;
    for (auto& v : ds.columns[0]) v = 42;  // constant
    ds.refresh_domains();
    Workload w;
    for (int i = 0; i < 50; ++i) {
      uint64_t lo = rng() % 900;
      w.queries.push_back(make_query({{0, 0, 100}, {1, lo, lo + 99}}));
    }
    auto idx = RegionGridIndex::build(ds, w);
    for (const auto& q : w.queries) CHECK(idx.query(q) == count_matching(ds, q));
    CHECK(idx.query(make_query({{0, 43, 50}})) == 0);  // empty result
  }
  SUBCASE("single-point regions and empty-result queries") {
    Dataset ds;
    ds.n = 1;
    ds.d = 1;
    ds.columns = {{5}};
    ds.refresh_domains();
    Workload w;
    w.queries.push_back(make_query({{0, 0, 10}}));
    auto idx = RegionGridIndex::build(ds, w);
    CHECK(idx.query(w.queries[0]) == 1);
    CHECK(idx.query(make_query({{0, 6, 10}})) == 0);
  }
}
