#include "sgrid/index.hpp"

#include <algorithm>
#include <chrono>

#include <nlohmann/json.hpp>

namespace sgrid {

using clock_t_ = std::chrono::steady_clock;

namespace {

double seconds_since(clock_t_::time_point t0) {
  return std::chrono::duration<double>(clock_t_::now() - t0).count();
}

}  // namespace

RegionGridIndex RegionGridIndex::build(const Dataset& dataset, const Workload& workload,
                                       const IndexBuildOptions& opts) {
  if (dataset.n == 0) throw InputError("index build: empty dataset");
  auto t_start = clock_t_::now();

  Workload w = workload;
  if (!w.clustered()) cluster_query_types(w, dataset, opts.seed);

  RegionGridIndex idx;
  auto tb = build_grid_tree(dataset, w, opts.skew, opts.max_tree_depth);
  idx.tree_ = std::move(tb.tree);

  // Route workload queries to regions once.
  std::vector<std::vector<Query>> region_queries(idx.tree_.regions());
  for (const auto& q : w.queries)
    for (int r : intersecting_regions(idx.tree_, q)) region_queries[r].push_back(q);

  double optimize_seconds = 0;
  double sort_seconds = 0;
  idx.regions_.resize(idx.tree_.regions());
  for (size_t r = 0; r < idx.tree_.regions(); ++r) {
    auto& region = idx.regions_[r];
    region.offset = tb.region_offsets[r];
    region.count = tb.region_offsets[r + 1] - tb.region_offsets[r];
    if (region.count == 0 || region_queries[r].empty()) continue;  // full-scan region

    std::vector<uint64_t> rows(tb.row_perm.begin() + region.offset,
                               tb.row_perm.begin() + region.offset + region.count);
    uint64_t budget = opts.cell_budget
                          ? std::max<uint64_t>(
                                64, static_cast<uint64_t>(static_cast<double>(opts.cell_budget) *
                                                          static_cast<double>(region.count) /
                                                          static_cast<double>(dataset.n)))
                          : 0;

    auto t_opt = clock_t_::now();
    OptimizerEnv env(dataset, rows, region_queries[r], opts.weights, budget, opts.seed);
    OptResult opt;
    switch (opts.optimizer) {
      case OptimizerMode::Agd:
        opt = adaptive_gradient_descent(env);
        break;
      case OptimizerMode::GdOnly:
        opt = gd_only(env);
        break;
      case OptimizerMode::AgdNaiveInit:
        opt = agd_naive_init(env);
        break;
      case OptimizerMode::HillClimb:
        opt = random_restart_hillclimb(env, 50, opts.seed ^ 0x5f);
        break;
      case OptimizerMode::NaiveGd: {
        Skeleton naive;
        naive.dims.assign(dataset.d, {Strategy::Independent, 0});
        opt = gd_fixed_skeleton(env, std::move(naive));
        break;
      }
    }
    optimize_seconds += seconds_since(t_opt);
    region.trace = std::move(opt.trace);

    auto t_sort = clock_t_::now();
    auto built = build_grid(dataset, std::move(rows), opt.config.skeleton, opt.config.parts,
                            opts.k_knots);
    region.grid = std::move(built.grid);
    std::copy(built.rows.begin(), built.rows.end(), tb.row_perm.begin() + region.offset);
    sort_seconds += seconds_since(t_sort);
  }

  auto t_reorder = clock_t_::now();
  idx.store_ = reorder(dataset, tb.row_perm);
  sort_seconds += seconds_since(t_reorder);

  idx.tree_json_ = tree_to_json(idx.tree_);

  // Stats
  auto& st = idx.stats_;
  st.tree_nodes = idx.tree_.nodes.size();
  st.tree_depth = idx.tree_.depth;
  st.leaf_regions = idx.tree_.regions();
  std::vector<uint64_t> pts;
  uint64_t mappings = 0, conditionals = 0;
  for (const auto& region : idx.regions_) {
    pts.push_back(region.count);
    if (region.grid) {
      st.indexed_regions++;
      st.total_cells += region.grid->cells();
      st.index_bytes += region.grid->lookup_table_bytes();
      mappings += region.grid->skeleton.mapping_count();
      conditionals += region.grid->skeleton.conditional_count();
    }
  }
  std::sort(pts.begin(), pts.end());
  if (!pts.empty()) {
    st.min_points = pts.front();
    st.max_points = pts.back();
    st.median_points = pts[pts.size() / 2];
  }
  if (st.indexed_regions) {
    st.avg_mappings = static_cast<double>(mappings) / static_cast<double>(st.indexed_regions);
    st.avg_conditionals =
        static_cast<double>(conditionals) / static_cast<double>(st.indexed_regions);
  }
  st.index_bytes += idx.tree_json_.size();
  st.optimize_seconds = optimize_seconds;
  st.sort_seconds = sort_seconds;
  st.build_seconds = seconds_since(t_start);
  return idx;
}

uint64_t RegionGridIndex::query(const Query& q, ScanStats* stats) const {
  uint64_t total = 0;
  for (int r : intersecting_regions(tree_, q)) {
    const auto& region = regions_[r];
    if (region.count == 0) continue;
    if (region.grid) {
      total += execute_region_query(*region.grid, store_, region.offset, q, stats);
    } else {
      std::vector<PhysicalRange> full{{region.offset, region.offset + region.count, false}};
      total += scan_count(store_, full, q.predicates, stats);
    }
  }
  return total;
}

RegionGridIndex RegionGridIndex::rebuild(const Workload& new_workload,
                                         const IndexBuildOptions& opts) const {
  return build(store_, new_workload, opts);
}

void RegionGridIndex::corrupt_lookup_table_for_testing() {
  for (auto& region : regions_) {
    if (!region.grid || region.grid->cells() < 2) continue;
    auto& offsets = region.grid->offsets;
    // Collapse every interior boundary: any query whose cell runs stop short
    // of the last cell now scans nothing there and undercounts.
    for (size_t k = 0; k + 1 < offsets.size(); ++k) offsets[k] = 0;
    return;
  }
}

std::string RegionGridIndex::traces_jsonl() const {
  std::string out;
  for (size_t r = 0; r < regions_.size(); ++r) {
    for (const auto& e : regions_[r].trace) {
      nlohmann::json j{{"region", r},
                       {"iteration", e.iteration},
                       {"skeleton", e.skeleton},
                       {"parts", e.parts},
                       {"cost", e.cost}};
      out += j.dump();
      out += '\n';
    }
  }
  return out;
}

std::string IndexStats::to_json() const {
  nlohmann::json j{{"tree_nodes", tree_nodes},
                   {"tree_depth", tree_depth},
                   {"leaf_regions", leaf_regions},
                   {"indexed_regions", indexed_regions},
                   {"min_points_per_region", min_points},
                   {"median_points_per_region", median_points},
                   {"max_points_per_region", max_points},
                   {"avg_functional_mappings_per_region", avg_mappings},
                   {"avg_conditional_cdfs_per_region", avg_conditionals},
                   {"total_cells", total_cells},
                   {"index_bytes", index_bytes},
                   {"build_seconds", build_seconds},
                   {"optimize_seconds", optimize_seconds},
                   {"sort_seconds", sort_seconds}};
  return j.dump();
}

}  // namespace sgrid
