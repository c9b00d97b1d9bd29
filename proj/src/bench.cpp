#include "sgrid/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>

namespace sgrid {

namespace {

using clock_t_ = std::chrono::steady_clock;
using json = nlohmann::json;

using QueryFn = std::function<uint64_t(const Query&)>;

std::vector<uint64_t> verify_index(const std::string& name, const QueryFn& run,
                                   const Workload& w, const std::vector<uint64_t>& oracle) {
  std::vector<uint64_t> got(w.queries.size());
  for (size_t i = 0; i < w.queries.size(); ++i) {
    got[i] = run(w.queries[i]);
    if (got[i] != oracle[i]) throw VerificationError(name, i, oracle[i], got[i]);
  }
  return got;
}

TimingSummary time_workload(const QueryFn& run, const Workload& w, int warmup, int passes) {
  for (int p = 0; p < warmup; ++p)
    for (const auto& q : w.queries) {
      volatile uint64_t sink = run(q);
      (void)sink;
    }
  std::vector<double> pass_means;
  std::vector<double> samples;
  samples.reserve(static_cast<size_t>(passes) * w.queries.size());
  for (int p = 0; p < passes; ++p) {
    double total = 0;
    for (const auto& q : w.queries) {
      auto t0 = clock_t_::now();
      volatile uint64_t sink = run(q);
      (void)sink;
      double s = std::chrono::duration<double>(clock_t_::now() - t0).count();
      total += s;
      samples.push_back(s);
    }
    pass_means.push_back(total / static_cast<double>(w.queries.size()));
  }
  std::sort(pass_means.begin(), pass_means.end());
  std::sort(samples.begin(), samples.end());
  TimingSummary t;
  t.avg_seconds = pass_means[pass_means.size() / 2];
  t.p50_seconds = samples[samples.size() / 2];
  t.p99_seconds = samples[std::min(samples.size() - 1, samples.size() * 99 / 100)];
  t.queries_per_sec = t.avg_seconds > 0 ? 1.0 / t.avg_seconds : 0.0;
  return t;
}

json timing_json(const TimingSummary& t) {
  return json{{"avg_query_seconds", t.avg_seconds},
              {"p50_seconds", t.p50_seconds},
              {"p99_seconds", t.p99_seconds},
              {"queries_per_sec", t.queries_per_sec}};
}

json environment_json(const Dataset& ds, const BenchOptions& opts) {
  return json{{"seed", opts.seed},
              {"dataset_spec_hash", opts.dataset_hash},
              {"workload_spec_hash", opts.workload_hash},
              {"n", ds.n},
              {"d", ds.d}};
}

json bench_one_index(const std::string& name, const Dataset& ds, const Workload& w,
                     const std::vector<uint64_t>& oracle, const BenchOptions& opts,
                     const CostWeights& weights) {
  json entry{{"name", name}};
  if (name == "tsunami") {
    IndexBuildOptions io;
    io.weights = weights;
    io.cell_budget = opts.cell_budget;
    io.seed = opts.seed;
    auto idx = RegionGridIndex::build(ds, w, io);
    if (opts.inject_fault) idx.corrupt_lookup_table_for_testing();
    QueryFn run = [&](const Query& q) { return idx.query(q); };
    verify_index(name, run, w, oracle);
    entry["timing"] = timing_json(time_workload(run, w, opts.warmup_passes, opts.timed_passes));
    entry["index_bytes"] = idx.stats().index_bytes;
    entry["build_seconds"] = idx.stats().build_seconds;
    entry["optimize_seconds"] = idx.stats().optimize_seconds;
    entry["sort_seconds"] = idx.stats().sort_seconds;
    entry["stats"] = json::parse(idx.stats().to_json());
    entry["trace_jsonl"] = idx.traces_jsonl();
  } else if (name == "kdtree" && opts.page_size_sweep) {
    json best;
    double best_avg = 0;
    for (uint64_t page = 1 << 7; page <= 1 << 17; page <<= 1) {
      BaselineTuning tuning;
      tuning.page_size = page;
      auto idx = BaselineIndex::build(BaselineKind::KdTree, ds, w, tuning, weights,
                                      opts.cell_budget, opts.seed);
      QueryFn run = [&](const Query& q) { return idx.query(q); };
      verify_index(name, run, w, oracle);
      auto t = time_workload(run, w, opts.warmup_passes, opts.timed_passes);
      if (best.is_null() || t.avg_seconds < best_avg) {
        best_avg = t.avg_seconds;
        best = json{{"timing", timing_json(t)},
                    {"index_bytes", idx.index_bytes()},
                    {"build_seconds", idx.build_seconds()},
                    {"page_size", page},
                    {"stats", json::parse(idx.stats_json())}};
      }
    }
    entry.update(best);
  } else {
    BaselineKind kind = baseline_kind_from_name(name);
    BaselineTuning tuning;
    tuning.page_size = opts.page_size;
    auto idx = BaselineIndex::build(kind, ds, w, tuning, weights, opts.cell_budget, opts.seed);
    QueryFn run = [&](const Query& q) { return idx.query(q); };
    verify_index(name, run, w, oracle);
    entry["timing"] = timing_json(time_workload(run, w, opts.warmup_passes, opts.timed_passes));
    entry["index_bytes"] = idx.index_bytes();
    entry["build_seconds"] = idx.build_seconds();
    entry["stats"] = json::parse(idx.stats_json());
    if (kind == BaselineKind::Flood) entry["trace_jsonl"] = trace_to_jsonl(idx.trace());
  }
  entry["verified"] = true;
  return entry;
}

}  // namespace

std::vector<uint64_t> oracle_counts(const Dataset& ds, const Workload& w) {
  std::vector<uint64_t> out;
  out.reserve(w.queries.size());
  for (const auto& q : w.queries) out.push_back(count_matching(ds, q));
  return out;
}

CostWeights calibrate_on_sample(const Dataset& ds, const Workload& w, uint64_t seed) {
  // Pilot: an all-independent grid over a modest sample, timed on the
  // workload queries.
  auto rows = sample_rows(ds.n, 200000, seed ^ 0xca11);
  Dataset pilot_ds;
  pilot_ds.n = rows.size();
  pilot_ds.d = ds.d;
  pilot_ds.domains = ds.domains;
  pilot_ds.scale_exponents = ds.scale_exponents;
  pilot_ds.dicts.resize(ds.d);
  pilot_ds.columns.resize(ds.d);
  for (uint32_t c = 0; c < ds.d; ++c) {
    pilot_ds.columns[c].reserve(rows.size());
    for (uint64_t r : rows) pilot_ds.columns[c].push_back(ds.columns[c][r]);
  }
  Skeleton s;
  s.dims.assign(ds.d, {Strategy::Independent, 0});
  std::vector<uint64_t> prows(pilot_ds.n);
  std::iota(prows.begin(), prows.end(), 0);
  OptimizerEnv env(pilot_ds, prows, w.queries, CostWeights{}, 0, seed);
  auto parts = initialize_partitions(env, s);
  auto built = build_grid(pilot_ds, std::move(prows), s, parts);
  Dataset pilot_store = reorder(pilot_ds, built.rows);
  return calibrate_cost_model(pilot_store, built.grid, 0, w.queries);
}

nlohmann::json run_bench(const Dataset& ds, const Workload& w,
                         const std::vector<std::string>& index_names, const BenchOptions& opts) {
  CostWeights weights = opts.calibrate ? calibrate_on_sample(ds, w, opts.seed) : opts.weights;
  auto oracle = oracle_counts(ds, w);
  json report;
  report["environment"] = environment_json(ds, opts);
  report["weights"] = json{{"w0", weights.w0}, {"w1", weights.w1}, {"calibrated", opts.calibrate}};
  json indexes = json::array();
  for (const auto& name : index_names)
    indexes.push_back(bench_one_index(name, ds, w, oracle, opts, weights));
  report["indexes"] = std::move(indexes);
  return report;
}

nlohmann::json run_shift(const Dataset& ds, const Workload& a, const Workload& b,
                         const BenchOptions& opts) {
  CostWeights weights = opts.calibrate ? calibrate_on_sample(ds, a, opts.seed) : opts.weights;
  json report;
  report["environment"] = environment_json(ds, opts);

  IndexBuildOptions io;
  io.weights = weights;
  io.cell_budget = opts.cell_budget;
  io.seed = opts.seed;

  auto oracle_a = oracle_counts(ds, a);
  auto idx_a = RegionGridIndex::build(ds, a, io);
  QueryFn run_a = [&](const Query& q) { return idx_a.query(q); };
  verify_index("tsunami", run_a, a, oracle_a);
  report["workload_a"] =
      json{{"timing", timing_json(time_workload(run_a, a, opts.warmup_passes, opts.timed_passes))},
           {"index_bytes", idx_a.stats().index_bytes}};

  // Workload shifts with no rebuild: still correct, but degraded.
  auto oracle_b = oracle_counts(ds, b);
  verify_index("tsunami-stale", run_a, b, oracle_b);
  report["workload_b_degraded"] = json{
      {"timing", timing_json(time_workload(run_a, b, opts.warmup_passes, opts.timed_passes))}};

  auto idx_b = idx_a.rebuild(b, io);
  QueryFn run_b = [&](const Query& q) { return idx_b.query(q); };
  // The rebuilt store is a reorder of idx_a's store; recompute the oracle on it.
  auto oracle_b2 = oracle_counts(idx_b.store(), b);
  verify_index("tsunami-rebuilt", run_b, b, oracle_b2);
  report["rebuild"] = json{{"optimize_seconds", idx_b.stats().optimize_seconds},
                           {"sort_seconds", idx_b.stats().sort_seconds},
                           {"build_seconds", idx_b.stats().build_seconds}};
  report["workload_b_rebuilt"] =
      json{{"timing", timing_json(time_workload(run_b, b, opts.warmup_passes, opts.timed_passes))},
           {"index_bytes", idx_b.stats().index_bytes}};
  return report;
}

nlohmann::json run_ablate(const Dataset& ds, const Workload& w, const BenchOptions& opts) {
  CostWeights weights = opts.calibrate ? calibrate_on_sample(ds, w, opts.seed) : opts.weights;
  auto oracle = oracle_counts(ds, w);
  json report;
  report["environment"] = environment_json(ds, opts);
  report["weights"] = json{{"w0", weights.w0}, {"w1", weights.w1}, {"calibrated", opts.calibrate}};

  // Component lesion: tsunami, tree with per-region naive grids, one
  // augmented grid without the tree, and flat flood.
  struct Variant {
    const char* name;
    OptimizerMode mode;
    int depth;
  };
  const Variant variants[] = {{"tsunami", OptimizerMode::Agd, 12},
                              {"gridtree-only", OptimizerMode::NaiveGd, 12},
                              {"aggrid-only", OptimizerMode::Agd, 0}};
  json lesion = json::array();
  for (const auto& v : variants) {
    IndexBuildOptions io;
    io.weights = weights;
    io.cell_budget = opts.cell_budget;
    io.seed = opts.seed;
    io.optimizer = v.mode;
    io.max_tree_depth = v.depth;
    auto idx = RegionGridIndex::build(ds, w, io);
    QueryFn run = [&](const Query& q) { return idx.query(q); };
    verify_index(v.name, run, w, oracle);
    lesion.push_back(
        json{{"name", v.name},
             {"timing", timing_json(time_workload(run, w, opts.warmup_passes, opts.timed_passes))},
             {"index_bytes", idx.stats().index_bytes},
             {"stats", json::parse(idx.stats().to_json())}});
  }
  {
    auto idx = BaselineIndex::build(BaselineKind::Flood, ds, w, {}, weights, opts.cell_budget,
                                    opts.seed);
    QueryFn run = [&](const Query& q) { return idx.query(q); };
    verify_index("flood", run, w, oracle);
    lesion.push_back(
        json{{"name", "flood"},
             {"timing", timing_json(time_workload(run, w, opts.warmup_passes, opts.timed_passes))},
             {"index_bytes", idx.index_bytes()},
             {"stats", json::parse(idx.stats_json())}});
  }
  report["lesion"] = std::move(lesion);

  // Optimizer comparison over the whole data space, all with the same cost
  // model: predicted cost from the optimizer, actual time from a real build.
  std::vector<uint64_t> all_rows(ds.n);
  std::iota(all_rows.begin(), all_rows.end(), 0);
  Workload cw = w;
  if (!cw.clustered()) cluster_query_types(cw, ds, opts.seed);
  OptimizerEnv env(ds, all_rows, cw.queries, weights, opts.cell_budget, opts.seed);

  struct Opt {
    const char* name;
    OptResult result;
  };
  std::vector<Opt> opts_run;
  opts_run.push_back({"agd", adaptive_gradient_descent(env)});
  opts_run.push_back({"gd", gd_only(env)});
  opts_run.push_back({"agd-ni", agd_naive_init(env)});
  opts_run.push_back({"hillclimb", random_restart_hillclimb(env, 50, opts.seed ^ 0x5f)});

  json optimizers = json::array();
  double err_sum = 0;
  for (auto& o : opts_run) {
    std::vector<uint64_t> rows(ds.n);
    std::iota(rows.begin(), rows.end(), 0);
    auto built = build_grid(ds, std::move(rows), o.result.config.skeleton, o.result.config.parts);
    Dataset store = reorder(ds, built.rows);
    QueryFn run = [&](const Query& q) {
      return execute_region_query(built.grid, store, 0, q);
    };
    verify_index(o.name, run, w, oracle);
    auto t = time_workload(run, w, opts.warmup_passes, opts.timed_passes);
    double predicted = o.result.config.predicted_cost;
    double rel_err = t.avg_seconds > 0 ? std::abs(predicted - t.avg_seconds) / t.avg_seconds : 0;
    err_sum += rel_err;
    optimizers.push_back(json{{"name", o.name},
                              {"predicted_cost_seconds", predicted},
                              {"actual_avg_seconds", t.avg_seconds},
                              {"relative_error", rel_err},
                              {"skeleton", o.result.config.skeleton.label()},
                              {"cells", built.grid.cells()},
                              {"trace_jsonl", trace_to_jsonl(o.result.trace)}});
  }
  report["optimizers"] = std::move(optimizers);
  report["cost_model"] = json{{"mean_relative_error", err_sum / opts_run.size()}};
  return report;
}

}  // namespace sgrid
