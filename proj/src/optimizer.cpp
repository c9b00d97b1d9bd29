#include "sgrid/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sgrid/rng.hpp"

namespace sgrid {

namespace {

EmpiricalCDF fit_from_sorted(const std::vector<uint64_t>& sorted_vals, size_t k_knots) {
  EmpiricalCDF cdf;
  if (sorted_vals.empty()) {
    cdf.knots.assign(2, 0);
    return cdf;
  }
  const uint64_t n = sorted_vals.size();
  cdf.knots.reserve(k_knots + 1);
  for (size_t j = 0; j <= k_knots; ++j) {
    uint64_t idx = static_cast<uint64_t>((static_cast<__uint128_t>(j) * (n - 1)) / k_knots);
    cdf.knots.push_back(sorted_vals[idx]);
  }
  return cdf;
}

std::string config_key(const Skeleton& s, const std::vector<uint32_t>& parts) {
  std::string key = s.label();
  for (uint32_t p : parts) {
    key += ':';
    key += std::to_string(p);
  }
  return key;
}

double parts_product(const Skeleton& s, const std::vector<uint32_t>& parts) {
  double prod = 1;
  for (uint32_t dim : s.grid_dims()) prod *= static_cast<double>(parts[dim]);
  return prod;
}

}  // namespace

uint64_t default_cell_budget(uint64_t region_rows) {
  uint64_t b = region_rows / 200;
  return std::clamp<uint64_t>(b, 64, 4000000);
}

OptimizerEnv::OptimizerEnv(const Dataset& ds, const std::vector<uint64_t>& region_rows,
                           std::vector<Query> queries, CostWeights weights, uint64_t cell_budget,
                           uint64_t seed, uint64_t sample_cap)
    : ds_(&ds), queries_(std::move(queries)), weights_(weights) {
  region_size_ = region_rows.size();
  budget_ = cell_budget ? cell_budget : default_cell_budget(region_size_);

  auto idx = sample_rows(region_rows.size(), sample_cap, seed);
  sample_.reserve(idx.size());
  for (uint64_t i : idx) sample_.push_back(region_rows[i]);

  sorted_.resize(ds.d);
  minmax_.assign(ds.d, {1, 0});
  for (uint32_t dim = 0; dim < ds.d; ++dim) {
    auto& v = sorted_[dim];
    v.reserve(sample_.size());
    const auto& col = ds.columns[dim];
    for (uint64_t r : sample_) v.push_back(col[r]);
    std::sort(v.begin(), v.end());
    if (!v.empty()) minmax_[dim] = {v.front(), v.back()};
  }

  filtered_.assign(ds.d, false);
  avg_sel_.assign(ds.d, 1.0);
  std::vector<double> sel_sum(ds.d, 0.0);
  std::vector<uint64_t> sel_cnt(ds.d, 0);
  for (const auto& q : queries_) {
    for (const auto& p : q.predicates) {
      filtered_[p.dim] = true;
      const auto& v = sorted_[p.dim];
      // matching fraction from the sorted sample
      auto lo = std::lower_bound(v.begin(), v.end(), p.lo);
      auto hi = std::upper_bound(v.begin(), v.end(), p.hi);
      double frac = v.empty() ? 0.0 : static_cast<double>(hi - lo) / static_cast<double>(v.size());
      sel_sum[p.dim] += frac;
      sel_cnt[p.dim]++;
    }
  }
  for (uint32_t dim = 0; dim < ds.d; ++dim)
    if (sel_cnt[dim]) avg_sel_[dim] = std::max(sel_sum[dim] / sel_cnt[dim], 1e-6);
}

AugmentedGrid OptimizerEnv::fit_sample_grid(const Skeleton& skeleton,
                                            const std::vector<uint32_t>& parts) const {
  skeleton.validate();
  const Dataset& ds = *ds_;
  AugmentedGrid g;
  g.skeleton = skeleton;
  g.parts = parts;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (skeleton.dims[i].kind == Strategy::Mapped)
      g.parts[i] = 1;
    else if (parts[i] < 1)
      throw InputError("fit_sample_grid: grid dims need at least one partition");
  }
  g.grid_dims = skeleton.grid_dims();
  g.strides.assign(g.grid_dims.size(), 1);
  for (size_t k = g.grid_dims.size(); k-- > 1;)
    g.strides[k - 1] = g.strides[k] * g.parts[g.grid_dims[k]];
  uint64_t cells = g.grid_dims.empty() ? 1 : g.strides[0] * g.parts[g.grid_dims[0]];

  g.n_rows = sample_.size();
  g.cdf.resize(ds.d);
  g.mapping.resize(ds.d);
  g.conditional.resize(ds.d);
  g.data_minmax = minmax_;

  if (sample_.empty()) {
    g.offsets.assign(cells + 1, 0);
    return g;
  }

  for (uint32_t dim = 0; dim < ds.d; ++dim)
    if (skeleton.dims[dim].kind == Strategy::Independent)
      g.cdf[dim] = fit_from_sorted(sorted_[dim], k_knots_);

  for (uint32_t dim = 0; dim < ds.d; ++dim) {
    const auto& s = skeleton.dims[dim];
    if (s.kind == Strategy::Mapped) {
      auto key = std::make_pair(dim, s.other);
      auto it = mapping_cache_.find(key);
      if (it == mapping_cache_.end()) {
        std::vector<uint64_t> mv, tv;
        mv.reserve(sample_.size());
        tv.reserve(sample_.size());
        for (uint64_t r : sample_) {
          mv.push_back(ds.columns[dim][r]);
          tv.push_back(ds.columns[s.other][r]);
        }
        it = mapping_cache_.emplace(key, fit_linear_bounds(mv, tv, dim, s.other)).first;
      }
      if (!it->second)
        throw InputError("fit_sample_grid: degenerate functional mapping for dim " +
                         std::to_string(dim));
      g.mapping[dim] = *it->second;
    } else if (s.kind == Strategy::Dependent) {
      uint32_t base = s.other;
      uint32_t pb = g.parts[base];
      auto key = std::make_tuple(dim, base, pb);
      auto it = conditional_cache_.find(key);
      if (it == conditional_cache_.end()) {
        ConditionalCDF cc;
        cc.dependent_dim = dim;
        cc.base_dim = base;
        cc.y_minmax.assign(pb, {1, 0});
        std::vector<std::vector<uint64_t>> buckets(pb);
        const auto& bcol = ds.columns[base];
        const auto& ycol = ds.columns[dim];
        EmpiricalCDF base_cdf = fit_from_sorted(sorted_[base], k_knots_);
        for (uint64_t r : sample_)
          buckets[base_cdf.partition(bcol[r], pb)].push_back(ycol[r]);
        size_t kk = std::max<size_t>(8, k_knots_ / pb);
        cc.per_base.reserve(pb);
        for (uint32_t b = 0; b < pb; ++b) {
          auto& bucket = buckets[b];
          std::sort(bucket.begin(), bucket.end());
          if (!bucket.empty()) cc.y_minmax[b] = {bucket.front(), bucket.back()};
          cc.per_base.push_back(fit_from_sorted(bucket, kk));
        }
        it = conditional_cache_.emplace(key, std::move(cc)).first;
      }
      g.conditional[dim] = it->second;
    }
  }

  std::vector<uint64_t> cell_of(sample_.size());
  std::vector<uint64_t> point(ds.d);
  for (size_t i = 0; i < sample_.size(); ++i) {
    uint64_t r = sample_[i];
    for (uint32_t dim = 0; dim < ds.d; ++dim) point[dim] = ds.columns[dim][r];
    cell_of[i] = g.cell_index(g.cell_coordinate(point));
  }
  g.offsets.assign(cells + 1, 0);
  for (uint64_t c : cell_of) g.offsets[c + 1]++;
  for (uint64_t c = 0; c < cells; ++c) g.offsets[c + 1] += g.offsets[c];
  return g;
}

double estimate_query_cost(const Query& q, const AugmentedGrid& sample_grid, double scale,
                           const CostWeights& w) {
  auto ranges = intersecting_cell_ranges(sample_grid, q);
  uint64_t scanned = 0;
  for (const auto& r : ranges)
    if (!r.exact) scanned += r.end - r.start;
  return cost_formula(static_cast<double>(ranges.size()),
                      static_cast<double>(scanned) * scale,
                      static_cast<double>(q.predicates.size()), w);
}

CostWeights fit_cost_weights(const std::vector<double>& cell_ranges,
                             const std::vector<double>& point_dims,
                             const std::vector<double>& seconds) {
  double a11 = 0, a12 = 0, a22 = 0, b1 = 0, b2 = 0;
  for (size_t i = 0; i < cell_ranges.size(); ++i) {
    a11 += cell_ranges[i] * cell_ranges[i];
    a12 += cell_ranges[i] * point_dims[i];
    a22 += point_dims[i] * point_dims[i];
    b1 += cell_ranges[i] * seconds[i];
    b2 += point_dims[i] * seconds[i];
  }
  CostWeights fallback;
  double det = a11 * a22 - a12 * a12;
  if (!(det > 1e-12 * std::max(1.0, a11 * a22))) return fallback;
  double w0 = (b1 * a22 - b2 * a12) / det;
  double w1 = (b2 * a11 - b1 * a12) / det;
  if (!std::isfinite(w0) || !std::isfinite(w1)) return fallback;
  return {std::max(w0, 0.0), std::max(w1, 0.0)};
}

double OptimizerEnv::average_cost(const Skeleton& skeleton,
                                  const std::vector<uint32_t>& parts) const {
  std::string key = config_key(skeleton, parts);
  auto it = cost_cache_.find(key);
  if (it != cost_cache_.end()) return it->second;
  AugmentedGrid grid = fit_sample_grid(skeleton, parts);
  double scale = sample_.empty()
                     ? 0.0
                     : static_cast<double>(region_size_) / static_cast<double>(sample_.size());
  double total = 0;
  for (const auto& q : queries_) total += estimate_query_cost(q, grid, scale, weights_);
  double avg = queries_.empty() ? 0.0 : total / static_cast<double>(queries_.size());
  cost_cache_.emplace(std::move(key), avg);
  return avg;
}

std::optional<FunctionalMapping> OptimizerEnv::try_mapping(uint32_t mapped_dim,
                                                           uint32_t target_dim,
                                                           double max_error_frac) const {
  auto key = std::make_pair(mapped_dim, target_dim);
  auto it = mapping_cache_.find(key);
  if (it == mapping_cache_.end()) {
    std::vector<uint64_t> mv, tv;
    mv.reserve(sample_.size());
    tv.reserve(sample_.size());
    for (uint64_t r : sample_) {
      mv.push_back(ds_->columns[mapped_dim][r]);
      tv.push_back(ds_->columns[target_dim][r]);
    }
    it = mapping_cache_.emplace(key, fit_linear_bounds(mv, tv, mapped_dim, target_dim)).first;
  }
  if (!it->second) return std::nullopt;
  auto [mn, mx] = minmax_[target_dim];
  double width = static_cast<double>(mx - mn);
  if (it->second->e_lo + it->second->e_hi > max_error_frac * width) return std::nullopt;
  return it->second;
}

double OptimizerEnv::probe_empty_fraction(uint32_t x, uint32_t y, uint32_t probe) const {
  if (sample_.empty()) return 0.0;
  EmpiricalCDF cx = fit_from_sorted(sorted_[x], 64);
  EmpiricalCDF cy = fit_from_sorted(sorted_[y], 64);
  std::vector<uint8_t> occupied(static_cast<size_t>(probe) * probe, 0);
  const auto& colx = ds_->columns[x];
  const auto& coly = ds_->columns[y];
  for (uint64_t r : sample_)
    occupied[cx.partition(colx[r], probe) * probe + cy.partition(coly[r], probe)] = 1;
  size_t filled = 0;
  for (uint8_t o : occupied) filled += o;
  return 1.0 - static_cast<double>(filled) / static_cast<double>(occupied.size());
}

Skeleton initialize_skeleton(const OptimizerEnv& env) {
  const uint32_t d = env.dataset().d;
  Skeleton s;
  s.dims.assign(d, {Strategy::Independent, 0});
  std::vector<bool> locked(d, false);  // referenced as target/base

  for (uint32_t x = 0; x < d; ++x) {
    if (locked[x]) continue;
    auto eligible = [&](uint32_t y) {
      return y != x && s.dims[y].kind == Strategy::Independent;
    };

    // Tight monotonic correlation: functional mapping, best relative error.
    uint32_t best_target = d;
    double best_err = std::numeric_limits<double>::infinity();
    for (uint32_t y = 0; y < d; ++y) {
      if (!eligible(y)) continue;
      auto fm = env.try_mapping(x, y, 0.10);
      if (!fm) continue;
      double err = fm->e_lo + fm->e_hi;
      if (err < best_err) {
        best_err = err;
        best_target = y;
      }
    }
    if (best_target < d) {
      s.dims[x] = {Strategy::Mapped, best_target};
      locked[best_target] = true;
      continue;
    }

    // Loose/generic correlation: conditional CDF when independent
    // partitioning leaves more than a quarter of probe cells empty.
    uint32_t best_base = d;
    double best_frac = 0.25;
    for (uint32_t y = 0; y < d; ++y) {
      if (!eligible(y)) continue;
      double frac = env.probe_empty_fraction(x, y, 16);
      if (frac > best_frac) {
        best_frac = frac;
        best_base = y;
      }
    }
    if (best_base < d) {
      s.dims[x] = {Strategy::Dependent, best_base};
      locked[best_base] = true;
    }
  }
  s.validate();
  return s;
}

namespace {

std::vector<bool> referenced_dims(const Skeleton& s) {
  std::vector<bool> ref(s.dims.size(), false);
  for (const auto& ds : s.dims)
    if (ds.kind != Strategy::Independent) ref[ds.other] = true;
  return ref;
}

// Scale flexible partition counts down until the product fits the budget.
void project_to_budget(const Skeleton& s, std::vector<uint32_t>& parts,
                       const std::vector<bool>& flexible, uint64_t budget) {
  for (uint32_t dim : s.grid_dims())
    parts[dim] = std::max<uint32_t>(1, std::min<uint32_t>(parts[dim], budget));
  for (int guard = 0; guard < 64; ++guard) {
    double prod = parts_product(s, parts);
    if (prod <= static_cast<double>(budget)) return;
    double factor = std::pow(static_cast<double>(budget) / prod, 1.0 / 6.0);
    factor = std::min(factor, 0.99);
    bool changed = false;
    for (uint32_t dim : s.grid_dims()) {
      if (!flexible[dim] || parts[dim] <= 1) continue;
      uint32_t next = std::max<uint32_t>(
          1, static_cast<uint32_t>(std::floor(parts[dim] * factor)));
      if (next < parts[dim]) {
        parts[dim] = next;
        changed = true;
      }
    }
    if (!changed) {
      // All flexible dims at 1; shrink any remaining grid dim.
      for (uint32_t dim : s.grid_dims()) {
        if (parts[dim] > 1) {
          parts[dim]--;
          changed = true;
          break;
        }
      }
      if (!changed) return;
    }
  }
}

std::vector<bool> flexible_dims(const OptimizerEnv& env, const Skeleton& s) {
  auto ref = referenced_dims(s);
  std::vector<bool> flex(s.dims.size(), false);
  for (uint32_t dim : s.grid_dims())
    flex[dim] = env.dim_filtered(dim) || ref[dim];
  return flex;
}

}  // namespace

std::vector<uint32_t> initialize_partitions(const OptimizerEnv& env, const Skeleton& skeleton) {
  const uint32_t d = env.dataset().d;
  std::vector<uint32_t> parts(d, 1);
  auto grid_dims = skeleton.grid_dims();
  auto ref = referenced_dims(skeleton);

  std::vector<double> weight(d, 0.0);
  double min_filtered_weight = std::numeric_limits<double>::infinity();
  std::vector<uint32_t> active;
  for (uint32_t dim : grid_dims) {
    if (env.dim_filtered(dim)) {
      weight[dim] = 1.0 / env.avg_selectivity(dim);
      min_filtered_weight = std::min(min_filtered_weight, weight[dim]);
      active.push_back(dim);
    }
  }
  for (uint32_t dim : grid_dims) {
    if (!env.dim_filtered(dim) && ref[dim]) {
      weight[dim] = std::isfinite(min_filtered_weight) ? min_filtered_weight : 1.0;
      active.push_back(dim);
    }
  }
  if (active.empty()) return parts;

  double log_sum = 0;
  for (uint32_t dim : active) log_sum += std::log(weight[dim]);
  double log_scale =
      (std::log(static_cast<double>(env.cell_budget())) - log_sum) / static_cast<double>(active.size());
  for (uint32_t dim : active) {
    double p = weight[dim] * std::exp(log_scale);
    parts[dim] = std::max<uint32_t>(
        1, static_cast<uint32_t>(std::llround(std::min(p, 4.0e6))));
  }
  project_to_budget(skeleton, parts, flexible_dims(env, skeleton), env.cell_budget());
  return parts;
}

std::vector<uint32_t> gradient_step_partitions(const OptimizerEnv& env, const Skeleton& skeleton,
                                               std::vector<uint32_t> parts, double& cost) {
  auto flex = flexible_dims(env, skeleton);
  std::vector<uint32_t> flex_list;
  for (uint32_t dim : skeleton.grid_dims())
    if (flex[dim]) flex_list.push_back(dim);
  if (flex_list.empty()) return parts;

  const double c0 = cost;
  std::vector<double> grad(flex_list.size(), 0.0);
  for (size_t k = 0; k < flex_list.size(); ++k) {
    uint32_t dim = flex_list[k];
    uint32_t p = parts[dim];
    uint32_t pp = std::max<uint32_t>(p + 1, static_cast<uint32_t>(std::llround(p * 1.25)));
    uint32_t pm = p > 1 ? std::min<uint32_t>(p - 1, static_cast<uint32_t>(std::llround(p / 1.25)))
                        : 1;
    pm = std::max<uint32_t>(pm, 1);
    auto probe = parts;
    probe[dim] = pp;
    double cp = env.average_cost(skeleton, probe);
    double cm = c0;
    double denom = std::log(static_cast<double>(pp)) - std::log(static_cast<double>(p));
    if (pm < p) {
      probe[dim] = pm;
      cm = env.average_cost(skeleton, probe);
      denom = std::log(static_cast<double>(pp)) - std::log(static_cast<double>(pm));
    }
    grad[k] = denom > 0 ? (cp - cm) / denom : 0.0;
  }

  double norm = 0;
  for (double g : grad) norm += g * g;
  norm = std::sqrt(norm);
  if (norm == 0) return parts;

  double step = std::log(2.0);
  for (int halving = 0; halving < 8; ++halving) {
    auto next = parts;
    bool moved = false;
    for (size_t k = 0; k < flex_list.size(); ++k) {
      uint32_t dim = flex_list[k];
      double logp = std::log(static_cast<double>(parts[dim])) - grad[k] / norm * step;
      uint32_t p = std::max<uint32_t>(
          1, static_cast<uint32_t>(std::llround(std::exp(std::min(logp, 22.0)))));
      next[dim] = p;
      moved = moved || p != parts[dim];
    }
    if (!moved) break;
    project_to_budget(skeleton, next, flex, env.cell_budget());
    if (next == parts) break;
    double c = env.average_cost(skeleton, next);
    if (c <= c0) {
      cost = c;
      return next;
    }
    step /= 2;
  }
  return parts;
}

std::vector<Skeleton> one_hop_skeletons(const Skeleton& s) {
  std::vector<Skeleton> out;
  const uint32_t d = s.dims.size();
  auto ref = referenced_dims(s);
  for (uint32_t x = 0; x < d; ++x) {
    const auto& cur = s.dims[x];
    std::vector<DimStrategy> candidates;
    if (cur.kind != Strategy::Independent) candidates.push_back({Strategy::Independent, 0});
    if (!ref[x]) {
      for (uint32_t y = 0; y < d; ++y) {
        if (y == x || s.dims[y].kind != Strategy::Independent) continue;
        candidates.push_back({Strategy::Mapped, y});
        candidates.push_back({Strategy::Dependent, y});
      }
    }
    for (const auto& cand : candidates) {
      if (cand == cur) continue;
      Skeleton next = s;
      next.dims[x] = cand;
      try {
        next.validate();
      } catch (const InputError&) {
        continue;
      }
      out.push_back(std::move(next));
    }
  }
  return out;
}

std::pair<Skeleton, std::vector<uint32_t>> local_skeleton_search(const OptimizerEnv& env,
                                                                 Skeleton skeleton,
                                                                 std::vector<uint32_t> parts,
                                                                 double& cost) {
  Skeleton best_s = skeleton;
  std::vector<uint32_t> best_p = parts;
  double best_c = cost;
  for (const auto& cand : one_hop_skeletons(skeleton)) {
    auto cand_parts = parts;
    for (uint32_t dim = 0; dim < cand.dims.size(); ++dim) {
      if (cand.dims[dim].kind == Strategy::Mapped)
        cand_parts[dim] = 1;
      else if (skeleton.dims[dim].kind == Strategy::Mapped)
        cand_parts[dim] = 1;  // newly entered the grid; GD grows it later
    }
    double c;
    try {
      c = env.average_cost(cand, cand_parts);
    } catch (const InputError&) {
      continue;  // degenerate mapping on this data
    }
    if (c < best_c) {
      best_c = c;
      best_s = cand;
      best_p = cand_parts;
    }
  }
  cost = best_c;
  return {std::move(best_s), std::move(best_p)};
}

namespace {

// Coordinate-descent refinement of P until no single-dimension move helps:
// the loop's exit condition is "a minimum average query time", so the
// returned configuration should actually be one.
void polish_partitions(const OptimizerEnv& env, const Skeleton& s, std::vector<uint32_t>& parts,
                       double& cost) {
  auto flex = flexible_dims(env, s);
  std::vector<uint32_t> flex_list;
  for (uint32_t dim : s.grid_dims())
    if (flex[dim]) flex_list.push_back(dim);
  if (flex_list.empty()) return;
  for (int pass = 0; pass < 12; ++pass) {
    bool improved = false;
    for (uint32_t dim : flex_list) {
      uint32_t p = parts[dim];
      std::vector<uint32_t> candidates{p + 1,
                                       std::max<uint32_t>(1, p - 1),
                                       std::max<uint32_t>(p + 1, static_cast<uint32_t>(p * 1.25)),
                                       std::max<uint32_t>(1, static_cast<uint32_t>(p / 1.25))};
      for (uint32_t cand : candidates) {
        if (cand == parts[dim]) continue;
        auto next = parts;
        next[dim] = cand;
        project_to_budget(s, next, flex, env.cell_budget());
        if (next == parts) continue;
        double c = env.average_cost(s, next);
        if (c < cost) {
          cost = c;
          parts = std::move(next);
          improved = true;
        }
      }
    }
    if (!improved) break;
  }
}

OptResult optimize_loop(const OptimizerEnv& env, Skeleton s, bool search_skeletons) {
  std::vector<uint32_t> parts = initialize_partitions(env, s);
  double cost = env.average_cost(s, parts);
  OptResult res;
  res.trace.push_back({0, s.label(), parts, cost});
  Skeleton best_s = s;
  std::vector<uint32_t> best_p = parts;
  double best_c = cost;

  int streak = 0;
  double prev = cost;
  for (int iter = 1; iter <= 30; ++iter) {
    parts = gradient_step_partitions(env, s, std::move(parts), cost);
    if (search_skeletons) {
      auto [ns, np] = local_skeleton_search(env, s, parts, cost);
      s = std::move(ns);
      parts = std::move(np);
    }
    res.trace.push_back({iter, s.label(), parts, cost});
    if (cost < best_c) {
      best_c = cost;
      best_s = s;
      best_p = parts;
    }
    double rel = prev > 0 ? (prev - cost) / prev : 0.0;
    streak = rel < 0.01 ? streak + 1 : 0;
    prev = cost;
    if (streak >= 3) break;
  }
  polish_partitions(env, best_s, best_p, best_c);
  res.trace.push_back({static_cast<int>(res.trace.size()), best_s.label(), best_p, best_c});
  res.config = {std::move(best_s), std::move(best_p), best_c};
  return res;
}

}  // namespace

OptResult adaptive_gradient_descent(const OptimizerEnv& env) {
  return optimize_loop(env, initialize_skeleton(env), true);
}

OptResult gd_only(const OptimizerEnv& env) {
  return optimize_loop(env, initialize_skeleton(env), false);
}

OptResult gd_fixed_skeleton(const OptimizerEnv& env, Skeleton s) {
  return optimize_loop(env, std::move(s), false);
}

OptResult agd_naive_init(const OptimizerEnv& env) {
  Skeleton s;
  s.dims.assign(env.dataset().d, {Strategy::Independent, 0});
  return optimize_loop(env, std::move(s), true);
}

OptResult random_restart_hillclimb(const OptimizerEnv& env, int iters, uint64_t seed) {
  Rng rng(seed);
  Skeleton s = initialize_skeleton(env);
  std::vector<uint32_t> parts = initialize_partitions(env, s);
  double cost = env.average_cost(s, parts);

  OptResult res;
  res.trace.push_back({0, s.label(), parts, cost});
  Skeleton best_s = s;
  std::vector<uint32_t> best_p = parts;
  double best_c = cost;

  static constexpr double kFactors[] = {0.5, 0.75, 1.25, 1.5, 2.0};
  auto perturb_parts = [&](const Skeleton& sk, std::vector<uint32_t> p) {
    auto flex = flexible_dims(env, sk);
    std::vector<uint32_t> flex_list;
    for (uint32_t dim : sk.grid_dims())
      if (flex[dim]) flex_list.push_back(dim);
    if (!flex_list.empty()) {
      uint32_t dim = flex_list[rng.next_below(flex_list.size())];
      double f = kFactors[rng.next_below(5)];
      p[dim] = std::max<uint32_t>(1, static_cast<uint32_t>(std::llround(p[dim] * f)));
      project_to_budget(sk, p, flex, env.cell_budget());
    }
    return p;
  };

  int stale = 0;
  for (int t = 1; t <= iters; ++t) {
    Skeleton cand_s = s;
    std::vector<uint32_t> cand_p = parts;
    if (rng.uniform01() < 0.5) {
      cand_p = perturb_parts(s, parts);
    } else {
      auto hops = one_hop_skeletons(s);
      if (!hops.empty()) {
        cand_s = hops[rng.next_below(hops.size())];
        for (uint32_t dim = 0; dim < cand_s.dims.size(); ++dim)
          if (cand_s.dims[dim].kind == Strategy::Mapped ||
              s.dims[dim].kind == Strategy::Mapped)
            cand_p[dim] = 1;
      }
    }
    double c;
    try {
      c = env.average_cost(cand_s, cand_p);
    } catch (const InputError&) {
      continue;
    }
    res.trace.push_back({t, cand_s.label(), cand_p, c});
    if (c < cost) {
      s = std::move(cand_s);
      parts = std::move(cand_p);
      cost = c;
      stale = 0;
      if (c < best_c) {
        best_c = c;
        best_s = s;
        best_p = parts;
      }
    } else if (++stale >= 10) {
      // Restart from a random perturbation of the best seen so far.
      s = best_s;
      parts = perturb_parts(best_s, perturb_parts(best_s, best_p));
      cost = env.average_cost(s, parts);
      stale = 0;
    }
  }
  res.config = {std::move(best_s), std::move(best_p), best_c};
  return res;
}

CostWeights calibrate_cost_model(const Dataset& store, const AugmentedGrid& pilot,
                                 uint64_t region_offset, const std::vector<Query>& pilot_queries,
                                 int repeats) {
  using clock = std::chrono::steady_clock;
  std::vector<double> rf, sf, tf;
  for (const auto& q : pilot_queries) {
    ScanStats st;
    execute_region_query(pilot, store, region_offset, q, &st);
    double best = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < repeats; ++rep) {
      auto t0 = clock::now();
      volatile uint64_t sink = execute_region_query(pilot, store, region_offset, q);
      (void)sink;
      auto t1 = clock::now();
      best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    rf.push_back(static_cast<double>(st.ranges_visited));
    sf.push_back(static_cast<double>(st.point_dims_scanned));
    tf.push_back(best);
  }
  return fit_cost_weights(rf, sf, tf);
}

std::string trace_to_jsonl(const OptTrace& trace) {
  std::string out;
  for (const auto& e : trace) {
    nlohmann::json j{{"iteration", e.iteration},
                     {"skeleton", e.skeleton},
                     {"parts", e.parts},
                     {"cost", e.cost}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace sgrid
