#include "sgrid/augmented_grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace sgrid {

EmpiricalCDF EmpiricalCDF::fit(std::vector<uint64_t> values, size_t k_knots) {
  EmpiricalCDF cdf;
  if (values.empty()) {
    cdf.knots.assign(2, 0);
    return cdf;
  }
  std::sort(values.begin(), values.end());
  const uint64_t n = values.size();
  cdf.knots.reserve(k_knots + 1);
  for (size_t j = 0; j <= k_knots; ++j) {
    uint64_t idx = static_cast<uint64_t>((static_cast<__uint128_t>(j) * (n - 1)) / k_knots);
    cdf.knots.push_back(values[idx]);
  }
  return cdf;
}

double EmpiricalCDF::eval(uint64_t x) const {
  const size_t k = knots.size() - 1;
  // First knot >= x; everything before it is strictly below x.
  auto it = std::lower_bound(knots.begin(), knots.end(), x);
  if (it == knots.begin()) return 0.0;
  if (it == knots.end()) return 1.0;
  size_t i = static_cast<size_t>(it - knots.begin());
  size_t j = i - 1;
  double lo = static_cast<double>(knots[j]);
  double hi = static_cast<double>(knots[i]);
  double t = hi > lo ? (static_cast<double>(x) - lo) / (hi - lo) : 1.0;
  return (static_cast<double>(j) + t * static_cast<double>(i - j)) / static_cast<double>(k);
}

uint32_t EmpiricalCDF::partition(uint64_t x, uint32_t p) const {
  double f = eval(x);
  auto part = static_cast<uint32_t>(f * static_cast<double>(p));
  return std::min(part, p - 1);
}

std::optional<RangePredicate> FunctionalMapping::induce(const RangePredicate& on_mapped,
                                                        uint64_t target_domain) const {
  double y0 = static_cast<double>(on_mapped.lo);
  double y1 = static_cast<double>(on_mapped.hi);
  if (slope < 0) std::swap(y0, y1);
  double x0 = predict(y0) - e_lo;
  double x1 = predict(y1) + e_hi;
  double lo = std::ceil(x0);
  double hi = std::floor(x1);
  if (hi < 0 || lo > hi) return std::nullopt;
  RangePredicate out;
  out.dim = target_dim;
  out.lo = lo < 0 ? 0 : static_cast<uint64_t>(lo);
  uint64_t dom_max = target_domain == 0 ? std::numeric_limits<uint64_t>::max() : target_domain - 1;
  out.hi = hi > static_cast<double>(dom_max) ? dom_max : static_cast<uint64_t>(hi);
  if (out.lo > out.hi) return std::nullopt;
  return out;
}

std::optional<FunctionalMapping> fit_linear_bounds(const std::vector<uint64_t>& mapped_vals,
                                                   const std::vector<uint64_t>& target_vals,
                                                   uint32_t mapped_dim, uint32_t target_dim) {
  const size_t n = mapped_vals.size();
  if (n == 0 || target_vals.size() != n) return std::nullopt;
  double mean_y = 0, mean_x = 0;
  for (size_t i = 0; i < n; ++i) {
    mean_y += static_cast<double>(mapped_vals[i]);
    mean_x += static_cast<double>(target_vals[i]);
  }
  mean_y /= static_cast<double>(n);
  mean_x /= static_cast<double>(n);
  double var_y = 0, cov = 0;
  for (size_t i = 0; i < n; ++i) {
    double dy = static_cast<double>(mapped_vals[i]) - mean_y;
    double dx = static_cast<double>(target_vals[i]) - mean_x;
    var_y += dy * dy;
    cov += dy * dx;
  }
  if (var_y == 0) return std::nullopt;  // degenerate mapped dim
  FunctionalMapping fm;
  fm.mapped_dim = mapped_dim;
  fm.target_dim = target_dim;
  fm.slope = cov / var_y;
  if (fm.slope == 0) return std::nullopt;
  fm.intercept = mean_x - fm.slope * mean_y;
  double e_lo = 0, e_hi = 0;
  for (size_t i = 0; i < n; ++i) {
    double r = fm.predict(static_cast<double>(mapped_vals[i])) - static_cast<double>(target_vals[i]);
    e_lo = std::max(e_lo, r);    // overprediction
    e_hi = std::max(e_hi, -r);   // underprediction
  }
  fm.e_lo = e_lo;
  fm.e_hi = e_hi;
  return fm;
}

std::optional<FunctionalMapping> fit_functional_mapping(const std::vector<uint64_t>& mapped_vals,
                                                        const std::vector<uint64_t>& target_vals,
                                                        uint32_t mapped_dim, uint32_t target_dim,
                                                        double max_error_frac) {
  auto fm = fit_linear_bounds(mapped_vals, target_vals, mapped_dim, target_dim);
  if (!fm) return std::nullopt;
  auto [mn, mx] = std::minmax_element(target_vals.begin(), target_vals.end());
  double width = static_cast<double>(*mx - *mn);
  if (fm->e_lo + fm->e_hi > max_error_frac * width) return std::nullopt;
  return fm;
}

void Skeleton::validate() const {
  const size_t d = dims.size();
  if (d == 0) throw InputError("skeleton: no dimensions");
  bool any_independent = false;
  for (size_t i = 0; i < d; ++i) {
    const auto& s = dims[i];
    switch (s.kind) {
      case Strategy::Independent:
        any_independent = true;
        break;
      case Strategy::Mapped:
      case Strategy::Dependent:
        if (s.other >= d || s.other == i)
          throw InputError("skeleton: bad target/base dimension");
        if (dims[s.other].kind != Strategy::Independent)
          throw InputError("skeleton: targets and bases must be independent");
        break;
    }
  }
  if (!any_independent) throw InputError("skeleton: at least one independent dimension required");
}

std::vector<uint32_t> Skeleton::grid_dims() const {
  std::vector<uint32_t> out;
  for (uint32_t i = 0; i < dims.size(); ++i)
    if (dims[i].kind != Strategy::Mapped) out.push_back(i);
  return out;
}

size_t Skeleton::mapping_count() const {
  size_t c = 0;
  for (const auto& s : dims) c += s.kind == Strategy::Mapped;
  return c;
}

size_t Skeleton::conditional_count() const {
  size_t c = 0;
  for (const auto& s : dims) c += s.kind == Strategy::Dependent;
  return c;
}

std::string Skeleton::label() const {
  std::string out = "[";
  for (size_t i = 0; i < dims.size(); ++i) {
    if (i) out += ", ";
    out += "X" + std::to_string(i);
    if (dims[i].kind == Strategy::Mapped) out += "->X" + std::to_string(dims[i].other);
    if (dims[i].kind == Strategy::Dependent) out += "|X" + std::to_string(dims[i].other);
  }
  return out + "]";
}

std::vector<uint32_t> AugmentedGrid::cell_coordinate(const std::vector<uint64_t>& point) const {
  std::vector<uint32_t> coords(grid_dims.size(), 0);
  for (size_t k = 0; k < grid_dims.size(); ++k) {
    uint32_t dim = grid_dims[k];
    uint32_t p = parts[dim];
    const auto& s = skeleton.dims[dim];
    if (s.kind == Strategy::Independent) {
      coords[k] = cdf[dim]->partition(point[dim], p);
    } else {  // Dependent
      uint32_t b = cdf[s.other]->partition(point[s.other], parts[s.other]);
      coords[k] = conditional[dim]->per_base[b].partition(point[dim], p);
    }
  }
  return coords;
}

uint64_t AugmentedGrid::cell_index(const std::vector<uint32_t>& coords) const {
  uint64_t idx = 0;
  for (size_t k = 0; k < coords.size(); ++k) idx += coords[k] * strides[k];
  return idx;
}

GridBuildResult build_grid(const Dataset& ds, std::vector<uint64_t> region_rows,
                           const Skeleton& skeleton, const std::vector<uint32_t>& parts,
                           size_t k_knots) {
  skeleton.validate();
  if (parts.size() != skeleton.dims.size())
    throw InputError("build_grid: parts size does not match skeleton");
  AugmentedGrid g;
  g.skeleton = skeleton;
  g.parts = parts;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (skeleton.dims[i].kind == Strategy::Mapped)
      g.parts[i] = 1;
    else if (parts[i] < 1)
      throw InputError("build_grid: grid dims need at least one partition");
  }
  g.grid_dims = skeleton.grid_dims();
  g.strides.assign(g.grid_dims.size(), 1);
  for (size_t k = g.grid_dims.size(); k-- > 1;)
    g.strides[k - 1] = g.strides[k] * g.parts[g.grid_dims[k]];
  uint64_t cells = g.grid_dims.empty() ? 1 : g.strides[0] * g.parts[g.grid_dims[0]];

  const uint64_t nr = region_rows.size();
  g.n_rows = nr;
  g.cdf.resize(ds.d);
  g.mapping.resize(ds.d);
  g.conditional.resize(ds.d);
  g.data_minmax.assign(ds.d, {1, 0});
  for (uint32_t dim = 0; dim < ds.d; ++dim) {
    uint64_t mn = std::numeric_limits<uint64_t>::max(), mx = 0;
    const auto& col = ds.columns[dim];
    for (uint64_t r : region_rows) {
      mn = std::min(mn, col[r]);
      mx = std::max(mx, col[r]);
    }
    if (nr > 0) g.data_minmax[dim] = {mn, mx};
  }

  if (nr == 0) {
    g.offsets.assign(cells + 1, 0);
    return {std::move(g), std::move(region_rows)};
  }

  auto gather = [&](uint32_t dim) {
    std::vector<uint64_t> vals;
    vals.reserve(nr);
    const auto& col = ds.columns[dim];
    for (uint64_t r : region_rows) vals.push_back(col[r]);
    return vals;
  };

  // Independent CDFs first: conditional fits need the base partitions.
  for (uint32_t dim = 0; dim < ds.d; ++dim)
    if (skeleton.dims[dim].kind == Strategy::Independent)
      g.cdf[dim] = EmpiricalCDF::fit(gather(dim), k_knots);

  for (uint32_t dim = 0; dim < ds.d; ++dim) {
    const auto& s = skeleton.dims[dim];
    if (s.kind == Strategy::Mapped) {
      auto fm = fit_linear_bounds(gather(dim), gather(s.other), dim, s.other);
      if (!fm) throw InputError("build_grid: degenerate functional mapping for dim " +
                                std::to_string(dim));
      g.mapping[dim] = *fm;
    } else if (s.kind == Strategy::Dependent) {
      uint32_t base = s.other;
      uint32_t pb = g.parts[base];
      ConditionalCDF cc;
      cc.dependent_dim = dim;
      cc.base_dim = base;
      cc.y_minmax.assign(pb, {1, 0});
      std::vector<std::vector<uint64_t>> buckets(pb);
      const auto& bcol = ds.columns[base];
      const auto& ycol = ds.columns[dim];
      for (uint64_t r : region_rows)
        buckets[g.cdf[base]->partition(bcol[r], pb)].push_back(ycol[r]);
      size_t kk = std::max<size_t>(8, k_knots / pb);
      cc.per_base.reserve(pb);
      for (uint32_t b = 0; b < pb; ++b) {
        if (!buckets[b].empty()) {
          auto [mn, mx] = std::minmax_element(buckets[b].begin(), buckets[b].end());
          cc.y_minmax[b] = {*mn, *mx};
        }
        cc.per_base.push_back(EmpiricalCDF::fit(std::move(buckets[b]), kk));
      }
      g.conditional[dim] = std::move(cc);
    }
  }

  // Stable counting sort of rows by cell index.
  std::vector<uint64_t> cell_of(nr);
  std::vector<uint64_t> point(ds.d);
  for (uint64_t i = 0; i < nr; ++i) {
    uint64_t r = region_rows[i];
    for (uint32_t dim = 0; dim < ds.d; ++dim) point[dim] = ds.columns[dim][r];
    cell_of[i] = g.cell_index(g.cell_coordinate(point));
  }
  std::vector<uint64_t> counts(cells + 1, 0);
  for (uint64_t c : cell_of) counts[c + 1]++;
  for (uint64_t c = 0; c < cells; ++c) counts[c + 1] += counts[c];
  g.offsets = counts;
  std::vector<uint64_t> out_rows(nr);
  std::vector<uint64_t> cursor(counts.begin(), counts.end() - 1);
  for (uint64_t i = 0; i < nr; ++i) out_rows[cursor[cell_of[i]]++] = region_rows[i];
  return {std::move(g), std::move(out_rows)};
}

namespace {

struct LevelPlan {
  uint32_t dim = 0;
  Strategy strat = Strategy::Independent;
  uint32_t p = 1;
  uint64_t stride = 1;
  uint32_t c_lo = 0, c_hi = 0;  // iteration interval (provisional for late-base dependents)
  int base_level = -1;          // for dependent dims
  bool base_is_later = false;
  // Per-base tables for dependent dims, indexed by base coordinate.
  std::vector<uint8_t> base_skip;
  std::vector<std::pair<uint32_t, uint32_t>> base_range;
  // Levels of dependent dims (earlier in order) whose base is this level.
  std::vector<int> checks;
};

struct Enumerator {
  std::vector<LevelPlan> levels;
  std::vector<uint32_t> chosen;
  std::vector<std::pair<uint64_t, uint64_t>> runs;  // inclusive cell-index runs

  void emit(uint64_t c1, uint64_t c2) {
    if (!runs.empty() && runs.back().second + 1 == c1)
      runs.back().second = c2;
    else
      runs.emplace_back(c1, c2);
  }

  bool admissible(size_t level, uint32_t c) const {
    const auto& lp = levels[level];
    if (lp.strat == Strategy::Dependent && lp.base_is_later) return true;  // checked at base
    for (int dep : lp.checks) {
      const auto& dl = levels[dep];
      if (dl.base_skip[c]) return false;
      auto [ylo, yhi] = dl.base_range[c];
      if (chosen[dep] < ylo || chosen[dep] > yhi) return false;
    }
    return true;
  }

  void recurse(size_t level, uint64_t prefix) {
    auto& lp = levels[level];
    uint32_t lo = lp.c_lo, hi = lp.c_hi;
    if (lp.strat == Strategy::Dependent && !lp.base_is_later && lp.base_level >= 0) {
      uint32_t b = chosen[lp.base_level];
      if (lp.base_skip[b]) return;
      lo = lp.base_range[b].first;
      hi = lp.base_range[b].second;
    }
    if (lo > hi) return;
    const bool last = level + 1 == levels.size();
    if (last) {
      if (lp.checks.empty()) {
        if (lp.strat == Strategy::Dependent && lp.base_is_later) return;  // cannot happen
        emit(prefix + lo, prefix + hi);
      } else {
        // This level is a base constrained by earlier dependents; filter cells.
        for (uint32_t c = lo; c <= hi; ++c) {
          chosen[level] = c;
          if (admissible(level, c)) emit(prefix + c, prefix + c);
        }
      }
      return;
    }
    for (uint32_t c = lo; c <= hi; ++c) {
      chosen[level] = c;
      if (!admissible(level, c)) continue;
      recurse(level + 1, prefix + c * lp.stride);
    }
  }
};

}  // namespace

std::vector<PhysicalRange> intersecting_cell_ranges(const AugmentedGrid& grid, const Query& q) {
  std::vector<PhysicalRange> out;
  if (grid.n_rows == 0) return out;

  const size_t d = grid.skeleton.dims.size();

  // Effective per-dim predicates: the query's own, conjoined with filters
  // induced from mapped dims onto their targets.
  std::vector<std::optional<RangePredicate>> pred(d);
  bool has_mapped_pred = false;
  for (const auto& p : q.predicates) {
    if (p.dim >= d) throw InputError("query dim out of range for grid");
    // No data in the predicate's range anywhere in this region.
    auto [mn, mx] = grid.data_minmax[p.dim];
    if (mn > mx || p.hi < mn || p.lo > mx) return out;
    pred[p.dim] = p;
  }
  for (const auto& p : q.predicates) {
    if (grid.skeleton.dims[p.dim].kind != Strategy::Mapped) continue;
    has_mapped_pred = true;
    const auto& fm = *grid.mapping[p.dim];
    auto induced = fm.induce(p, 0);
    if (!induced) return out;
    auto& tp = pred[fm.target_dim];
    if (tp) {
      tp->lo = std::max(tp->lo, induced->lo);
      tp->hi = std::min(tp->hi, induced->hi);
      if (tp->lo > tp->hi) return out;
    } else {
      tp = *induced;
      tp->dim = fm.target_dim;
    }
  }

  // Plan one enumeration level per grid dim, in mixed-radix order.
  std::vector<int> level_of_dim(d, -1);
  std::vector<LevelPlan> levels(grid.grid_dims.size());
  bool all_interior = !has_mapped_pred;
  for (size_t k = 0; k < grid.grid_dims.size(); ++k) {
    uint32_t dim = grid.grid_dims[k];
    level_of_dim[dim] = static_cast<int>(k);
    auto& lp = levels[k];
    lp.dim = dim;
    lp.strat = grid.skeleton.dims[dim].kind;
    lp.p = grid.parts[dim];
    lp.stride = grid.strides[k];
    lp.c_lo = 0;
    lp.c_hi = lp.p - 1;
  }
  // Independent levels first: dependent planning reads the refined interval
  // of its base, and bases are always independent.
  for (size_t k = 0; k < levels.size(); ++k) {
    auto& lp = levels[k];
    const auto& pr = pred[lp.dim];
    if (lp.strat != Strategy::Independent || !pr) continue;
    const auto& c = *grid.cdf[lp.dim];
    lp.c_lo = c.partition(pr->lo, lp.p);
    lp.c_hi = c.partition(pr->hi, lp.p);
    auto [mn, mx] = grid.data_minmax[lp.dim];
    bool left_ok = pr->lo <= mn || (pr->lo > 0 && c.partition(pr->lo - 1, lp.p) < lp.c_lo);
    bool right_ok = pr->hi >= mx ||
                    (pr->hi < std::numeric_limits<uint64_t>::max() &&
                     c.partition(pr->hi + 1, lp.p) > lp.c_hi);
    all_interior = all_interior && left_ok && right_ok;
  }
  for (size_t k = 0; k < levels.size(); ++k) {
    auto& lp = levels[k];
    uint32_t dim = lp.dim;
    const auto& pr = pred[dim];
    if (lp.strat == Strategy::Dependent) {
      uint32_t base = grid.skeleton.dims[dim].other;
      int bl = level_of_dim[base];
      lp.base_level = bl;
      lp.base_is_later = bl > static_cast<int>(k);
      const auto& cc = *grid.conditional[dim];
      const auto& base_lp = levels[bl];
      lp.base_skip.assign(grid.parts[base], 0);
      lp.base_range.assign(grid.parts[base], {0, lp.p - 1});
      uint32_t prov_lo = lp.p, prov_hi = 0;
      bool any = false;
      for (uint32_t b = base_lp.c_lo; b <= base_lp.c_hi; ++b) {
        auto [ymn, ymx] = cc.y_minmax[b];
        if (ymn > ymx) {  // empty base bucket
          lp.base_skip[b] = 1;
          continue;
        }
        if (pr) {
          if (pr->hi < ymn || pr->lo > ymx) {  // guaranteed no points
            lp.base_skip[b] = 1;
            continue;
          }
          const auto& c = cc.per_base[b];
          uint32_t ylo = c.partition(pr->lo, lp.p);
          uint32_t yhi = c.partition(pr->hi, lp.p);
          lp.base_range[b] = {ylo, yhi};
          bool left_ok = pr->lo <= ymn || (pr->lo > 0 && c.partition(pr->lo - 1, lp.p) < ylo);
          bool right_ok = pr->hi >= ymx ||
                          (pr->hi < std::numeric_limits<uint64_t>::max() &&
                           c.partition(pr->hi + 1, lp.p) > yhi);
          all_interior = all_interior && left_ok && right_ok;
        }
        any = true;
        prov_lo = std::min(prov_lo, lp.base_range[b].first);
        prov_hi = std::max(prov_hi, lp.base_range[b].second);
      }
      if (!any) return out;
      if (lp.base_is_later) {
        lp.c_lo = prov_lo;
        lp.c_hi = prov_hi;
        levels[bl].checks.push_back(static_cast<int>(k));
      }
    }
  }

  Enumerator en;
  en.levels = std::move(levels);
  en.chosen.assign(en.levels.size(), 0);
  if (en.levels.empty()) {
    en.runs.emplace_back(0, 0);  // single-cell grid
  } else {
    en.recurse(0, 0);
  }

  out.reserve(en.runs.size());
  for (auto [c1, c2] : en.runs)
    out.push_back({grid.offsets[c1], grid.offsets[c2 + 1], all_interior});
  return out;
}

uint64_t execute_region_query(const AugmentedGrid& grid, const Dataset& store,
                              uint64_t region_offset, const Query& q, ScanStats* stats) {
  auto ranges = intersecting_cell_ranges(grid, q);
  for (auto& r : ranges) {
    r.start += region_offset;
    r.end += region_offset;
  }
  return scan_count(store, ranges, q.predicates, stats);
}

std::string AugmentedGrid::to_json() const {
  nlohmann::json j;
  j["skeleton"] = skeleton.label();
  nlohmann::json parts_j = nlohmann::json::array();
  for (uint32_t dim : grid_dims) parts_j.push_back({{"dim", dim}, {"p", parts[dim]}});
  j["partitions"] = std::move(parts_j);
  j["cells"] = cells();
  j["rows"] = n_rows;
  j["lookup_table_bytes"] = lookup_table_bytes();
  nlohmann::json models = nlohmann::json::array();
  for (uint32_t dim = 0; dim < skeleton.dims.size(); ++dim) {
    const auto& s = skeleton.dims[dim];
    nlohmann::json m;
    m["dim"] = dim;
    switch (s.kind) {
      case Strategy::Independent:
        m["strategy"] = "independent";
        if (cdf[dim]) m["knots"] = cdf[dim]->knots.size();
        break;
      case Strategy::Mapped: {
        m["strategy"] = "mapped";
        m["target"] = s.other;
        if (mapping[dim]) {
          m["slope"] = mapping[dim]->slope;
          m["intercept"] = mapping[dim]->intercept;
          m["e_lo"] = mapping[dim]->e_lo;
          m["e_hi"] = mapping[dim]->e_hi;
        }
        break;
      }
      case Strategy::Dependent:
        m["strategy"] = "dependent";
        m["base"] = s.other;
        if (conditional[dim]) m["base_partitions"] = conditional[dim]->per_base.size();
        break;
    }
    models.push_back(std::move(m));
  }
  j["models"] = std::move(models);
  return j.dump();
}

}  // namespace sgrid
