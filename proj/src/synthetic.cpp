#include "sgrid/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "sgrid/rng.hpp"

namespace sgrid {

namespace {
using json = nlohmann::json;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return j;
}

DataGenSpec data_spec_from_json(const json& j) {
  DataGenSpec spec;
  spec.n = j.at("n").get<uint64_t>();
  for (const auto& jd : j.at("dims")) {
    DimSpec d;
    std::string kind = jd.at("kind").get<std::string>();
    if (kind == "uniform") {
      d.kind = DimSpec::Kind::Uniform;
      d.lo = jd.at("lo").get<uint64_t>();
      d.hi = jd.at("hi").get<uint64_t>();
      if (d.lo >= d.hi) throw ConfigError("uniform dim: lo must be < hi");
    } else if (kind == "correlated") {
      d.kind = DimSpec::Kind::Correlated;
      d.base_dim = jd.at("base").get<uint32_t>();
      d.slope = jd.at("slope").get<double>();
      d.intercept = jd.at("intercept").get<double>();
      d.noise_pct = jd.value("noise_pct", 0.0);
      if (d.noise_pct < 0) throw ConfigError("correlated dim: noise_pct must be >= 0");
      if (d.slope == 0) throw ConfigError("correlated dim: slope must be nonzero");
    } else {
      throw ConfigError("unknown dim kind '" + kind + "'");
    }
    spec.dims.push_back(d);
  }
  if (spec.dims.empty()) throw ConfigError("data spec: at least one dimension required");
  if (spec.n == 0) throw ConfigError("data spec: n must be positive");
  return spec;
}

WorkloadGenSpec workload_spec_from_json(const json& j) {
  WorkloadGenSpec spec;
  for (const auto& jt : j.at("types")) {
    TypeSpec t;
    t.count = jt.at("count").get<uint64_t>();
    for (const auto& jp : jt.at("predicates")) {
      PredicateSpec p;
      p.dim = jp.at("dim").get<uint32_t>();
      p.selectivity = jp.at("selectivity").get<double>();
      if (!(p.selectivity > 0.0 && p.selectivity <= 1.0))
        throw ConfigError("predicate selectivity must be in (0, 1]");
      if (jp.contains("center")) {
        const auto& jc = jp.at("center");
        p.center_lo = jc.at("lo").get<double>();
        p.center_hi = jc.at("hi").get<double>();
        if (!(p.center_lo >= 0 && p.center_hi <= 1 && p.center_lo <= p.center_hi))
          throw ConfigError("center band must satisfy 0 <= lo <= hi <= 1");
      }
      t.predicates.push_back(p);
    }
    if (t.predicates.empty()) throw ConfigError("type spec: at least one predicate required");
    spec.types.push_back(std::move(t));
  }
  if (spec.types.empty()) throw ConfigError("workload spec: at least one type required");
  return spec;
}

json data_spec_to_json(const DataGenSpec& spec) {
  json dims = json::array();
  for (const auto& d : spec.dims) {
    if (d.kind == DimSpec::Kind::Uniform) {
      dims.push_back({{"kind", "uniform"}, {"lo", d.lo}, {"hi", d.hi}});
    } else {
      dims.push_back({{"kind", "correlated"},
                      {"base", d.base_dim},
                      {"slope", d.slope},
                      {"intercept", d.intercept},
                      {"noise_pct", d.noise_pct}});
    }
  }
  return json{{"n", spec.n}, {"dims", dims}};
}

json workload_spec_to_json(const WorkloadGenSpec& spec) {
  json types = json::array();
  for (const auto& t : spec.types) {
    json preds = json::array();
    for (const auto& p : t.predicates) {
      preds.push_back({{"dim", p.dim},
                       {"selectivity", p.selectivity},
                       {"center", {{"lo", p.center_lo}, {"hi", p.center_hi}}}});
    }
    types.push_back({{"count", t.count}, {"predicates", preds}});
  }
  return json{{"types", types}};
}

}  // namespace

DataGenSpec DataGenSpec::from_json_file(const std::string& path) {
  return data_spec_from_json(read_json_file(path));
}
DataGenSpec DataGenSpec::from_json_text(const std::string& text) {
  try {
    return data_spec_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("data spec: ") + e.what());
  }
}
std::string DataGenSpec::to_json_text() const { return data_spec_to_json(*this).dump(2); }

WorkloadGenSpec WorkloadGenSpec::from_json_file(const std::string& path) {
  return workload_spec_from_json(read_json_file(path));
}
WorkloadGenSpec WorkloadGenSpec::from_json_text(const std::string& text) {
  try {
    return workload_spec_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("workload spec: ") + e.what());
  }
}
std::string WorkloadGenSpec::to_json_text() const { return workload_spec_to_json(*this).dump(2); }

Dataset generate_synthetic(const DataGenSpec& spec, uint64_t seed) {
  const uint32_t d = spec.dims.size();

  // Topological order over correlation edges; a cycle is a config error.
  std::vector<uint32_t> order;
  std::vector<int> state(d, 0);  // 0 unvisited, 1 in progress, 2 done
  auto visit = [&](auto&& self, uint32_t i) -> void {
    if (state[i] == 2) return;
    if (state[i] == 1) throw ConfigError("cyclic correlation spec");
    state[i] = 1;
    const auto& ds = spec.dims[i];
    if (ds.kind == DimSpec::Kind::Correlated) {
      if (ds.base_dim >= d) throw ConfigError("correlated dim: base out of range");
      if (ds.base_dim == i) throw ConfigError("cyclic correlation spec");
      self(self, ds.base_dim);
    }
    state[i] = 2;
    order.push_back(i);
  };
  for (uint32_t i = 0; i < d; ++i) visit(visit, i);

  Dataset out;
  out.n = spec.n;
  out.d = d;
  out.columns.assign(d, {});
  out.scale_exponents.assign(d, 0);
  out.dicts.resize(d);
  out.domains.assign(d, 1);

  Rng root(seed);
  std::vector<Rng> dim_rng;
  dim_rng.reserve(d);
  for (uint32_t i = 0; i < d; ++i) dim_rng.push_back(root.fork(i + 1));

  for (uint32_t dim : order) {
    const auto& dsp = spec.dims[dim];
    auto& col = out.columns[dim];
    col.resize(spec.n);
    Rng& rng = dim_rng[dim];
    if (dsp.kind == DimSpec::Kind::Uniform) {
      for (uint64_t r = 0; r < spec.n; ++r) col[r] = rng.uniform_u64(dsp.lo, dsp.hi);
      out.domains[dim] = dsp.hi;
    } else {
      const auto& base_spec = spec.dims[dsp.base_dim];
      const auto& base_col = out.columns[dsp.base_dim];
      double base_width = base_spec.kind == DimSpec::Kind::Uniform
                              ? static_cast<double>(base_spec.hi - base_spec.lo)
                              : static_cast<double>(out.domains[dsp.base_dim]);
      double bound = dsp.noise_pct * base_width;
      uint64_t mx = 0;
      for (uint64_t r = 0; r < spec.n; ++r) {
        double predicted = dsp.slope * static_cast<double>(base_col[r]) + dsp.intercept;
        double noise = bound > 0 ? rng.uniform(-bound, bound) : 0.0;
        double v = std::round(predicted + noise);
        if (v < 0) v = 0;
        uint64_t code = static_cast<uint64_t>(v);
        col[r] = code;
        mx = std::max(mx, code);
      }
      out.domains[dim] = mx + 1;
    }
  }
  return out;
}

Workload generate_workload(const WorkloadGenSpec& spec, const Dataset& ds, uint64_t seed) {
  for (const auto& t : spec.types)
    for (const auto& p : t.predicates)
      if (p.dim >= ds.d) throw ConfigError("workload spec: predicate dim out of range");

  // Sorted copies of each referenced column, for quantile lookups.
  std::vector<std::vector<uint64_t>> sorted(ds.d);
  for (const auto& t : spec.types) {
    for (const auto& p : t.predicates) {
      if (sorted[p.dim].empty()) {
        sorted[p.dim] = ds.columns[p.dim];
        std::sort(sorted[p.dim].begin(), sorted[p.dim].end());
      }
    }
  }
  auto value_at_rank = [&](uint32_t dim, double rank) {
    const auto& s = sorted[dim];
    double idx = rank * static_cast<double>(s.size() - 1);
    uint64_t i = static_cast<uint64_t>(std::llround(idx));
    return s[std::min<uint64_t>(i, s.size() - 1)];
  };

  Workload w;
  Rng rng(seed);
  for (size_t ti = 0; ti < spec.types.size(); ++ti) {
    const auto& t = spec.types[ti];
    for (uint64_t k = 0; k < t.count; ++k) {
      Query q;
      q.type_hint = static_cast<int>(ti);
      for (const auto& p : t.predicates) {
        RangePredicate rp;
        rp.dim = p.dim;
        if (p.selectivity >= 1.0) {
          rp.lo = 0;
          rp.hi = ds.domains[p.dim] - 1;
        } else {
          double center = rng.uniform(p.center_lo, p.center_hi);
          double lo_rank = std::clamp(center - p.selectivity / 2, 0.0, 1.0 - p.selectivity);
          double hi_rank = lo_rank + p.selectivity;
          rp.lo = value_at_rank(p.dim, lo_rank);
          rp.hi = value_at_rank(p.dim, hi_rank);
          if (rp.hi < rp.lo) std::swap(rp.lo, rp.hi);
        }
        q.predicates.push_back(rp);
      }
      q.normalize();
      w.queries.push_back(std::move(q));
    }
  }
  return w;
}

}  // namespace sgrid
