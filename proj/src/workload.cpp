#include "sgrid/workload.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "sgrid/rng.hpp"

namespace sgrid {

void Query::normalize() {
  if (predicates.empty()) throw InputError("query: at least one predicate required");
  std::sort(predicates.begin(), predicates.end(),
            [](const RangePredicate& a, const RangePredicate& b) { return a.dim < b.dim; });
  for (size_t i = 0; i < predicates.size(); ++i) {
    const auto& p = predicates[i];
    if (p.lo > p.hi) throw InputError("query: predicate lo > hi");
    if (i > 0 && predicates[i - 1].dim == p.dim)
      throw InputError("query: duplicate predicate dimension");
  }
}

uint64_t count_matching(const Dataset& ds, const Query& q) {
  uint64_t count = 0;
  for (uint64_t i = 0; i < ds.n; ++i) {
    bool ok = true;
    for (const auto& p : q.predicates) {
      uint64_t v = ds.columns[p.dim][i];
      if (v < p.lo || v > p.hi) {
        ok = false;
        break;
      }
    }
    count += ok;
  }
  return count;
}

std::vector<uint64_t> sample_rows(uint64_t n, uint64_t cap, uint64_t seed) {
  uint64_t m = std::min(n, cap);
  std::vector<uint64_t> rows(m);
  if (m == n) {
    for (uint64_t i = 0; i < n; ++i) rows[i] = i;
    return rows;
  }
  Rng rng(seed);
  for (uint64_t i = 0; i < m; ++i) rows[i] = rng.next_below(n);
  std::sort(rows.begin(), rows.end());
  return rows;
}

std::vector<double> selectivity_embedding(const Query& q, const Dataset& ds,
                                          const std::vector<uint64_t>& rows) {
  std::vector<double> emb;
  emb.reserve(q.predicates.size());
  for (const auto& p : q.predicates) {
    uint64_t hits = 0;
    const auto& col = ds.columns[p.dim];
    for (uint64_t r : rows) hits += p.contains(col[r]);
    emb.push_back(rows.empty() ? 0.0 : static_cast<double>(hits) / rows.size());
  }
  return emb;
}

std::vector<double> average_selectivities(const Workload& w, const Dataset& ds, uint64_t seed) {
  auto rows = sample_rows(ds.n, 100000, seed);
  std::vector<double> sum(ds.d, 0.0);
  std::vector<uint64_t> cnt(ds.d, 0);
  for (const auto& q : w.queries) {
    for (const auto& p : q.predicates) {
      uint64_t hits = 0;
      const auto& col = ds.columns[p.dim];
      for (uint64_t r : rows) hits += p.contains(col[r]);
      sum[p.dim] += rows.empty() ? 0.0 : static_cast<double>(hits) / rows.size();
      cnt[p.dim]++;
    }
  }
  std::vector<double> avg(ds.d, 1.0);
  for (uint32_t i = 0; i < ds.d; ++i)
    if (cnt[i]) avg[i] = sum[i] / static_cast<double>(cnt[i]);
  return avg;
}

namespace {

// Plain DBSCAN over points in [0,1]^k with Euclidean distance. Group sizes
// are small (hundreds of queries), so the O(n^2) neighbor scan is fine.
// Returns cluster labels >= 0, or -1 for noise.
std::vector<int> dbscan(const std::vector<std::vector<double>>& pts, double eps, size_t min_pts) {
  const size_t n = pts.size();
  const double eps2 = eps * eps;
  auto neighbors = [&](size_t i) {
    std::vector<size_t> out;
    for (size_t j = 0; j < n; ++j) {
      double d2 = 0;
      for (size_t k = 0; k < pts[i].size(); ++k) {
        double diff = pts[i][k] - pts[j][k];
        d2 += diff * diff;
      }
      if (d2 <= eps2) out.push_back(j);
    }
    return out;
  };
  std::vector<int> label(n, -2);  // -2 unvisited, -1 noise
  int cluster = 0;
  for (size_t i = 0; i < n; ++i) {
    if (label[i] != -2) continue;
    auto nb = neighbors(i);
    if (nb.size() < min_pts) {
      label[i] = -1;
      continue;
    }
    label[i] = cluster;
    std::vector<size_t> frontier = nb;
    for (size_t fi = 0; fi < frontier.size(); ++fi) {
      size_t j = frontier[fi];
      if (label[j] == -1) label[j] = cluster;  // border point
      if (label[j] != -2) continue;
      label[j] = cluster;
      auto nb2 = neighbors(j);
      if (nb2.size() >= min_pts) frontier.insert(frontier.end(), nb2.begin(), nb2.end());
    }
    ++cluster;
  }
  return label;
}

}  // namespace

void cluster_query_types(Workload& w, const Dataset& ds, uint64_t seed) {
  if (w.queries.empty()) throw InputError("cluster_query_types: empty workload");
  w.types.clear();

  auto rows = sample_rows(ds.n, 100000, seed);

  // Queries filtering different dimension sets are automatically different types.
  std::map<std::vector<uint32_t>, std::vector<size_t>> groups;
  for (size_t qi = 0; qi < w.queries.size(); ++qi) {
    std::vector<uint32_t> dims;
    for (const auto& p : w.queries[qi].predicates) dims.push_back(p.dim);
    groups[dims].push_back(qi);
  }

  int next_type = 0;
  for (auto& [dims, members] : groups) {
    std::vector<std::vector<double>> emb;
    emb.reserve(members.size());
    for (size_t qi : members) emb.push_back(selectivity_embedding(w.queries[qi], ds, rows));

    size_t min_pts = std::max<size_t>(3, members.size() / 100);
    auto labels = dbscan(emb, 0.2, min_pts);

    int n_clusters = 0;
    for (int l : labels) n_clusters = std::max(n_clusters, l + 1);

    std::vector<QueryType> group_types(n_clusters);
    QueryType noise;
    for (size_t i = 0; i < members.size(); ++i) {
      if (labels[i] >= 0)
        group_types[labels[i]].member_query_ids.push_back(members[i]);
      else
        noise.member_query_ids.push_back(members[i]);
    }
    if (!noise.member_query_ids.empty()) group_types.push_back(std::move(noise));

    for (auto& t : group_types) {
      t.type_id = next_type++;
      t.filtered_dims = dims;
      w.types.push_back(std::move(t));
    }
  }
}

}  // namespace sgrid
