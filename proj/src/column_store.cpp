#include "sgrid/column_store.hpp"

#include <algorithm>

namespace sgrid {

Dataset reorder(const Dataset& ds, const std::vector<uint64_t>& perm) {
  if (perm.size() != ds.n) throw InputError("reorder: permutation length != n");
  std::vector<bool> seen(ds.n, false);
  for (uint64_t p : perm) {
    if (p >= ds.n || seen[p]) throw InputError("reorder: not a bijection on [0,n)");
    seen[p] = true;
  }
  Dataset out;
  out.n = ds.n;
  out.d = ds.d;
  out.domains = ds.domains;
  out.scale_exponents = ds.scale_exponents;
  out.dicts = ds.dicts;
  out.columns.resize(ds.d);
  for (uint32_t c = 0; c < ds.d; ++c) {
    const auto& src = ds.columns[c];
    auto& dst = out.columns[c];
    dst.resize(ds.n);
    for (uint64_t i = 0; i < ds.n; ++i) dst[i] = src[perm[i]];
  }
  return out;
}

uint64_t scan_count(const Dataset& ds, const std::vector<PhysicalRange>& ranges,
                    const std::vector<RangePredicate>& predicates, ScanStats* stats) {
  uint64_t count = 0;
  uint64_t prev_end = 0;
  bool first = true;
  const size_t np = predicates.size();
  for (const auto& r : ranges) {
    if (r.start > r.end || r.end > ds.n) throw InputError("scan_count: range out of bounds");
    if (!first && r.start < prev_end) throw InputError("scan_count: ranges overlap or are unsorted");
    first = false;
    prev_end = r.end;
    if (stats) stats->ranges_visited++;  // the lookup happens even for empty ranges
    if (r.start == r.end) continue;
    if (r.exact) {
      count += r.end - r.start;
      continue;
    }
    if (stats) {
      stats->points_scanned += r.end - r.start;
      stats->point_dims_scanned += (r.end - r.start) * np;
    }
    if (np == 0) {
      count += r.end - r.start;
      continue;
    }
    if (np == 1) {
      const auto& p = predicates[0];
      const uint64_t* col = ds.columns[p.dim].data();
      uint64_t c = 0;
      for (uint64_t i = r.start; i < r.end; ++i)
        c += (col[i] >= p.lo) & (col[i] <= p.hi);
      count += c;
    } else if (np == 2) {
      const auto& p0 = predicates[0];
      const auto& p1 = predicates[1];
      const uint64_t* c0 = ds.columns[p0.dim].data();
      const uint64_t* c1 = ds.columns[p1.dim].data();
      uint64_t c = 0;
      for (uint64_t i = r.start; i < r.end; ++i)
        c += (c0[i] >= p0.lo) & (c0[i] <= p0.hi) & (c1[i] >= p1.lo) & (c1[i] <= p1.hi);
      count += c;
    } else {
      for (uint64_t i = r.start; i < r.end; ++i) {
        bool ok = true;
        for (size_t k = 0; k < np; ++k) {
          const auto& p = predicates[k];
          uint64_t v = ds.columns[p.dim][i];
          ok &= (v >= p.lo) & (v <= p.hi);
        }
        count += ok;
      }
    }
  }
  return count;
}

}  // namespace sgrid
