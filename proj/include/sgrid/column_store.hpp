#pragma once

#include <cstdint>
#include <vector>

#include "sgrid/dataset.hpp"
#include "sgrid/workload.hpp"

namespace sgrid {

// A contiguous run of physical rows. `exact` asserts every row in [start,end)
// satisfies all query predicates, so a COUNT can take (end-start) without
// touching column data.
struct PhysicalRange {
  uint64_t start = 0;  // inclusive
  uint64_t end = 0;    // exclusive
  bool exact = false;
};

// Scan instrumentation. These counters feed the cost model calibration, so
// they are first-class outputs rather than debug-only state.
struct ScanStats {
  uint64_t ranges_visited = 0;
  uint64_t points_scanned = 0;     // rows whose values were inspected
  uint64_t point_dims_scanned = 0; // rows inspected x filtered dims

  ScanStats& operator+=(const ScanStats& o) {
    ranges_visited += o.ranges_visited;
    points_scanned += o.points_scanned;
    point_dims_scanned += o.point_dims_scanned;
    return *this;
  }
};

// Returns a dataset whose row i equals row perm[i] of `ds`, all columns
// consistently. Throws if perm is not a bijection on [0, n).
Dataset reorder(const Dataset& ds, const std::vector<uint64_t>& perm);

// Counts rows within `ranges` satisfying all `predicates`. Ranges must be
// non-overlapping and sorted by start; exact ranges contribute their length
// without reading column data. Only filtered dims are accessed.
uint64_t scan_count(const Dataset& ds, const std::vector<PhysicalRange>& ranges,
                    const std::vector<RangePredicate>& predicates,
                    ScanStats* stats = nullptr);

}  // namespace sgrid
