#pragma once

#include <string>
#include <vector>

#include "sgrid/dataset.hpp"
#include "sgrid/workload.hpp"

namespace sgrid {

enum class ColumnKind { Integer, Decimal, String };

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::Integer;
};

// Parses a header-row CSV under `schema`. Strings are dictionary-encoded in
// first-appearance order; decimal columns are scaled by the smallest power of
// 10 that makes every value in the column integral. Malformed rows and
// overflow raise InputError with the offending row number.
Dataset ingest_csv(const std::string& path, const std::vector<ColumnSchema>& schema);

// Binary dataset format: little-endian header {magic "SGDS", version u32,
// n u64, d u32, per-column {domain u64, scale i32}} followed by a
// column-major u64 payload. Dictionaries are not persisted.
void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

// Workload JSON: array of {type_hint?, predicates: [{dim, lo, hi}]}.
void write_workload(const Workload& w, const std::string& path);
Workload read_workload(const std::string& path);

}  // namespace sgrid
