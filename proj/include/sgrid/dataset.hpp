#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace sgrid {

// Thrown for malformed user inputs (CSV rows, JSON specs, binary files).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown for invalid configuration (generator specs, CLI flags).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dictionary for a string column: code -> value, assigned in first-appearance
// order. Decoding is a bijection on the codes actually present.
struct Dictionary {
  std::vector<std::string> values;            // code -> string
  std::unordered_map<std::string, uint64_t> codes;  // string -> code

  uint64_t encode(const std::string& v) {
    auto it = codes.find(v);
    if (it != codes.end()) return it->second;
    uint64_t c = values.size();
    values.push_back(v);
    codes.emplace(v, c);
    return c;
  }
  const std::string& decode(uint64_t code) const { return values.at(code); }
};

// Integer-coded columnar table. The single source of truth for point data:
// every index owns either this or a reordered copy of it.
struct Dataset {
  uint64_t n = 0;
  uint32_t d = 0;
  std::vector<std::vector<uint64_t>> columns;   // d columns, each length n
  std::vector<uint64_t> domains;                // codes of column i lie in [0, domains[i])
  std::vector<int32_t> scale_exponents;         // power-of-10 scale applied to decimals
  std::vector<std::optional<Dictionary>> dicts; // per-column value<->code maps

  uint64_t value(uint32_t dim, uint64_t row) const { return columns[dim][row]; }

  // Recompute domains as max(code)+1 per column (at least 1).
  void refresh_domains();

  // Throws if column lengths disagree or codes exceed the declared domains.
  void validate() const;

  // Decode a code back to its external text form (dictionary or scaled decimal).
  std::string decode(uint32_t dim, uint64_t code) const;
};

}  // namespace sgrid
