#include "sgrid/dataset.hpp"

#include <algorithm>

namespace sgrid {

void Dataset::refresh_domains() {
  domains.assign(d, 1);
  for (uint32_t i = 0; i < d; ++i) {
    uint64_t mx = 0;
    for (uint64_t v : columns[i]) mx = std::max(mx, v);
    domains[i] = mx + 1;
  }
}

void Dataset::validate() const {
  if (columns.size() != d) throw InputError("dataset: column count does not match d");
  for (uint32_t i = 0; i < d; ++i) {
    if (columns[i].size() != n) throw InputError("dataset: column length does not match n");
    if (i < domains.size()) {
      for (uint64_t v : columns[i]) {
        if (v >= domains[i]) throw InputError("dataset: code outside declared domain");
      }
    }
  }
}

std::string Dataset::decode(uint32_t dim, uint64_t code) const {
  if (dim < dicts.size() && dicts[dim].has_value()) return dicts[dim]->decode(code);
  int32_t exp = dim < scale_exponents.size() ? scale_exponents[dim] : 0;
  if (exp == 0) return std::to_string(code);
  std::string digits = std::to_string(code);
  if (static_cast<int32_t>(digits.size()) <= exp) {
    digits.insert(0, exp + 1 - digits.size(), '0');
  }
  digits.insert(digits.size() - exp, 1, '.');
  return digits;
}

}  // namespace sgrid
