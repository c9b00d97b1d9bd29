#pragma once

#include <cstdint>
#include <random>

namespace sgrid {

// Deterministic RNG wrapper. The standard distribution objects are
// implementation-defined, so all mappings from raw bits to ranges live here;
// identical seeds give identical streams on every platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, bound). bound = 0 means the full 64-bit range.
  uint64_t next_below(uint64_t bound) {
    if (bound == 0) return gen_();
    // Lemire's multiply-shift with rejection to remove modulo bias.
    uint64_t x = gen_();
    __uint128_t m = static_cast<__uint128_t>(x) * bound;
    uint64_t lo = static_cast<uint64_t>(m);
    if (lo < bound) {
      uint64_t threshold = (0 - bound) % bound;
      while (lo < threshold) {
        x = gen_();
        m = static_cast<__uint128_t>(x) * bound;
        lo = static_cast<uint64_t>(m);
      }
    }
    return static_cast<uint64_t>(m >> 64);
  }

  // Uniform integer in [lo, hi).
  uint64_t uniform_u64(uint64_t lo, uint64_t hi) {
    return lo + next_below(hi - lo);
  }

  // Uniform double in [0, 1) with 53 bits of entropy.
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Derive an independent stream for a sub-task.
  Rng fork(uint64_t salt) {
    uint64_t s = gen_() ^ (salt * 0x9e3779b97f4a7c15ULL);
    return Rng(s);
  }

 private:
  std::mt19937_64 gen_;
};

// FNV-1a over a byte string; used for spec hashes in reports.
inline uint64_t fnv1a(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace sgrid
