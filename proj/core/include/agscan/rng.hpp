#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "agscan/errors.hpp"

namespace agscan {

// Deterministic PRNG with hand-rolled distributions. std:: distributions are
// implementation-defined, which would break the byte-identical-output
// contract across standard libraries; everything here is pinned down.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // splitmix64 warmup avoids weak low-entropy seeds.
    next_u64();
    next_u64();
  }

  std::uint64_t next_u64() {
    // splitmix64 (Steele, Lea, Flood 2014).
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, bound). Rejection-free modulo is fine at these
  // bound sizes relative to 2^64; bias is < 2^-40 and irrelevant here, but
  // we still use Lemire rejection to keep the draw exact.
  std::uint64_t next_below(std::uint64_t bound) {
    require(bound > 0, "rng: bound must be positive");
    std::uint64_t threshold = (0ULL - bound) % bound;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  std::size_t index(std::size_t bound) { return static_cast<std::size_t>(next_below(bound)); }

  bool coin() { return (next_u64() & 1ULL) != 0; }

  // Standard normal via Box-Muller (fixed algorithm, no cached spare).
  double next_gauss() {
    double u1 = next_unit();
    double u2 = next_unit();
    while (u1 <= 0.0) u1 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Partial Fisher-Yates: k distinct indices drawn from [0, n).
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k) {
    require(k <= n, "rng: sample size exceeds population");
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t j = i + index(n - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// Stable label hash (FNV-1a 64) for deriving stage seeds from a master seed.
inline std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// A master seed fans out to per-stage seeds through fixed labels, so stages
// can be re-run independently without sharing RNG state.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
  Rng mix(master ^ hash_label(label));
  return mix.next_u64();
}

}  // namespace agscan
