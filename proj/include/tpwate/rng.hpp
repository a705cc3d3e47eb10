#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

namespace tpwate {

// SplitMix64 finalizer.  Bijective on 64-bit words; used both as the
// sequential generator's output function and as the keyed hash for
// order-independent per-row draws.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Combine an arbitrary tuple of 64-bit keys into a single hash.
inline std::uint64_t hash_key(std::uint64_t h) { return mix64(h); }

template <typename... Rest>
inline std::uint64_t hash_key(std::uint64_t h, std::uint64_t next, Rest... rest) {
  return hash_key(mix64(h ^ mix64(next)), rest...);
}

// Map a 64-bit word to (0,1): take the top 52 bits, offset by one half so
// the endpoints are never produced.  With 52 bits the offset sum stays
// exactly representable, so the largest word maps to 1 - 2^-53, not 1.
inline double u64_to_unit(std::uint64_t x) {
  return (static_cast<double>(x >> 12) + 0.5) * 0x1.0p-52;
}

// Keyed uniform draw: depends only on the key tuple, not on call order.
template <typename... Keys>
inline double keyed_uniform(std::uint64_t seed, Keys... keys) {
  return u64_to_unit(hash_key(seed, static_cast<std::uint64_t>(keys)...));
}

// Sequential counter-based stream (SplitMix64).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  // Uniform in the open interval (0,1).
  double uniform() { return u64_to_unit(next_u64()); }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller (no spare caching, keeps replay simple).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Unbiased integer in [0, bound) by rejection.
  std::uint64_t below(std::uint64_t bound) {
    std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  // Fisher-Yates shuffle of idx[0..n).
  template <typename T>
  void shuffle(T* idx, std::size_t n) {
    for (std::size_t i = n; i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(idx[i - 1], idx[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// Derive a per-replicate seed from a base seed and replicate index.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return hash_key(base, index);
}

}  // namespace tpwate
