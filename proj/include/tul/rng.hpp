#pragma once

// Deterministic randomness. The engine is std::mt19937_64, whose raw output
// sequence is pinned by the standard; variate transforms (uniform doubles,
// normals, bounded integers, shuffles) are implemented here because the
// standard library distributions are implementation-defined and would break
// bit-reproducibility across toolchains.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "tul/common.hpp"

namespace tul {

// splitmix64 finalizer; good avalanche, used only for seed derivation.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and one or more tags.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  return mix64(mix64(base) ^ mix64(tag ^ 0x5bf0363546290f31ull));
}
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t t1,
                                 std::uint64_t t2) {
  return derive_seed(derive_seed(base, t1), t2);
}
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t t1,
                                 std::uint64_t t2, std::uint64_t t3) {
  return derive_seed(derive_seed(base, t1, t2), t3);
}

// Stream tags. Each independent consumer of randomness gets its own tag so
// that reusing one numeric seed across stages never aliases streams.
namespace seed_tag {
inline constexpr std::uint64_t init = 0x01;
inline constexpr std::uint64_t head = 0x02;
inline constexpr std::uint64_t partition = 0x03;
inline constexpr std::uint64_t shuffle = 0x04;
inline constexpr std::uint64_t select_random = 0x05;
inline constexpr std::uint64_t centers = 0x06;
inline constexpr std::uint64_t source = 0x07;
inline constexpr std::uint64_t target_train = 0x08;
inline constexpr std::uint64_t target_val = 0x09;
inline constexpr std::uint64_t target_test = 0x0a;
inline constexpr std::uint64_t aux = 0x0b;
inline constexpr std::uint64_t source_val_split = 0x0c;
inline constexpr std::uint64_t probe = 0x0d;
inline constexpr std::uint64_t pretrain = 0x0e;
inline constexpr std::uint64_t subset = 0x0f;
inline constexpr std::uint64_t val_split = 0x10;
inline constexpr std::uint64_t cell = 0x11;
}  // namespace seed_tag

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next() { return eng_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return double(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; the spare value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.141592653589793238462643 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Unbiased integer in [0, bound) by rejection.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw DomainError("Rng::below: bound must be positive");
    const std::uint64_t threshold = (~bound + 1) % bound;  // 2^64 mod bound
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

  // Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices from [0, n), uniform without replacement, in draw
  // order (partial Fisher-Yates).
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k) {
    if (k > n)
      throw DomainError("Rng::sample_indices: k exceeds population size");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(below(n - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace tul
