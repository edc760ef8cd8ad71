#pragma once

/**
 * Seeded deterministic random stream.
 *
 * Every stochastic operation in the lab takes one of these explicitly; there
 * is no hidden global state. std::mt19937_64 has a standard-pinned output
 * sequence, but the std distributions do not, so all derived draws
 * (uniform doubles, bounded integers, shuffles) are implemented here and are
 * identical across platforms for a given seed.
 */

#include <cstdint>
#include <random>
#include <vector>

namespace clab {

// splitmix64 finalizer; also used to derive independent sub-seeds.
uint64_t mix64(uint64_t x);

// Combine seed components (run seed, stage tag, generation, doc index...)
// into one stream seed.
uint64_t seed_combine(uint64_t a, uint64_t b);
uint64_t seed_combine(uint64_t a, uint64_t b, uint64_t c);

class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1), 53 mantissa bits.
  double next_double() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // Uniform in [0, n), unbiased (rejection sampling). n must be >= 1.
  uint64_t next_below(uint64_t n);

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // First k indices of a shuffled [0, n) without materializing the tail
  // beyond position k (partial Fisher-Yates). k <= n.
  std::vector<size_t> sample_indices(size_t n, size_t k);

 private:
  std::mt19937_64 gen_;
};

}  // namespace clab
