#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace markbench {

// Derives independent stream seeds from a base seed.  splitmix64 is the
// usual recommendation for seeding mt19937_64 because nearby inputs map to
// uncorrelated outputs.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t base, uint64_t stream) {
  return splitmix64(base + 0x632be59bd9b4e019ull * (stream + 1));
}

// Deterministic random source.  mt19937_64 itself is standardized, but the
// std distribution objects are not (their output differs across standard
// libraries), so uniform and normal variates are produced by hand here.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; the paired variate is cached so no
  // randomness is discarded and the stream stays reproducible.
  double normal();

  // Uniform integer in [0, n) by rejection, exact and bias-free.
  int uniform_int(int n);

  // Fisher-Yates shuffle of 0..n-1.
  std::vector<int> permutation(int n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace markbench
