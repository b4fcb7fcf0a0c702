#pragma once

#include <cstdint>
#include <random>

namespace crossway {

// splitmix64; used to derive independent stream seeds from a master seed.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// mt19937_64 with hand-rolled conversions. std::uniform_*_distribution is
// implementation-defined, so it is never used anywhere in this codebase;
// these conversions make every random stream reproducible across compilers.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next() { return gen_(); }

  // [0, 1), 53-bit resolution
  double uniform() { return (gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive on both ends
  int uniform_int(int lo, int hi) {
    const int n = hi - lo + 1;
    int k = static_cast<int>(uniform() * n);
    if (k >= n) k = n - 1;
    return lo + k;
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace crossway
