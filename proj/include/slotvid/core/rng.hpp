#pragma once

#include <cstdint>
#include <random>

namespace slotvid {

// splitmix64 step; also used to derive independent stream seeds.
uint64_t splitmix64(uint64_t& state);

// Combine a base seed with a stream tag into a fresh seed.
uint64_t seed_combine(uint64_t base, uint64_t tag);

// Deterministic RNG. mt19937_64 has a standard-specified output sequence;
// uniform/normal conversion is done here rather than with std::*_distribution
// so that draws are identical across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  int64_t uniform_int(int64_t n) {
    return static_cast<int64_t>(eng_() % static_cast<uint64_t>(n));
  }

  // standard normal via Box-Muller, one spare cached
  double normal();

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace slotvid
