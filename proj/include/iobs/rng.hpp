#pragma once

#include <cstdint>
#include <random>

namespace iobs {

// Deterministic uniform generator. The double construction is pinned
// ((x >> 11) * 2^-53) instead of std::uniform_real_distribution so that
// traces are byte-identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double unit() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace iobs
