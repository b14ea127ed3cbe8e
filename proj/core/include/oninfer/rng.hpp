#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace oninfer {

// mt19937 with a hand-mapped uniform: identical byte streams on every platform
// (std::uniform_real_distribution is implementation-defined).
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(static_cast<uint32_t>(seed ^ (seed >> 32))) {}

  uint32_t next_u32() { return gen_(); }

  // Uniform in [lo, hi) on a 2^24 grid: exact in fp32, reproducible everywhere.
  float uniform(float lo, float hi) {
    float u = static_cast<float>(gen_() >> 8) * (1.0f / 16777216.0f);
    return lo + (hi - lo) * u;
  }

  int uniform_int(int lo, int hi) {  // inclusive range
    return lo + static_cast<int>(gen_() % static_cast<uint32_t>(hi - lo + 1));
  }

  std::vector<float> uniform_vec(size_t n, float lo, float hi) {
    std::vector<float> v(n);
    for (auto& x : v) x = uniform(lo, hi);
    return v;
  }

 private:
  std::mt19937 gen_;
};

}  // namespace oninfer
