#pragma once

#include <cmath>
#include <cstdint>

// Counter-based generator: the k-th output is a fixed hash of
// (seed, stream, k), so a chain snapshot only needs to store the counter.

namespace spinlab {

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {
    base_ = mix(seed + 0x9e3779b97f4a7c15ull * (stream + 1));
  }

  std::uint64_t next_u64() {
    ++counter_;
    return mix(base_ + counter_ * 0x9e3779b97f4a7c15ull);
  }

  // Uniform on [0,1), 53-bit mantissa.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // Box-Muller, two draws per call, no cached spare.
  double normal() {
    double u1 = 1.0 - uniform01();  // (0,1]
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  std::uint64_t counter() const { return counter_; }
  void set_counter(std::uint64_t c) { counter_ = c; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

}  // namespace spinlab
