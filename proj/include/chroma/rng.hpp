#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace chroma {

// Deterministic 64-bit generator (SplitMix64). The state update and output
// mix are fixed, so a given seed yields the same stream on every platform.
// Bounded integers come from rejection sampling, never from modulo bias.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  // Independent stream keyed by (seed, stream): the stream index is folded
  // into the seed through the SplitMix64 finalizer, so parallel consumers
  // (one per image) never share state.
  static Rng derive(uint64_t seed, uint64_t stream) {
    return Rng(mix64(seed + kGolden * (stream + 1)));
  }

  uint64_t next_u64() {
    state_ += kGolden;
    return mix64(state_);
  }

  // Uniform integer in [0, bound) by rejection: accept draws below the
  // largest multiple of bound so every residue is equally likely.
  uint32_t uniform_u32(uint32_t bound) {
    if (bound == 0) throw std::invalid_argument("Rng::uniform_u32: bound must be positive");
    const uint64_t kMax = ~uint64_t{0};
    const uint64_t limit = kMax - kMax % bound;  // bound * floor((2^64-1)/bound)
    uint64_t r;
    do {
      r = next_u64();
    } while (r >= limit);
    return static_cast<uint32_t>(r % bound);
  }

  // [0, 1) with 24 explicit mantissa bits.
  float uniform_float() { return static_cast<float>(next_u64() >> 40) * 0x1p-24f; }

  // [0, 1) with 53 bits, for accumulating transforms.
  double uniform_double() { return static_cast<double>(next_u64() >> 11) * 0x1p-53; }

  // Standard normal via Box-Muller; the spare value is cached.
  float normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform_double();
    double u2 = uniform_double();
    if (u1 < 1e-300) u1 = 1e-300;
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * 3.141592653589793 * u2;
    spare_ = static_cast<float>(mag * std::sin(ang));
    has_spare_ = true;
    return static_cast<float>(mag * std::cos(ang));
  }

  float normal(float mean, float stddev) { return mean + stddev * normal(); }

  // Fisher-Yates, back to front.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = uniform_u32(static_cast<uint32_t>(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ull;

  static uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  uint64_t state_;
  float spare_ = 0.0f;
  bool has_spare_ = false;
};

}  // namespace chroma
