#pragma once

#include <cstdint>
#include <limits>

namespace rfm {

/// SplitMix64 step (Steele, Lea & Flood 2014). Advances `state` and returns
/// the mixed output.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// xoshiro256** 1.0 (Blackman & Vigna). Satisfies UniformRandomBitGenerator.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

/// What a random stream is used for. Values are part of the reproducibility
/// contract; do not renumber.
enum class StreamRole : std::uint64_t {
  Data = 1,     // Z_0, the training inputs
  Noise = 2,    // label noise xi
  Teacher = 3,  // teacher draws for isotropic-average targets
  Layer = 4,    // Z_l for feature layer l (index = l)
};

/// Seed for the stream (seed, role, index): SplitMix64 applied to each
/// component in turn.
inline std::uint64_t stream_seed(std::uint64_t seed, StreamRole role, std::uint64_t index = 0) {
  std::uint64_t state = seed;
  std::uint64_t h = splitmix64(state);
  state = h ^ static_cast<std::uint64_t>(role);
  h = splitmix64(state);
  state = h ^ index;
  return splitmix64(state);
}

}  // namespace rfm
