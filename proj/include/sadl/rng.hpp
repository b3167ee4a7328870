#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace sadl {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

//! xoshiro256++ (Blackman & Vigna), usable as a std UniformRandomBitGenerator.
class Xoshiro256pp {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256pp(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
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

//! Stream tags. Processes that must see the same innovations share a tag.
enum class StreamTag : std::uint64_t {
  robbins_monro = 1,
  renormalized = 2,  // U and V
  frozen_chain = 3,
  diffusion = 4,
  bootstrap = 5,
  brownian_sweep = 6,
  model_check = 7,
  chain_histogram = 8,
};

inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index, StreamTag tag) {
  std::uint64_t s = master;
  std::uint64_t h = splitmix64(s);
  s = h ^ (index * 0xd1342543de82ef95ULL);
  h = splitmix64(s);
  s = h ^ (static_cast<std::uint64_t>(tag) * 0x9e3779b97f4a7c15ULL);
  return splitmix64(s);
}

//! Per-stream source of standard normal draws.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : eng_(seed) {}
  RandomSource(std::uint64_t master, std::uint64_t index, StreamTag tag)
      : eng_(stream_seed(master, index, tag)) {}

  double normal() { return normal_(eng_); }
  double uniform() { return unif_(eng_); }
  std::uint64_t bits() { return eng_(); }
  Xoshiro256pp& engine() { return eng_; }

 private:
  Xoshiro256pp eng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
};

}  // namespace sadl
