#pragma once

#include <array>
#include <cstdint>
#include <random>

namespace pfa {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256++ seeded through splitmix64. One engine per chain/job; substreams
// for parallel jobs come from Rng::stream so results never depend on thread
// scheduling.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& w : s_) w = splitmix64(x);
  }

  // Independent substream `index` under the same master seed.
  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t x = seed ^ (0xd1b54a32d192ed03ULL * (index + 1));
    return Rng(splitmix64(x));
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type(0); }

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

  double uniform() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(*this);
  }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(*this); }

  void fill_normal(double* dst, std::size_t n) {
    std::normal_distribution<double> d(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) dst[i] = d(*this);
  }

  // shape-rate parameterization (mean = shape/rate)
  double gamma_rate(double shape, double rate) {
    return std::gamma_distribution<double>(shape, 1.0 / rate)(*this);
  }

 private:
  static std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace pfa
