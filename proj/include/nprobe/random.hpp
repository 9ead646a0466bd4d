#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace nprobe {

// Counter-based randomness: every draw is a pure function of
// (seed, stream, counter), so results never depend on call order.

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream,
                                     std::uint64_t counter) noexcept {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ counter);
}

/// Uniform double in [0, 1) with 53 random bits.
constexpr double counter_uniform(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t counter) noexcept {
  return static_cast<double>(counter_hash(seed, stream, counter) >> 11) * 0x1.0p-53;
}

/// Unbiased-enough integer in [0, n) via 128-bit multiply-shift.
inline std::uint64_t counter_below(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter,
                                   std::uint64_t n) noexcept {
  const unsigned __int128 m =
      static_cast<unsigned __int128>(counter_hash(seed, stream, counter)) * n;
  return static_cast<std::uint64_t>(m >> 64);
}

/// Fisher-Yates permutation of [0, n) fully determined by (seed, stream).
inline std::vector<std::size_t> counter_permutation(std::size_t n, std::uint64_t seed,
                                                    std::uint64_t stream) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const auto j = counter_below(seed, stream, i, i);
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

/// Sequential generator on top of the counter hash, for code that wants a stream.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  double uniform() noexcept { return counter_uniform(seed_, stream_, counter_++); }
  std::uint64_t below(std::uint64_t n) noexcept {
    return counter_below(seed_, stream_, counter_++, n);
  }
  /// Standard normal via Box-Muller; both uniforms come from this stream.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace nprobe
