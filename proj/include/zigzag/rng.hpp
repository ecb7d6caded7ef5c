#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace zigzag {

// Mixes a 64-bit value; used to key independent streams from (seed, stream).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Per-chain random stream keyed by (seed, stream id). Each sampler run owns
// one Rng; concurrent chains use distinct stream ids so results do not
// depend on thread scheduling. The draw order is part of the
// reproducibility contract: one uniform per coordinate proposal, one per
// thinning decision, one per sub-sample index.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : eng_(splitmix64(splitmix64(seed + 0x632be59bd9b4e019ULL) ^
                        splitmix64(stream))) {}

  // Uniform on the open interval (0, 1); never returns an endpoint.
  double uniform() {
    return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1p-53;
  }

  // Uniform on {0, ..., n-1}. For n == 1 no randomness is consumed, so a
  // single-datum sub-sampling run replays exactly as the plain sampler.
  std::uint64_t uniform_below(std::uint64_t n) {
    if (n <= 1) return 0;
    const auto k = static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

  // Standard normal via Box-Muller; stateless, two uniforms per draw.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace zigzag
