#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace mkv {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Output is a
/// pure function of (key, counter).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

/// Gaussian increments keyed by (seed, stream, particle, step). `stream`
/// separates independent clouds that share a seed.
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t seed, std::uint32_t stream = 0) : seed_(seed), stream_(stream) {}

  std::uint64_t seed() const { return seed_; }
  std::uint32_t stream() const { return stream_; }

  /// Fills out with independent N(0, scale^2) draws.
  void gaussian(std::uint64_t particle, std::uint64_t step, double scale, std::span<double> out) const {
    const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed_),
                                           static_cast<std::uint32_t>(seed_ >> 32) ^ (stream_ * 0x85EBCA6Bu)};
    std::size_t filled = 0;
    for (std::uint32_t block = 0; filled < out.size(); ++block) {
      const std::array<std::uint32_t, 4> ctr{static_cast<std::uint32_t>(particle),
                                             static_cast<std::uint32_t>(particle >> 32) + (block << 20),
                                             static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32)};
      const auto r = philox4x32(ctr, key);
      for (int pair = 0; pair < 2 && filled < out.size(); ++pair) {
        const double u1 = to_open_unit(r[2 * pair]);
        const double u2 = to_open_unit(r[2 * pair + 1]);
        const double rad = std::sqrt(-2.0 * std::log(u1));
        const double ang = 2.0 * std::numbers::pi * u2;
        out[filled++] = scale * rad * std::cos(ang);
        if (filled < out.size()) out[filled++] = scale * rad * std::sin(ang);
      }
    }
  }

 private:
  static double to_open_unit(std::uint32_t u) { return (static_cast<double>(u) + 0.5) * 0x1.0p-32; }

  std::uint64_t seed_;
  std::uint32_t stream_;
};

}  // namespace mkv
