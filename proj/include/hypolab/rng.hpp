#pragma once

// Counter-based random numbers: Philox4x32-10 (Salmon et al., SC'11).
// Every draw is a pure function of (seed, path_id, step, stream), so a path
// reproduces bit-for-bit regardless of which worker simulates it.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace hypolab {

using Philox4x32Counter = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(p);
  hi = static_cast<std::uint32_t>(p >> 32);
}

}  // namespace detail

inline Philox4x32Counter philox4x32(Philox4x32Counter ctr, Philox4x32Key key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t lo0, hi0, lo1, hi1;
    detail::mulhilo(detail::kPhiloxM0, ctr[0], lo0, hi0);
    detail::mulhilo(detail::kPhiloxM1, ctr[2], lo1, hi1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += detail::kPhiloxW0;
    key[1] += detail::kPhiloxW1;
  }
  return ctr;
}

/// Stream identifiers for the fourth counter word.
enum class Stream : std::uint32_t {
  kGaussian = 0,          // Brownian increments, one block per two components
  kCrossing = 0x10000u,   // uniforms for between-step crossing tests
  kSeeding = 0x20000u,    // optimizer restarts, Monte Carlo sample points
};

/// Stateless generator addressed by (seed, path_id).
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t path_id)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        path_lo_(static_cast<std::uint32_t>(path_id)),
        path_hi_(static_cast<std::uint32_t>(path_id >> 32)) {}

  /// Two uniforms in (0, 1) with 53-bit resolution.
  std::array<double, 2> uniform2(std::uint32_t step, std::uint32_t stream) const {
    const auto r = philox4x32({path_lo_, path_hi_, step, stream}, key_);
    return {to_unit(r[0], r[1]), to_unit(r[2], r[3])};
  }

  /// Two independent standard normals (Box-Muller).
  std::array<double, 2> normal2(std::uint32_t step, std::uint32_t stream) const {
    const auto u = uniform2(step, stream);
    const double radius = std::sqrt(-2.0 * std::log(u[0]));
    const double angle = 2.0 * std::numbers::pi * u[1];
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

  /// Fill out[0..n) with standard normals for one step.
  template <class Out>
  void normals(std::uint32_t step, int n, Out&& out, std::uint32_t stream_base = 0) const {
    for (int k = 0; k < n; k += 2) {
      const auto z = normal2(step, stream_base + static_cast<std::uint32_t>(k / 2));
      out[k] = z[0];
      if (k + 1 < n) out[k + 1] = z[1];
    }
  }

 private:
  static double to_unit(std::uint32_t lo, std::uint32_t hi) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  Philox4x32Key key_;
  std::uint32_t path_lo_;
  std::uint32_t path_hi_;
};

/// Derive an independent 64-bit seed for a named sub-experiment.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  const auto r = philox4x32({static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32),
                             0xA5A5A5A5u, 0x5EEDu},
                            {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
  return (static_cast<std::uint64_t>(r[1]) << 32) | r[0];
}

}  // namespace hypolab
