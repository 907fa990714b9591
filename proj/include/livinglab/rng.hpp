#pragma once

// Portable, seedable randomness shared by every component that must be
// reproducible across machines.
//
// Generator: SplitMix64 (Steele, Lea, Flood 2014).
//   state += 0x9E3779B97F4A7C15
//   z = state
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   return z ^ (z >> 31)
//
// Uniform reals take the top 53 bits of one output: (x >> 11) * 2^-53,
// which lies in [0, 1). A fair coin is the top bit of one output.
// Strings are hashed with 64-bit FNV-1a; two seeds are combined with
// derive_seed(a, b) = mix64(a ^ mix64(b)).

#include <cstdint>
#include <string_view>

namespace livinglab {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

/// Stateless SplitMix64 finalizer: the output a generator seeded with
/// `x` produces on its first draw.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  std::uint64_t z = x + kGolden;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t a, std::uint64_t b) noexcept {
  return mix64(a ^ mix64(b));
}

inline std::uint64_t derive_seed(std::uint64_t a, std::string_view b) noexcept {
  return derive_seed(a, fnv1a64(b));
}

constexpr double to_unit(std::uint64_t x) noexcept {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

/// Single-draw uniform in [0, 1) for a seed.
constexpr double uniform(std::uint64_t seed) noexcept { return to_unit(mix64(seed)); }

class Rng {
 public:
  constexpr explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    std::uint64_t out = mix64(state_);
    state_ += kGolden;
    return out;
  }

  constexpr double uniform() noexcept { return to_unit(next()); }
  constexpr bool coin() noexcept { return (next() >> 63) != 0; }

  /// Uniform integer in [0, n), n > 0. Modulo bias is negligible for the
  /// n used here (far below 2^32).
  constexpr std::uint64_t below(std::uint64_t n) noexcept { return next() % n; }

 private:
  std::uint64_t state_;
};

}  // namespace livinglab
