#pragma once

// Portable, deterministic random streams. Nothing here depends on the
// standard library's distributions, whose output is implementation-defined.
//
//   engine   xoshiro256** (Blackman & Vigna), state filled by SplitMix64
//   uniform  53 high bits, shifted by half an ulp: values in (0, 1)
//   normal   Marsaglia polar method; the second variate of each pair is
//            cached and returned by the next call
//   gamma    Marsaglia-Tsang squeeze for shape >= 1; shape < 1 uses
//            Gamma(shape + 1) * U^(1/shape)
//   beta     G_a / (G_a + G_b), G_a drawn before G_b

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace metasurf {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 output function.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Stream {
 public:
  explicit Stream(std::uint64_t seed) noexcept {
    std::uint64_t x = seed;
    for (auto& s : state_) {
      x += kGolden;
      s = mix64(x);
    }
  }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

  double gamma(double shape) noexcept {
    if (shape < 1.0) {
      const double g = gamma(shape + 1.0);
      return g * std::pow(uniform(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      const double x2 = x * x;
      if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
      if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double beta(double a, double b) noexcept {
    const double ga = gamma(a);
    const double gb = gamma(b);
    return ga / (ga + gb);
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Folds a sequence of 64-bit words into one seed:
///   h0 = mix64(master), h_{j+1} = mix64(h_j ^ mix64(word_j + (j+1) * golden)).
/// The position term keeps permuted word sequences apart.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> words) noexcept {
  std::uint64_t h = mix64(master);
  std::uint64_t j = 0;
  for (auto w : words) {
    ++j;
    h = mix64(h ^ mix64(w + j * kGolden));
  }
  return h;
}

inline std::uint64_t double_bits(double x) noexcept {
  if (x == 0.0) x = 0.0;  // fold -0.0 onto +0.0
  return std::bit_cast<std::uint64_t>(x);
}

}  // namespace metasurf
