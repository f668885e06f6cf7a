#pragma once

// Counter-based random numbers. Every random draw in the renderer is a pure
// function of (key, counter), so results do not depend on thread scheduling.

#include <array>
#include <cstdint>
#include <initializer_list>

namespace plb {

/// Philox4x32 with 10 rounds (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Derives a child seed from a base seed and a sequence of integer coordinates.
/// Distinct coordinate tuples give (with overwhelming probability) distinct seeds.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> coords) {
  std::uint64_t h = mix64(base ^ 0x6A09E667F3BCC909ull);
  for (std::uint64_t c : coords) h = mix64(h ^ mix64(c + 0x3C6EF372FE94F82Bull));
  return h;
}

/// Stream of uniforms addressed by (seed, a, b): used per (pixel, sample).
class CounterStream {
 public:
  constexpr CounterStream(std::uint64_t seed, std::uint32_t a, std::uint32_t b)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        ctr_{a, b, 0u, 0u} {}

  constexpr std::uint32_t next_u32() {
    if (pos_ == 4) {
      block_ = Philox4x32::generate(ctr_, key_);
      ++ctr_[2];
      if (ctr_[2] == 0) ++ctr_[3];
      pos_ = 0;
    }
    return block_[pos_++];
  }

  /// Uniform double in (0, 1) on a 2^-32 lattice (one 32-bit draw).
  constexpr double uniform() { return (static_cast<double>(next_u32()) + 0.5) * 0x1.0p-32; }

 private:
  Philox4x32::Key key_;
  Philox4x32::Counter ctr_;
  Philox4x32::Counter block_{};
  int pos_ = 4;
};

}  // namespace plb
