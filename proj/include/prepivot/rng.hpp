#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>

namespace prepivot {

namespace detail {

// SplitMix64 finalizer; full-avalanche 64-bit mixer.
inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
  return (x << k) | (x >> (64 - k));
}

// 128-layer ziggurat tables for the standard normal, built once.
struct ZigguratTables {
  double x[129];
  double f[129];
  ZigguratTables() {
    constexpr double r = 3.442619855899;        // rightmost layer edge
    constexpr double v = 9.91256303526217e-3;   // common layer area
    x[0] = v / std::exp(-0.5 * r * r);          // virtual width of the base strip
    x[1] = r;
    for (int i = 2; i < 128; ++i) {
      const double prev = x[i - 1];
      x[i] = std::sqrt(-2.0 * std::log(v / prev + std::exp(-0.5 * prev * prev)));
    }
    x[128] = 0.0;
    for (int i = 0; i <= 128; ++i) f[i] = std::exp(-0.5 * x[i] * x[i]);
  }
};

inline const ZigguratTables& ziggurat() {
  static const ZigguratTables t;
  return t;
}

}  // namespace detail

// Splittable stream keyed by (seed, path). The path digest is kept separate
// from the draw state, so child(i) depends only on the path, never on how many
// draws were consumed. Distinct paths give statistically independent streams.
class RngStream {
 public:
  RngStream() : RngStream(0, {}) {}

  RngStream(std::uint64_t seed, std::span<const std::uint64_t> path) {
    k0_ = detail::mix64(seed ^ 0x6a09e667f3bcc908ULL);
    k1_ = detail::mix64(seed ^ 0xbb67ae8584caa73bULL);
    for (std::uint64_t e : path) absorb(e);
    init_state();
  }

  RngStream(std::uint64_t seed, std::initializer_list<std::uint64_t> path)
      : RngStream(seed, std::span<const std::uint64_t>(path.begin(), path.size())) {}

  // Stream for path + [index]; pure in (seed, path, index).
  RngStream child(std::uint64_t index) const {
    RngStream c(*this, no_init_tag{});
    c.absorb(index);
    c.init_state();
    return c;
  }

  std::uint64_t next_u64() noexcept {
    // xoshiro256++
    const std::uint64_t result = detail::rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = detail::rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0,1) with 53 random bits.
  double uniform() noexcept { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased integer on [0, bound); bound >= 1.
  std::uint64_t uniform_int(std::uint64_t bound) noexcept {
    unsigned __int128 m = (unsigned __int128)next_u64() * bound;
    auto lo = (std::uint64_t)m;
    if (lo < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (lo < threshold) {
        m = (unsigned __int128)next_u64() * bound;
        lo = (std::uint64_t)m;
      }
    }
    return (std::uint64_t)(m >> 64);
  }

  // Standard normal via 128-layer ziggurat.
  double normal() noexcept {
    const auto& t = detail::ziggurat();
    for (;;) {
      const std::uint64_t u = next_u64();
      const int i = int(u & 127);
      const bool neg = (u >> 7) & 1;
      const double x = double(u >> 11) * 0x1.0p-53 * t.x[i];
      if (x < t.x[i + 1]) return neg ? -x : x;
      if (i == 0) {
        // Tail beyond x[1], Marsaglia's exponential rejection.
        constexpr double r = 3.442619855899;
        double xx, yy;
        do {
          xx = -std::log(1.0 - uniform()) / r;
          yy = -std::log(1.0 - uniform());
        } while (yy + yy < xx * xx);
        return neg ? -(r + xx) : (r + xx);
      }
      const double fx = std::exp(-0.5 * x * x);
      if (t.f[i] + uniform() * (t.f[i + 1] - t.f[i]) < fx) return neg ? -x : x;
    }
  }

  // Exponential with the given mean.
  double exponential(double mean) noexcept { return -mean * std::log1p(-uniform()); }

 private:
  struct no_init_tag {};
  RngStream(const RngStream& parent, no_init_tag) : k0_(parent.k0_), k1_(parent.k1_) {}

  void absorb(std::uint64_t e) noexcept {
    k0_ = detail::mix64(k0_ ^ detail::mix64(e ^ 0x510e527fade682d1ULL));
    k1_ = detail::mix64(k1_ + detail::mix64(e ^ 0x9b05688c2b3e6c1fULL));
  }

  void init_state() noexcept {
    std::uint64_t sm = k0_;
    s_[0] = detail::mix64(sm += k1_);
    s_[1] = detail::mix64(sm += k1_);
    s_[2] = detail::mix64(sm += k1_);
    s_[3] = detail::mix64(sm += k1_);
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
  }

  std::uint64_t k0_, k1_;  // path digest
  std::uint64_t s_[4];     // xoshiro state
};

inline RngStream derive_stream(std::uint64_t seed, std::span<const std::uint64_t> path) {
  return RngStream(seed, path);
}

inline RngStream derive_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  return RngStream(seed, path);
}

}  // namespace prepivot
