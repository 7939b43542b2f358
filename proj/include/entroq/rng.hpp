#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace entroq {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// A draw is a pure function of (key, counter), so any sample index can be
/// generated independently of the others.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) {
    for (int r = 0; r < 10; ++r) {
      if (r > 0) {
        key[0] += 0x9E3779B9u;
        key[1] += 0xBB67AE85u;
      }
      std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
      std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
      auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
      auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }
};

/// Standard normals addressed by (seed, sample, slot).  Each Philox block yields two
/// 53-bit uniforms in (0,1), turned into two normals by Box-Muller.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  /// Normal number `slot` of sample `sample`.
  double operator()(std::uint64_t sample, std::uint32_t slot) const {
    auto pair = normal_pair(sample, slot / 2);
    return (slot % 2 == 0) ? pair[0] : pair[1];
  }

  std::array<double, 2> normal_pair(std::uint64_t sample, std::uint32_t block) const {
    Philox4x32::Counter c{static_cast<std::uint32_t>(sample), static_cast<std::uint32_t>(sample >> 32), block, 0u};
    auto r = Philox4x32::generate(c, key_);
    double u1 = to_unit(r[0], r[1]);
    double u2 = to_unit(r[2], r[3]);
    double rad = std::sqrt(-2.0 * std::log(u1));
    double ang = 6.283185307179586476925 * u2;
    return {rad * std::cos(ang), rad * std::sin(ang)};
  }

 private:
  static double to_unit(std::uint32_t a, std::uint32_t b) {
    std::uint64_t m = (std::uint64_t{a >> 5} << 26) | (b >> 6);
    return (static_cast<double>(m) + 0.5) * 0x1.0p-53;
  }
  Philox4x32::Key key_;
};

}  // namespace entroq
