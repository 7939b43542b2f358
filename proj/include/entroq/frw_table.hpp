// generated by tools/frw_reduction.py; do not edit
#pragma once

namespace entroq::frw_table {

// value = coeff * G^grav * V0^volume * a^scale * k^curv
struct Term {
  double coeff;
  int grav, volume, scale, curv;
};

// kinetic_aa = -2*pi*G/(3*V0*a)
inline constexpr Term kinetic_aa{-2.0943951023931955, 1, -1, -1, 0};
// potential = -3*V0*a*k/(8*pi*G)
inline constexpr Term potential{-0.11936620731892150, -1, 1, 1, 1};
// kinetic_phi = 1/(2*V0*a**3)
inline constexpr Term kinetic_phi{0.50000000000000000, 0, -1, -3, 0};
// measure = a**3
inline constexpr Term measure{1.0000000000000000, 0, 0, 3, 0};
// ricci = 6*k/a**2
inline constexpr Term ricci{6.0000000000000000, 0, 0, -2, 1};

}  // namespace entroq::frw_table
