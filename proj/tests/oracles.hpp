#pragma once

// Reference values computed outside this code base and frozen here.
//   grad_sq_W, critical_W: mpmath quad (30 digits) of |S^{N-1}| int W'^2 r^{N-1}
//                          and |S^{N-1}| int W^{2*} r^{N-1}
//   e0:                    scipy DOP853 shooting (rtol 1e-12) from r=1e-4 against
//                          r^{-nu} K_nu(e r) at r=40, Wronskian root by brentq
//   energy_09W_N3:         |grad W|^2 (0.81/2 - 0.9^6/6), mpmath

namespace oracle {

inline constexpr double grad_sq_W[6] = {0, 0, 0, 12.820992204969127, 105.27578027828649, 844.36026476273856};
inline constexpr double e0[6] = {0, 0, 0, 1.100167216807804, 0.7655592023143176, 0.6180768784289333};
inline constexpr double energy_09W_N3 = 4.0569016899456634;

} // namespace oracle
