#ifndef FIBWALK_TESTS_TEST_UTIL_HPP
#define FIBWALK_TESTS_TEST_UTIL_HPP

#include "fibwalk/fibwalk.hpp"

namespace fwtest {

using fibwalk::Real;

// uniform Real in [lo, hi] from 53 random bits
inline Real uniform(fibwalk::SplitMix64& rng, const Real& lo, const Real& hi,
                    long prec) {
  return lo + (hi - lo) * Real(rng.uniform01(), prec);
}

inline bool close_rel(const Real& a, const Real& b, const Real& rel) {
  Real scale = a.abs().max(b.abs());
  if (scale.is_zero()) return (a - b).is_zero();
  return (a - b).abs() <= rel * scale;
}

inline bool close_abs(const Real& a, const Real& b, const Real& tol) {
  return (a - b).abs() <= tol;
}

// Random pair satisfying the scaling condition by construction: tail sums
// built backward from a unit geometric tail with per-step ratios inside
// [rho-, rho+], and nu proportional to a (with a bounded wiggle), which
// meets (tsecond)/(tthird) with a factor-2 slack at Omega1 = 0.3,
// Omega2 = 4.
inline std::pair<fibwalk::SequencePair, fibwalk::ScalingConstants>
random_scaling_pair(fibwalk::SplitMix64& rng, long prec = 192) {
  using fibwalk::Real;
  using fibwalk::SequencePair;
  using fibwalk::ScalingConstants;
  int d = static_cast<int>(rng.next() % 3);
  double cap = d == 0 ? 2.0 : std::pow(2.0, 1.0 / d);
  double rlo = 1.02 + 0.85 * (cap - 1.04) * rng.uniform01();
  double rhi = rlo + (cap - 0.005 - rlo) * rng.uniform01();
  Real rho_minus(rlo, prec), rho_plus(rhi, prec);
  Real q = Real(2L, prec) / (rho_minus + rho_plus);  // tail step in range
  const int P = 12;
  std::vector<Real> T(P + 1, Real(0L, prec));
  T[P] = Real(1L, prec);
  for (int k = P - 1; k >= 0; --k) {
    Real r = uniform(rng, rho_minus, rho_plus, prec);
    T[static_cast<size_t>(k)] = T[static_cast<size_t>(k + 1)] * r;
  }
  SequencePair pair;
  pair.a_tail_ratio = q;
  for (int k = 0; k < P; ++k)
    pair.a.push_back(T[static_cast<size_t>(k)] - T[static_cast<size_t>(k + 1)]);
  pair.a.push_back(Real(1L, prec) - q);  // a_P with tail sum exactly 1
  pair.nu_tail_ratio = q;
  std::vector<Real> raw;
  for (size_t k = 1; k < pair.a.size(); ++k)
    raw.push_back(pair.a[k] * Real(0.7 + 0.6 * rng.uniform01(), prec));
  Real z(0L, prec);
  for (const auto& x : raw) z = z + x;
  z = z + raw.back() * q / (Real(1L, prec) - q);
  for (auto& x : raw) pair.nu.push_back(x / z);
  ScalingConstants c{rho_minus,
                     rho_plus,
                     Real("0.3", prec),
                     Real(4L, prec),
                     ((rho_plus - Real(1L, prec)) /
                      (rho_minus - Real(1L, prec))) *
                             Real("1.05", prec) +
                         Real("0.05", prec),
                     d,
                     2,
                     pair.a[0]};
  return {pair, c};
}

}  // namespace fwtest

#endif
