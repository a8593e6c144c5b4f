#ifndef FIBWALK_DISTORTION_HPP
#define FIBWALK_DISTORTION_HPP

#include <array>
#include <optional>
#include <vector>

#include "fibwalk/fib_map.hpp"
#include "fibwalk/interval.hpp"
#include "fibwalk/real.hpp"

namespace fibwalk {

// Four-interval configuration: j strictly inside t, l and r the components
// of t \ j.
struct CrossConfig {
  IntervalR t;
  IntervalR j;

  CrossConfig(IntervalR t_, IntervalR j_) : t(std::move(t_)), j(std::move(j_)) {
    if (!(t.lo < j.lo) || !(j.hi < t.hi))
      throw DegenerateConfigError("CrossConfig: j must be strictly interior to t");
  }

  Real l_len() const { return j.lo - t.lo; }
  Real r_len() const { return t.hi - j.hi; }
};

// C(t,j) = |t||j| / (|l||r|).
inline Real cross_ratio(const CrossConfig& cfg) {
  Real l = cfg.l_len(), r = cfg.r_len();
  if (l.is_zero() || r.is_zero())
    throw DegenerateConfigError("cross_ratio: empty side component");
  return (cfg.t.length() * cfg.j.length()) / (l * r);
}

namespace detail {

// Advances interval endpoints one map step, failing if the interval ever
// straddles the fold point strictly (the iterate would not be monotone).
template <class MapT>
void step_monotone(const MapT& f, Real& a, Real& b) {
  if (auto c = f.fold_point()) {
    Real lo = a.min(b), hi = a.max(b);
    if (lo < *c && *c < hi)
      throw NonMonotoneError("orbit interval straddles the critical point");
  }
  a = f.eval(a);
  b = f.eval(b);
}

}  // namespace detail

struct DistortionRecord {
  long n;
  Real B_value;
  Real sum_lengths;  // sum_{i<n} |f^i(t)|
  Real max_length;   // max_{i<=n} |f^i(t)|  (the epsilon of the estimate)
};

// B(f^n,t,j) = C(f^n t, f^n j) / C(t,j), computed from endpoint orbits.
// Requires f^n|t to be a diffeomorphism (verified step by step).
template <class MapT>
DistortionRecord cross_ratio_distortion(const MapT& f, long n,
                                        const CrossConfig& cfg) {
  Real tl = cfg.t.lo, th = cfg.t.hi, jl = cfg.j.lo, jh = cfg.j.hi;
  long prec = tl.precision();
  Real sum(0L, prec);
  Real maxlen = cfg.t.length();
  for (long i = 0; i < n; ++i) {
    Real len = (th - tl).abs();
    sum = sum + len;
    maxlen = maxlen.max(len);
    detail::step_monotone(f, tl, th);
    detail::step_monotone(f, jl, jh);
  }
  maxlen = maxlen.max((th - tl).abs());
  Real T = (th - tl).abs(), J = (jh - jl).abs();
  Real L = (jl - tl).abs(), R = (th - jh).abs();
  if (L.is_zero() || R.is_zero())
    throw DegenerateConfigError("cross_ratio_distortion: degenerate image");
  Real C_img = (T * J) / (L * R);
  Real C_src = cross_ratio(cfg);
  return {n, C_img / C_src, sum, maxlen};
}

struct DoubcResult {
  Real lhs;
  Real rhs_lower;
  Real rhs_upper;
  bool pass;
};

// Two-interval inequality (disjoint j1 left of j2 inside t, Theta = 1):
//   lower <= (|j1|/|J1|)(|J2|/|j2|) <= upper.
template <class MapT>
DoubcResult doubc_check(const MapT& f, long n, const IntervalR& t,
                        const IntervalR& j1, const IntervalR& j2) {
  if (!(j1.hi < j2.lo))
    throw OrderingError("doubc_check: j1 must lie strictly left of j2");
  if (!(t.lo < j1.lo) || !(j2.hi < t.hi))
    throw DegenerateConfigError("doubc_check: j1, j2 must be strictly interior");
  std::array<Real, 6> q{t.lo, j1.lo, j1.hi, j2.lo, j2.hi, t.hi};
  for (long i = 0; i < n; ++i) {
    if (auto c = f.fold_point()) {
      Real lo = q[0].min(q[5]), hi = q[0].max(q[5]);
      if (lo < *c && *c < hi)
        throw NonMonotoneError("doubc_check: orbit interval straddles c");
    }
    for (auto& x : q) x = f.eval(x);
  }
  bool rev = q[0] > q[5];
  if (rev) {
    std::array<Real, 6> r{q[5], q[4], q[3], q[2], q[1], q[0]};
    q = r;
  }
  auto len = [](const Real& a, const Real& b) { return (b - a).abs(); };
  Real J1 = len(q[1], q[2]), J2 = len(q[3], q[4]);
  Real R1 = len(q[2], q[5]), R2 = len(q[4], q[5]);
  Real L1 = len(q[0], q[1]), L2 = len(q[0], q[3]);
  Real J1uR1 = len(q[1], q[5]), J2uR2 = len(q[3], q[5]);
  Real L2uJ2 = len(q[0], q[4]), L1uJ1 = len(q[0], q[2]);
  Real lhs = (j1.length() / J1) * (J2 / j2.length());
  Real lower = (J2uR2 * R2) / (J1uR1 * R1);
  Real upper = (L2 * L2uJ2) / (L1 * L1uJ1);
  return {lhs, lower, upper, lower <= lhs && lhs <= upper};
}

struct KoebeResult {
  Real ratio;
  Real bound;
  bool pass;
};

// Koebe distortion test: if f^n(t) contains a tau-scaled neighbourhood of
// f^n(j), then sup/inf of |Df^n| over j is bounded by ((1+tau)/tau)^2
// (Theta = 1 for negative Schwarzian). The sup/inf is estimated on a
// Chebyshev-spaced sample of j plus both endpoints.
template <class MapT>
KoebeResult koebe_check(const MapT& f, long n, const IntervalR& j,
                        const IntervalR& t, const Real& tau,
                        int samples = 1024) {
  if (!t.contains(j)) throw DomainError("koebe_check: j must lie inside t");
  long prec = t.lo.precision();
  Real tl = t.lo, th = t.hi, jl = j.lo, jh = j.hi;
  for (long i = 0; i < n; ++i) {
    detail::step_monotone(f, tl, th);
    jl = f.eval(jl);
    jh = f.eval(jh);
  }
  Real Jlen = (jh - jl).abs();
  Real left = (jl.min(jh) - tl.min(th)).abs();
  Real right = (th.max(tl) - jh.max(jl)).abs();
  if (left < tau * Jlen || right < tau * Jlen)
    throw DomainError("koebe_check: image lacks the tau-scaled collar");

  // chain-rule |Df^n| at Chebyshev nodes of j (plus the endpoints)
  Real pi(0L, prec);
  mpfr_const_pi(pi.raw(), MPFR_RNDN);
  Real mid = j.midpoint(), half = j.length().mul_2exp(-1);
  std::optional<Real> lo_d, hi_d;
  for (int k = 0; k < samples + 2; ++k) {
    Real x(0L, prec);
    if (k == 0)
      x = j.lo;
    else if (k == 1)
      x = j.hi;
    else {
      Real theta = pi * Real(2 * (k - 1) - 1, prec) / Real(2L * samples, prec);
      Real ck(0L, prec);
      mpfr_cos(ck.raw(), theta.raw(), MPFR_RNDN);
      x = mid + half * ck;
    }
    Real dp(1L, prec);
    for (long i = 0; i < n; ++i) {
      dp = dp * f.deriv(x).abs();
      x = f.eval(x);
    }
    if (!lo_d || dp < *lo_d) lo_d = dp;
    if (!hi_d || dp > *hi_d) hi_d = dp;
  }
  Real ratio = *hi_d / *lo_d;
  Real one(1L, prec);
  Real bound = ((one + tau) / tau).pow_si(2);
  bool pass = ratio <= bound * (one + pow2(-20, prec));
  return {ratio, bound, pass};
}

// Maximal interval around x on which f^n is a diffeomorphism, obtained by
// pulling the constraint interval back through the inverse branch along
// the orbit of x, clamping at the critical point where the next image
// would fold.
inline IntervalR monotone_branch(const FibMap& f, long n, const Real& x) {
  long prec = f.precision();
  const Real& c = f.c();
  std::vector<Real> orb = f.orbit(x, n > 0 ? n - 1 : 0);
  Real lo(0L, prec), hi(1L, prec);  // constraint on f^n-images
  const Real& lam = f.lambda();
  for (long j = n - 1; j >= 0; --j) {
    const Real& xj = orb[static_cast<size_t>(j)];
    if (xj == c)
      throw PrecriticalError("monotone_branch: orbit hits c at order " +
                             std::to_string(j));
    bool right = xj > c;
    bool top_clamp = hi >= lam;
    bool bot_clamp = lo.sign() <= 0;
    Real pre_top = top_clamp ? c : f.inverse(hi, right);
    Real pre_bot = bot_clamp ? Real(right ? 1L : 0L, prec) : f.inverse(lo, right);
    if (right) {
      lo = pre_top;
      hi = pre_bot;
    } else {
      lo = pre_bot;
      hi = pre_top;
    }
  }
  if (x < lo || x > hi)
    throw BranchError("monotone_branch: x escaped the pullback interval");
  return IntervalR(lo, hi);
}

// (sum_{i<n} |f^i(t)|, max_{i<=n} |f^i(t)|) for an interval given by its
// endpoints (lo == hi degenerates to zero sums). Folding at the critical
// point is handled exactly, so no monotonicity is required.
inline std::pair<Real, Real> orbit_length_sum(const FibMap& f, long n,
                                              const Real& lo_in,
                                              const Real& hi_in) {
  long prec = f.precision();
  Real a = lo_in.min(hi_in), b = lo_in.max(hi_in);
  Real sum(0L, prec), maxlen = b - a;
  const Real& c = f.c();
  for (long i = 0; i < n; ++i) {
    Real len = b - a;
    sum = sum + len;
    maxlen = maxlen.max(len);
    bool folds = a < c && c < b;
    Real fa = f.eval(a), fb = f.eval(b);
    Real nlo = fa.min(fb);
    Real nhi = folds ? f.lambda() : fa.max(fb);
    a = nlo;
    b = nhi;
  }
  maxlen = maxlen.max(b - a);
  return {sum, maxlen};
}

inline std::pair<Real, Real> orbit_length_sum(const FibMap& f, long n,
                                              const IntervalR& t) {
  return orbit_length_sum(f, n, t.lo, t.hi);
}

}  // namespace fibwalk

#endif  // FIBWALK_DISTORTION_HPP
