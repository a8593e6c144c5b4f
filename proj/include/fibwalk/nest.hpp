#ifndef FIBWALK_NEST_HPP
#define FIBWALK_NEST_HPP

#include <optional>
#include <string>
#include <vector>

#include "fibwalk/combinatorics.hpp"
#include "fibwalk/distortion.hpp"
#include "fibwalk/fib_map.hpp"
#include "fibwalk/real.hpp"

namespace fibwalk {

// Per-level record of the closest-return geometry. Points are stored on
// the side of d_n; distances are side-free. The *_f companions live in the
// critical-value scale (distance to c^f = f(c)).
struct NestLevel {
  int n = 0;
  long S_n = 0;
  int side = 0;  // sign of d_n - c
  Real d, d_f, dist_d, dist_d_f;
  Real z, z_f, dist_z, dist_z_f;
  Real u, u_f, dist_u, dist_u_f;
  std::optional<Real> t_f, dist_t_f;          // n >= 4
  std::optional<Real> y, y_f, dist_y, dist_y_f;  // n <= K-2
};

struct NestData {
  FibMap f;
  int K = 0;
  std::vector<long> S;
  std::vector<Real> corbit;  // corbit[j] = c_{1+j}, j = 0..S_K-1
  std::vector<NestLevel> levels;  // index n = 0..K
};

namespace detail {

// Pullback of y through the inverse branches along the critical-value
// orbit: w_m = y, w_j = f^{-1}(w_{j+1}) on the side of c_{1+j}.
inline Real pull_chain(const FibMap& f, const std::vector<Real>& corbit,
                       long msteps, Real y) {
  const Real& c = f.c();
  for (long j = msteps - 1; j >= 0; --j)
    y = f.inverse(y, corbit[static_cast<size_t>(j)] > c);
  return y;
}

inline Real orientation_reversing_fixed_point(const FibMap& f) {
  long prec = f.precision();
  Real lo = f.c(), hi(1L, prec);
  for (long i = 0; i < prec + 16; ++i) {
    Real mid = (lo + hi).mul_2exp(-1);
    if (f.eval(mid) > mid)
      lo = mid;
    else
      hi = mid;
  }
  return (lo + hi).mul_2exp(-1);
}

}  // namespace detail

// |Df^n(x)| by the exact chain-rule product along the orbit.
inline Real deriv_abs_product(const FibMap& f, Real x, long n) {
  Real p(1L, f.precision());
  for (long i = 0; i < n; ++i) {
    p = p * f.deriv(x).abs();
    x = f.eval(x);
  }
  return p;
}

// Builds the per-level skeleton d_n, z_n, u_n, y_n, t_n^f to depth K.
// Precondition: f has verified Fibonacci combinatorics to depth K. Every
// pullback is re-verified by forward iteration to 2^(-p/2); failures raise
// BranchError.
inline NestData build_nest(const FibMap& f, int K) {
  if (K < 4) throw DomainError("build_nest: K >= 4 required");
  long prec = f.precision();
  const Real& c = f.c();
  Real cf = f.critical_value();
  NestData nd{f, K, fibonacci_times(K), {}, {}};
  const auto& S = nd.S;
  long SK = S[static_cast<size_t>(K)];
  nd.corbit = f.orbit(f.eval(c), SK - 1);
  Real tol = pow2(-prec / 2, prec);

  auto forward = [&](Real x, long n) {
    for (long i = 0; i < n; ++i) x = f.eval(x);
    return x;
  };

  std::vector<NestLevel> lv(static_cast<size_t>(K) + 1);
  for (int n = 0; n <= K; ++n) {
    NestLevel& L = lv[static_cast<size_t>(n)];
    L.n = n;
    L.S_n = S[static_cast<size_t>(n)];
    L.d = nd.corbit[static_cast<size_t>(L.S_n - 1)];
    Real dc = L.d - c;
    L.side = dc.sign();
    if (L.side == 0 || dc.abs() < c.mul_2exp(-prec + 9))
      throw PrecisionExhausted("build_nest: d_" + std::to_string(n) +
                               " indistinguishable from c");
    L.d_f = f.eval(L.d);
    L.dist_d = dc.abs();
    L.dist_d_f = (L.d_f - cf).abs();
  }

  // z_n^f: pullback of c through S_n - 1 steps; t_n^f: pullback of d_{n-4}.
  for (int n = 0; n <= K; ++n) {
    NestLevel& L = lv[static_cast<size_t>(n)];
    bool right = L.side > 0;
    L.z_f = detail::pull_chain(f, nd.corbit, L.S_n - 1, c);
    if ((forward(L.z_f, L.S_n - 1) - c).abs() > tol)
      throw BranchError("build_nest: z pullback failed at level " +
                        std::to_string(n));
    L.z = f.inverse(L.z_f, right);
    L.dist_z = (L.z - c).abs();
    L.dist_z_f = (L.z_f - cf).abs();
    if (n >= 4) {
      const Real& d4 = lv[static_cast<size_t>(n - 4)].d;
      Real tf = detail::pull_chain(f, nd.corbit, L.S_n - 1, d4);
      if ((forward(tf, L.S_n - 1) - d4).abs() > tol)
        throw BranchError("build_nest: t pullback failed at level " +
                          std::to_string(n));
      if (!(tf > cf))
        throw BranchError("build_nest: t_f not beyond c^f at level " +
                          std::to_string(n));
      L.t_f = tf;
      L.dist_t_f = (tf - cf).abs();
    }
  }

  // u_0: orientation-reversing fixed point; u_n by the return recursion
  // f^{S_{n-1}}(u_n^f) = u_{n-1}^f pulled through the central branch.
  {
    NestLevel& L0 = lv[0];
    Real u0 = detail::orientation_reversing_fixed_point(f);
    L0.u = u0;
    L0.u_f = f.eval(u0);
    L0.dist_u = (u0 - c).abs();
    L0.dist_u_f = (L0.u_f - cf).abs();
  }
  for (int n = 1; n <= K; ++n) {
    NestLevel& L = lv[static_cast<size_t>(n)];
    const NestLevel& P = lv[static_cast<size_t>(n - 1)];
    long Sprev = S[static_cast<size_t>(n - 1)];
    Real uf = detail::pull_chain(f, nd.corbit, Sprev, P.u_f);
    if ((forward(uf, Sprev) - P.u_f).abs() > tol)
      throw BranchError("build_nest: u pullback failed at level " +
                        std::to_string(n));
    L.u_f = uf;
    L.u = f.inverse(uf, L.side > 0);
    L.dist_u = (L.u - c).abs();
    L.dist_u_f = (uf - cf).abs();
    if ((L.u - c).sign() != L.side)
      throw BranchError("build_nest: u_n landed on the wrong side at level " +
                        std::to_string(n));
  }

  // y_n = f^{S_n}(d_{n+2})
  for (int n = 0; n + 2 <= K; ++n) {
    NestLevel& L = lv[static_cast<size_t>(n)];
    Real y = forward(lv[static_cast<size_t>(n + 2)].d, L.S_n);
    L.y = y;
    L.y_f = f.eval(y);
    L.dist_y = (y - c).abs();
    L.dist_y_f = (*L.y_f - cf).abs();
  }

  // Figure 3.6 orderings: |u_n| < |z_{n-1}| < |d_n|, nest strictly shrinking.
  for (int n = 1; n <= K; ++n) {
    const NestLevel& L = lv[static_cast<size_t>(n)];
    const NestLevel& P = lv[static_cast<size_t>(n - 1)];
    if (!(L.dist_u < P.dist_z && P.dist_z < L.dist_d))
      throw BranchError("build_nest: z_(n-1) not between u_n and d_n at level " +
                        std::to_string(n));
    if (n >= 2 && !(L.dist_u < P.dist_u))
      throw BranchError("build_nest: nest fails to shrink at level " +
                        std::to_string(n));
    if (!(L.dist_d_f < P.dist_d_f))
      throw BranchError("build_nest: d^f fails to shrink at level " +
                        std::to_string(n));
  }

  nd.levels = std::move(lv);
  return nd;
}

struct IneqRow {
  std::string name;
  int level;
  Real lhs;
  Real rhs;
  Real margin;  // >= 1 means the inequality holds
  bool pass;
};

struct LambdaCheckResult {
  Real value;  // lambda^f_n = d^f_{n-2} / d^f_n
  bool pass;   // value > 3.85
  std::optional<Real> ln_value;  // ln(d^f_{n-4}/d^f_n), n >= 4
  bool ln_pass;
};

struct ScalingReport {
  int K = 0;
  std::vector<long> S;
  std::vector<NestLevel> levels;
  std::vector<std::optional<Real>> lambda_f;  // index n, defined n >= 2
  Real rho_inf;       // max measured d^f_k/d^f_{k+1}
  int n0_lambda = -1; // empirical threshold for lambda_check
  std::vector<IneqRow> rows;
  Real realb_C1, realb_C2;  // empirical constants of the ell-window
};

inline Real df_ratio(const ScalingReport& r, int k) {
  return r.levels[static_cast<size_t>(k)].dist_d_f /
         r.levels[static_cast<size_t>(k + 1)].dist_d_f;
}

// max of d^f_k/d^f_{k+1} over the window n-N0 <= k < n.
inline Real rho(const ScalingReport& r, int n, int N0) {
  if (N0 < 1 || N0 > 10) throw DomainError("rho: N0 must be in [1,10]");
  if (n - N0 < 0 || n > r.K) throw OutOfDepthError("rho: window out of depth");
  Real m = df_ratio(r, n - N0);
  for (int k = n - N0 + 1; k < n; ++k) m = m.max(df_ratio(r, k));
  return m;
}

namespace detail {

// Window clipped to the available levels; the paper's N0 <= 10 "may change
// from one lemma to another".
inline Real rho_clipped(const ScalingReport& r, int n, int N0) {
  int lo = std::max(0, n - N0);
  int hi = std::min(n, r.K);  // k < hi, needs k+1 <= K
  if (lo >= hi) lo = hi - 1;
  Real m = df_ratio(r, lo);
  for (int k = lo + 1; k < hi; ++k) m = m.max(df_ratio(r, k));
  return m;
}

}  // namespace detail

inline LambdaCheckResult lambda_check(const ScalingReport& r, int n) {
  if (n < 2 || n > r.K) throw OutOfDepthError("lambda_check: n out of depth");
  long prec = r.levels[0].dist_d_f.precision();
  LambdaCheckResult out{Real(0L, prec), false, std::nullopt, true};
  out.value = r.levels[static_cast<size_t>(n - 2)].dist_d_f /
              r.levels[static_cast<size_t>(n)].dist_d_f;
  out.pass = out.value > Real("3.85", prec);
  if (n >= 4) {
    Real lnv = (r.levels[static_cast<size_t>(n - 4)].dist_d_f /
                r.levels[static_cast<size_t>(n)].dist_d_f)
                   .log();
    out.ln_pass = lnv > Real("2.7", prec);
    out.ln_value = lnv;
  }
  return out;
}

inline ScalingReport make_scaling_report(const NestData& nd) {
  ScalingReport r;
  r.K = nd.K;
  r.S = nd.S;
  r.levels = nd.levels;
  long prec = nd.f.precision();
  r.lambda_f.resize(static_cast<size_t>(nd.K) + 1);
  for (int n = 2; n <= nd.K; ++n)
    r.lambda_f[static_cast<size_t>(n)] =
        r.levels[static_cast<size_t>(n - 2)].dist_d_f /
        r.levels[static_cast<size_t>(n)].dist_d_f;
  r.rho_inf = df_ratio(r, 0);
  for (int k = 1; k < nd.K; ++k) r.rho_inf = r.rho_inf.max(df_ratio(r, k));
  // empirical threshold from which both scaling laws hold through depth
  r.n0_lambda = -1;
  for (int n0 = 2; n0 <= nd.K; ++n0) {
    bool all = true;
    for (int n = n0; n <= nd.K; ++n) {
      auto lc = lambda_check(r, n);
      if (!lc.pass || !lc.ln_pass) {
        all = false;
        break;
      }
    }
    if (all) {
      r.n0_lambda = n0;
      break;
    }
  }
  r.realb_C1 = Real(0L, prec);
  r.realb_C2 = Real(0L, prec);
  return r;
}

// Lemmas 3.3-3.5 as numeric inequality rows, margins = bound/value (or
// value/bound for lower bounds); Theta = 1 throughout (Sf < 0).
inline std::vector<IneqRow> two_step_checks(const NestData& nd,
                                            const ScalingReport& r) {
  if (nd.K < 10) throw OutOfDepthError("two_step_checks: depth >= 10 required");
  long prec = nd.f.precision();
  const Real& ell = nd.f.ell();
  Real cf = nd.f.critical_value();
  std::vector<IneqRow> rows;
  auto push = [&](const std::string& name, int level, Real lhs, Real rhs,
                  bool lower_bound) {
    Real margin = lower_bound ? lhs / rhs : rhs / lhs;
    rows.push_back({name, level, lhs, rhs, margin, margin >= Real(1L, prec)});
  };
  for (int m = 4; m + 2 <= nd.K; ++m) {
    long Sm = nd.S[static_cast<size_t>(m)];
    Real dfm = deriv_abs_product(nd.f, cf, Sm);
    Real ratio_m = df_ratio(r, m);
    Real rho_cone = detail::rho_clipped(r, m + 1, 5);  // window [m-4, m]
    // Lemma 3.5 lower: |Df^{S_m}(c^f)| >= (d^f_m/d^f_{m+1}) rho^{-4/ell}
    push("cone_lower", m, dfm,
         ratio_m * rho_cone.pow(-(Real(4L, prec) / ell)), true);
    // Lemma 3.5 upper: <= 2 (d^f_m/d^f_{m+2}) ln(rho) rho^{1/ell}
    Real dd2 = r.levels[static_cast<size_t>(m)].dist_d_f /
               r.levels[static_cast<size_t>(m + 2)].dist_d_f;
    push("cone_upper", m, dfm,
         (dd2 * rho_cone.log() * rho_cone.pow(Real(1L, prec) / ell)).mul_2exp(1),
         false);
    // Lemma 3.4: |Df^{S_m}(d^f_{m+1})| <= 160 (d^f_{m+2}/d^f_{m+1}) ln^4 rho^{13/ell}
    Real lhs_d = deriv_abs_product(
        nd.f, r.levels[static_cast<size_t>(m + 1)].d_f, Sm);
    Real rho_dx = detail::rho_clipped(r, m + 2, 9);  // window [m-7, m+2)
    Real inv_ratio = r.levels[static_cast<size_t>(m + 2)].dist_d_f /
                     r.levels[static_cast<size_t>(m + 1)].dist_d_f;
    push("derxi", m, lhs_d,
         Real(160L, prec) * inv_ratio * rho_dx.log().pow_si(4) *
             rho_dx.pow(Real(13L, prec) / ell),
         false);
    // Lemma 3.3 remark with a = d_{m+1}, b = f^{S_m}(a) = d_{m+2}, i = 2:
    // <= (b^f/a^f) (4+i) ln(rho) i ln(rho) rho^{(4+i)/ell}
    Real rho_ln = detail::rho_clipped(r, m + 2, 10);
    Real lnr = rho_ln.log();
    push("lnln_i2", m, lhs_d,
         inv_ratio * Real(6L, prec) * lnr * Real(2L, prec) * lnr *
             rho_ln.pow(Real(6L, prec) / ell),
         false);
  }
  return rows;
}

// Props 3.6-3.7 and Theorem 3.8 rows plus the empirical realb constants.
inline std::vector<IneqRow> one_step_checks(const NestData& nd,
                                            ScalingReport& r) {
  if (nd.K < 10) throw OutOfDepthError("one_step_checks: depth >= 10 required");
  long prec = nd.f.precision();
  const Real& ell = nd.f.ell();
  Real cf = nd.f.critical_value();
  std::vector<IneqRow> rows;
  Real one(1L, prec);
  auto push = [&](const std::string& name, int level, Real lhs, Real rhs,
                  bool lower_bound) {
    Real margin = lower_bound ? lhs / rhs : rhs / lhs;
    rows.push_back({name, level, lhs, rhs, margin, margin >= one});
  };
  Real c51200(51200L, prec);
  Real lower_const = one + (one - Real("-2.7", prec).exp()) / (r.rho_inf - one);
  for (int n = 1; n + 1 <= nd.K; ++n) {
    Real rho_n = detail::rho_clipped(r, n, 10);
    Real ln9 = rho_n.log().pow_si(9);
    Real dfn = deriv_abs_product(nd.f, cf, nd.S[static_cast<size_t>(n)]);
    push("onestep_deriv_upper", n, dfn,
         c51200 * ln9 * rho_n.pow(Real(27L, prec) / ell), false);
    Real ratio_n = df_ratio(r, n);
    push("onestep_ratio_upper", n, ratio_n,
         c51200 * ln9 * rho_n.pow(Real(31L, prec) / ell), false);
    push("onestep_ratio_lower", n, ratio_n, lower_const, true);
    // kor, final line of the proof: (d^f_n - u^f_n)/u^f_n >= (1 - 1/2.7)/rho_n
    const NestLevel& L = r.levels[static_cast<size_t>(n)];
    Real kor_lhs = (L.dist_d_f - L.dist_u_f) / L.dist_u_f;
    push("kor", n, kor_lhs, (one - one / Real("2.7", prec)) / rho_n, true);
  }
  // composite self-consistency at the measured rho_inf
  push("rho_selfconsistency", -1, r.rho_inf,
       c51200 * r.rho_inf.log().pow_si(9) *
           r.rho_inf.pow(Real(31L, prec) / ell),
       false);
  // Theorem 3.8 window: report the empirical C1, C2 over the three
  // quantities scaled by ell.
  std::optional<Real> cmin, cmax;
  auto fold = [&](const Real& v) {
    Real s = v * ell;
    if (!cmin || s < *cmin) cmin = s;
    if (!cmax || s > *cmax) cmax = s;
  };
  for (int n = 1; n + 1 <= nd.K; ++n) {
    const NestLevel& L = r.levels[static_cast<size_t>(n)];
    const NestLevel& N1 = r.levels[static_cast<size_t>(n + 1)];
    fold((L.d - L.u).abs() / L.dist_u);
    fold((L.dist_d - N1.dist_d) / L.dist_d);
    fold((L.dist_u - N1.dist_u) / L.dist_u);
  }
  r.realb_C1 = *cmin;
  r.realb_C2 = *cmax;
  return rows;
}

// Largest fixed point of x = 51200 ln^9(x) x^{31/ell}, solved in log form
// by bracketed bisection. ell may be +inf (the limit equation); when
// 31/ell >= 1 no finite bracket exists.
inline Real rho_upper_bound(const Real& ell) {
  long prec = std::max(ell.precision(), 128L);
  bool limit = mpfr_inf_p(ell.raw()) != 0;
  Real one(1L, prec);
  Real eps = limit ? one : one - Real(31L, prec) / ell.with_precision(prec);
  if (eps.sign() <= 0)
    throw UnboundedError("rho_upper_bound: requires ell > 31");
  Real lnC = Real(51200L, prec).log();
  auto h = [&](const Real& t) { return eps * t - lnC - Real(9L, prec) * t.log(); };
  Real tmin = Real(9L, prec) / eps;
  if (h(tmin).sign() >= 0)
    throw UnboundedError("rho_upper_bound: no sign change (degenerate constants)");
  Real thi = tmin.mul_2exp(1);
  while (h(thi).sign() <= 0) thi = thi.mul_2exp(1);
  Real tlo = tmin;
  // bisect to relative width 1e-8 in t (hence in x, via dx/x = dt)
  Real stop = Real("1e-8", prec);
  while ((thi - tlo) / thi > stop) {
    Real mid = (tlo + thi).mul_2exp(-1);
    if (h(mid).sign() > 0)
      thi = mid;
    else
      tlo = mid;
  }
  return ((tlo + thi).mul_2exp(-1)).exp();
}

inline Real rho_upper_bound_limit(long prec = 256) {
  Real inf(0L, prec);
  mpfr_set_inf(inf.raw(), 1);
  return rho_upper_bound(inf);
}

}  // namespace fibwalk

#endif  // FIBWALK_NEST_HPP
