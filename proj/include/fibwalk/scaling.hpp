#ifndef FIBWALK_SCALING_HPP
#define FIBWALK_SCALING_HPP

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fibwalk/real.hpp"

namespace fibwalk {

// Constants of the scaling condition. K_plus = (rho+ - 1)rho- / (rho- - 1)rho+.
struct ScalingConstants {
  Real rho_minus;
  Real rho_plus;
  Real Omega1;
  Real Omega2;
  Real C;
  int d = 0;
  long k0 = 1;
  Real a0;

  // The random-walk lemmas need rho+ < 2^(1/d) (checked where used); the
  // inequality checks themselves only need an ordered window above 1.
  void validate() const {
    long p = rho_minus.precision();
    Real one(1L, p);
    if (!(one < rho_minus && rho_minus <= rho_plus))
      throw DomainError("ScalingConstants: need 1 < rho- <= rho+");
    if (Omega1.sign() <= 0 || Omega2.sign() <= 0)
      throw DomainError("ScalingConstants: Omega1, Omega2 > 0 required");
    if (!(C > one)) throw DomainError("ScalingConstants: C > 1 required");
    if ((rho_plus - one) / (rho_minus - one) > C)
      throw DomainError("ScalingConstants: (rho+ - 1)/(rho- - 1) exceeds C");
    if (d < 0) throw DomainError("ScalingConstants: d >= 0 required");
    if (k0 < 1) throw DomainError("ScalingConstants: k0 >= 1 required");
    if (a0.sign() <= 0) throw DomainError("ScalingConstants: a0 > 0 required");
  }

  Real k_plus() const {
    long p = rho_minus.precision();
    Real one(1L, p);
    return ((rho_plus - one) * rho_minus) / ((rho_minus - one) * rho_plus);
  }
};

// Finite prefixes with declared exact geometric tails. a is indexed from 0
// (a_0 is the Koebe-space constant), nu from 1. Tail ratio 0 means the
// sequence stops at the prefix.
struct SequencePair {
  std::vector<Real> a;      // a_0 .. a_{P}
  Real a_tail_ratio;        // a_i = a_P * q^(i-P) for i > P
  std::vector<Real> nu;     // nu_1 .. nu_T
  Real nu_tail_ratio;

  void validate() const {
    if (a.size() < 2) throw DomainError("SequencePair: need at least a_0, a_1");
    for (const auto& x : a)
      if (x.sign() <= 0) throw DomainError("SequencePair: a_i > 0 required");
    if (nu.empty()) throw DomainError("SequencePair: nu must be nonempty");
    for (const auto& x : nu)
      if (x.sign() < 0) throw DomainError("SequencePair: nu_i >= 0 required");
    long p = a[0].precision();
    if (a_tail_ratio.sign() < 0 || a_tail_ratio >= Real(1L, p))
      throw DivergentTailError("SequencePair: a tail ratio must be in [0,1)");
    if (nu_tail_ratio.sign() < 0 || nu_tail_ratio >= Real(1L, p))
      throw DivergentTailError("SequencePair: nu tail ratio must be in [0,1)");
    Real s = nu_sum();
    Real one(1L, p);
    if ((s - one).abs() > one.mul_2exp(-40))
      throw InvalidLawError("SequencePair: sum(nu) != 1 (got " + s.str(20) + ")");
  }

  long prec() const { return a[0].precision(); }

  // sum_{i>=j} a_i, closed-form tail.
  Real a_tail_sum(long j) const {
    long P = static_cast<long>(a.size()) - 1;
    long p = prec();
    Real s(0L, p);
    for (long i = j; i <= P; ++i) s = s + a[static_cast<size_t>(i)];
    if (a_tail_ratio.sign() > 0) {
      Real q = a_tail_ratio;
      if (j <= P) {
        s = s + a.back() * q / (Real(1L, p) - q);
      } else {
        // first tail term a_P * q^(j-P)
        s = a.back() * q.pow_si(j - P) / (Real(1L, p) - q);
      }
    } else if (j > P) {
      throw TailUndeclaredError("SequencePair: tail sum needs a declared tail");
    }
    return s;
  }

  // sum_{i=0}^{k} a_i.
  Real a_partial_sum(long k) const {
    long P = static_cast<long>(a.size()) - 1;
    long p = prec();
    Real s(0L, p);
    for (long i = 0; i <= std::min(k, P); ++i) s = s + a[static_cast<size_t>(i)];
    if (k > P) {
      if (a_tail_ratio.sign() <= 0)
        throw TailUndeclaredError("SequencePair: partial sum beyond prefix");
      Real q = a_tail_ratio;
      s = s + a.back() * q * (Real(1L, p) - q.pow_si(k - P)) / (Real(1L, p) - q);
    }
    return s;
  }

  Real a_at(long i) const {
    long P = static_cast<long>(a.size()) - 1;
    if (i <= P) return a[static_cast<size_t>(i)];
    if (a_tail_ratio.sign() <= 0)
      throw TailUndeclaredError("SequencePair: a_i beyond prefix");
    return a.back() * a_tail_ratio.pow_si(i - P);
  }

  Real nu_at(long k) const {  // k >= 1
    long T = static_cast<long>(nu.size());
    if (k <= T) return nu[static_cast<size_t>(k - 1)];
    if (nu_tail_ratio.sign() <= 0) return Real(0L, prec());
    return nu.back() * nu_tail_ratio.pow_si(k - T);
  }

  Real nu_sum() const {
    long p = prec();
    Real s(0L, p);
    for (const auto& x : nu) s = s + x;
    if (nu_tail_ratio.sign() > 0)
      s = s + nu.back() * nu_tail_ratio / (Real(1L, p) - nu_tail_ratio);
    return s;
  }

  Real nu_max(int d) const {
    Real m = nu_at(1);
    for (long i = 2; i <= d + 1; ++i) m = m.max(nu_at(i));
    return m;
  }

  // effective index range for exhaustive checks
  long check_limit() const {
    return static_cast<long>(std::max(a.size(), nu.size() + 1)) + 2;
  }
};

struct InequalityFinding {
  std::string name;
  bool ok = true;
  // first violated index pair (j,k) for tfirst, or (k,-1) for the others
  std::optional<std::pair<long, long>> first_violation = std::nullopt;
};

struct ScalingValidation {
  InequalityFinding tfirst, tsecond, tthird;
  bool ok() const { return tfirst.ok && tsecond.ok && tthird.ok; }
};

// The scaling condition:
//  (tfirst)  rho-^{k-j} <= T_j/T_k <= rho+^{k-j},  T_j = sum_{i>=j} a_i
//  (tsecond) Omega1 (a0/Q_k)(numax/Q_{k+1}) <= nu_{k+1}/a_{k+1}, k >= d,
//            Q_k = sum_{i=0}^{k} a_i
//  (tthird)  nu_{k+1}/a_{k+1} <= Omega2 numax / a_1, k >= 0.
// Prefix pairs are checked exhaustively (adjacent pair first within each
// k); the declared geometric tails are covered by their per-step ratio.
inline ScalingValidation validate_scaling(const SequencePair& pair,
                                          const ScalingConstants& consts) {
  pair.validate();
  consts.validate();
  long p = pair.prec();
  ScalingValidation v;
  v.tfirst.name = "tfirst";
  v.tsecond.name = "tsecond";
  v.tthird.name = "tthird";
  long P = static_cast<long>(pair.a.size()) - 1;
  bool a_tail = pair.a_tail_ratio.sign() > 0;
  long lim_first = a_tail ? pair.check_limit() : P;
  long lim_23 = a_tail ? pair.check_limit() : P - 1;

  std::vector<Real> T;
  for (long j = 0; j <= lim_first; ++j) T.push_back(pair.a_tail_sum(j));
  for (long k = 0; k <= lim_first && v.tfirst.ok; ++k) {
    for (long j = k - 1; j >= 0; --j) {
      Real ratio = T[static_cast<size_t>(j)] / T[static_cast<size_t>(k)];
      Real lo = consts.rho_minus.pow_si(k - j);
      Real hi = consts.rho_plus.pow_si(k - j);
      if (ratio < lo || ratio > hi) {
        v.tfirst.ok = false;
        v.tfirst.first_violation = {j, k};
        break;
      }
    }
  }
  if (v.tfirst.ok && a_tail) {
    // beyond the prefix every step ratio is exactly 1/q
    Real step = Real(1L, p) / pair.a_tail_ratio;
    if (step < consts.rho_minus || step > consts.rho_plus) {
      v.tfirst.ok = false;
      v.tfirst.first_violation = {static_cast<long>(pair.a.size()), -1};
    }
  }

  Real numax = pair.nu_max(consts.d);
  for (long k = consts.d; k <= lim_23; ++k) {
    Real lhs = consts.Omega1 * (consts.a0 / pair.a_partial_sum(k)) *
               (numax / pair.a_partial_sum(k + 1));
    Real rhs = pair.nu_at(k + 1) / pair.a_at(k + 1);
    if (rhs < lhs) {
      v.tsecond.ok = false;
      v.tsecond.first_violation = {k, -1};
      break;
    }
  }
  if (v.tsecond.ok && a_tail && pair.nu_tail_ratio < pair.a_tail_ratio) {
    // nu decays strictly faster than a, so nu_{k+1}/a_{k+1} -> 0 while the
    // (tsecond) floor stays positive
    v.tsecond.ok = false;
    v.tsecond.first_violation = {lim_23 + 1, -1};
  }
  Real third_cap = consts.Omega2 * numax / pair.a_at(1);
  for (long k = 0; k <= lim_23 && v.tthird.ok; ++k) {
    Real lhs = pair.nu_at(k + 1) / pair.a_at(k + 1);
    if (lhs > third_cap) {
      v.tthird.ok = false;
      v.tthird.first_violation = {k, -1};
    }
  }
  if (v.tthird.ok && a_tail && pair.nu_tail_ratio > pair.a_tail_ratio) {
    v.tthird.ok = false;
    v.tthird.first_violation = {lim_23 + 1, -1};
  }
  return v;
}

struct DerivedBoundsReport {
  Real K_plus;
  InequalityFinding li, lii, lvii;
  bool ok() const { return li.ok && lii.ok && lvii.ok; }
};

// Lemma 4.2: (li) 1 - 1/rho- <= a_j/T_j <= 1 - 1/rho+,
// (lii) rho-^{k-j}/K+ <= a_j/a_k <= K+ rho+^{k-j},
// (lvii) nu_k <= Omega2 numax K+ rho-^{-(k-1)}.
inline DerivedBoundsReport derived_bounds(const SequencePair& pair,
                                          const ScalingConstants& consts) {
  long p = pair.prec();
  DerivedBoundsReport r{consts.k_plus(), {"li"}, {"lii"}, {"lvii"}};
  Real one(1L, p);
  // without a declared tail the last prefix index has no meaningful tail
  // ratio, so exhaustive checks stop one short of it
  long P = static_cast<long>(pair.a.size()) - 1;
  long lim = pair.a_tail_ratio.sign() > 0 ? pair.check_limit() : P - 1;
  Real lo1 = one - one / consts.rho_minus;
  Real hi1 = one - one / consts.rho_plus;
  for (long j = 0; j <= lim; ++j) {
    Real q = pair.a_at(j) / pair.a_tail_sum(j);
    if (q < lo1 || q > hi1) {
      r.li.ok = false;
      r.li.first_violation = {j, -1};
      break;
    }
  }
  for (long k = 0; k <= lim && r.lii.ok; ++k) {
    for (long j = k; j >= 0; --j) {
      Real q = pair.a_at(j) / pair.a_at(k);
      Real lo = consts.rho_minus.pow_si(k - j) / r.K_plus;
      Real hi = r.K_plus * consts.rho_plus.pow_si(k - j);
      if (q < lo || q > hi) {
        r.lii.ok = false;
        r.lii.first_violation = {j, k};
        break;
      }
    }
  }
  Real numax = pair.nu_max(consts.d);
  for (long k = 1; k <= lim; ++k) {
    Real cap = consts.Omega2 * numax * r.K_plus *
               consts.rho_minus.pow_si(-(k - 1));
    if (pair.nu_at(k) > cap) {
      r.lvii.ok = false;
      r.lvii.first_violation = {k, -1};
      break;
    }
  }
  return r;
}

// First and second moments of nu, tails in closed form.
inline std::pair<Real, Real> moments(const SequencePair& pair) {
  long p = pair.prec();
  Real one(1L, p);
  Real m1(0L, p), m2(0L, p);
  long T = static_cast<long>(pair.nu.size());
  for (long k = 1; k <= T; ++k) {
    Real kr(k, p);
    m1 = m1 + kr * pair.nu_at(k);
    m2 = m2 + kr * kr * pair.nu_at(k);
  }
  if (pair.nu_tail_ratio.sign() > 0) {
    Real q = pair.nu_tail_ratio;
    if (q >= one) throw DivergentTailError("moments: tail ratio >= 1");
    Real last = pair.nu.back();
    Real Tr(T, p);
    Real g1 = q / (one - q);              // sum q^m
    Real g2 = q / ((one - q) * (one - q));  // sum m q^m
    Real g3 = (q * (one + q)) / ((one - q).pow_si(3));  // sum m^2 q^m
    m1 = m1 + last * (Tr * g1 + g2);
    m2 = m2 + last * (Tr * Tr * g1 + Tr * g2.mul_2exp(1) + g3);
  }
  return {m1, m2};
}

// Lemma 4.4: for a positive increasing q(j) and n-1 >= d+1,
//   sum_{j=d+1}^{n-1} j (q(j+1)-q(j))/(q(j)q(j+1))
//     >= sum_{j=d+1}^{n-1} (q(n)-q(j))/(q(n)q(j)).
// When n is omitted the sequence must come with its declared limit
// q_infinity (and n (q_inf - q(n)) -> 0).
inline bool gerlem_check(const std::vector<Real>& q, int d,
                         std::optional<long> n = std::nullopt,
                         std::optional<Real> q_infinity = std::nullopt) {
  if (q.size() < 2) throw DomainError("gerlem_check: need at least two terms");
  long p = q[0].precision();
  for (size_t i = 0; i + 1 < q.size(); ++i)
    if (!(q[i] < q[i + 1]) || q[i].sign() <= 0)
      throw DomainError("gerlem_check: q must be positive and strictly increasing");
  long N;
  Real qn(0L, p);
  if (n) {
    N = *n;
    if (N < d + 2 || N > static_cast<long>(q.size()))
      throw DomainError("gerlem_check: need d+1 <= n-1 and n within the list");
    qn = q[static_cast<size_t>(N - 1)];  // q is 1-indexed in the statement
  } else {
    if (!q_infinity) throw TailUndeclaredError("gerlem_check: q_infinity required for n = infinity");
    N = static_cast<long>(q.size());
    qn = *q_infinity;
    if (!(qn >= q.back()))
      throw DomainError("gerlem_check: q_infinity below the sequence");
  }
  Real lhs(0L, p), rhs(0L, p);
  for (long j = d + 1; j <= N - 1; ++j) {
    const Real& qj = q[static_cast<size_t>(j - 1)];
    if (j < N) {
      const Real& qj1 = q[static_cast<size_t>(j)];
      lhs = lhs + Real(j, p) * (qj1 - qj) / (qj * qj1);
    }
    rhs = rhs + (qn - qj) / (qn * qj);
  }
  // d = 0 makes the two sides exactly equal; allow round-off either way
  Real slack = lhs.abs().max(rhs.abs()).mul_2exp(-p + 32);
  return lhs + slack >= rhs;
}

struct IntegrBound {
  Real rhs;
  Real lhs_partial;
  long k_star;  // first index where the partial sum exceeds rhs
};

// Lemma 4.5: sum_{k=d+1}^inf 1/(rho^k - 1) > ln(1/(2(d+1)(rho-1)))/ln(rho),
// demonstrated by the partial sum reaching the right-hand side.
inline IntegrBound integr_bound(const Real& rho, int d, long max_terms = 100000) {
  long p = std::max(rho.precision(), 128L);
  Real one(1L, p), two(2L, p);
  Real cap = d == 0 ? two : two.pow(one / Real(d, p));
  Real r = rho.with_precision(p);
  if (!(one < r && r < cap))
    throw DomainError("integr_bound: requires 1 < rho < 2^(1/d)");
  Real rhs = (one / (two * Real(d + 1, p) * (r - one))).log() / r.log();
  Real sum(0L, p);
  for (long k = d + 1; k < d + 1 + max_terms; ++k) {
    sum = sum + one / (r.pow_si(k) - one);
    if (sum > rhs) return {rhs, sum, k};
  }
  throw NotFoundError("integr_bound: partial sum failed to exceed the bound");
}

struct MomentLowerBounds {
  Real bigmu_bound;
  Real K_plus;
  Real nu_max;
  std::function<Real(const Real&)> smallmu;  // r -> r (1 - Omega2 numax K+ r)
  Real smallmu_peak;                         // max over r
  bool m1_dominates;                         // m1 >= max(bounds) - tol
};

// Lemmas 4.6 and 4.7 as computable lower bounds on sum k nu_k.
inline MomentLowerBounds moment_lower_bounds(const SequencePair& pair,
                                             const ScalingConstants& consts) {
  long p = pair.prec();
  Real one(1L, p), two(2L, p);
  Real cap = consts.d == 0 ? two : two.pow(one / Real(consts.d, p));
  if (!(consts.rho_plus < cap))
    throw DomainError("moment_lower_bounds: requires rho+ < 2^(1/d)");
  MomentLowerBounds out{Real(0L, p), consts.k_plus(), pair.nu_max(consts.d),
                        nullptr, Real(0L, p), false};
  out.bigmu_bound = out.nu_max.mul_2exp(-1) * consts.Omega1 / out.K_plus *
                    (one / (two * Real(consts.d + 1, p) *
                            (consts.rho_plus - one)))
                        .log();
  Real coef = consts.Omega2 * out.nu_max * out.K_plus;
  out.smallmu = [coef, p](const Real& r) {
    return r * (Real(1L, p) - coef * r);
  };
  // r (1 - coef r) peaks at r* = 1/(2 coef) with value 1/(4 coef)
  out.smallmu_peak = one / coef.mul_2exp(2);
  auto [m1, m2] = moments(pair);
  (void)m2;
  Real best = out.bigmu_bound.max(out.smallmu_peak);
  out.m1_dominates = m1 >= best - best.abs().mul_2exp(-30);
  if (!out.m1_dominates)
    throw Error("moment_lower_bounds: first moment below the lemma bounds");
  return out;
}

// Sanity mode for measure preservation: a_{k+1} nu_{j+1} / (a_{j+1} nu_{k+1})
// is identically 1 when the underlying transformation preserves the measure
// behind nu. Returns the largest deviation |ratio - 1| over the prefix.
inline Real measure_preservation_defect(const SequencePair& pair) {
  long p = pair.prec();
  long lim = std::min(static_cast<long>(pair.a.size()) - 2,
                      static_cast<long>(pair.nu.size()) - 1);
  Real worst(0L, p);
  for (long j = 0; j <= lim; ++j)
    for (long k = j + 1; k <= lim; ++k) {
      Real nju = pair.nu_at(j + 1), nku = pair.nu_at(k + 1);
      if (nju.is_zero() || nku.is_zero()) continue;
      Real ratio = (pair.a_at(k + 1) * nju) / (pair.a_at(j + 1) * nku);
      worst = worst.max((ratio - Real(1L, p)).abs());
    }
  return worst;
}

// rho = 1 + exp(-64 (Omega2/Omega1) E^2 C) / (2(d+1)), the choice made in
// the expected-value proposition; always in (1,2).
inline Real choose_rho(const Real& E, const Real& Omega1, const Real& Omega2,
                       const Real& C, int d) {
  long p = E.precision();
  if (E.sign() <= 0 || Omega1.sign() <= 0 || Omega2.sign() <= 0)
    throw DomainError("choose_rho: positive inputs required");
  if (C < Real(1L, p)) throw DomainError("choose_rho: C >= 1 required");
  Real expo = -(Real(64L, p) * (Omega2 / Omega1) * E * E * C);
  // widen the working precision so 1 + exp(expo) stays strictly above 1
  long need = static_cast<long>(-expo.to_double() * 1.5) + 64;
  long pw = std::min(std::max(p, need), 1L << 22);
  return Real(1L, pw) + expo.with_precision(pw).exp() / Real(2 * (d + 1), pw);
}

}  // namespace fibwalk

#endif  // FIBWALK_SCALING_HPP
