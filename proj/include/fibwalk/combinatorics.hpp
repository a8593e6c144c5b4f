#ifndef FIBWALK_COMBINATORICS_HPP
#define FIBWALK_COMBINATORICS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fibwalk/fib_map.hpp"
#include "fibwalk/real.hpp"

namespace fibwalk {

// Cutting times S_0=1, S_1=2, S_{k+1} = S_k + S_{k-1}; returns S_0..S_K.
inline std::vector<long> fibonacci_times(int K) {
  if (K < 1) throw DomainError("fibonacci_times: K >= 1 required");
  std::vector<long> S{1, 2};
  while (static_cast<int>(S.size()) <= K)
    S.push_back(S[S.size() - 1] + S[S.size() - 2]);
  S.resize(static_cast<size_t>(K) + 1);
  return S;
}

struct ClosestReturnRecord {
  long time;
  Real point;
  Real distance;
  int side;  // sign of point - c
};

// All times 1 <= n <= N whose distance to c strictly beats every earlier
// positive time. A distance comparison that is not decidable at the working
// precision raises PrecisionExhausted; an orbit point within 2^(-p+8) of c
// is likewise treated as a precision failure (the Fibonacci critical orbit
// never hits c).
inline std::vector<ClosestReturnRecord> closest_returns(const FibMap& f,
                                                        long N) {
  if (N < 1) throw DomainError("closest_returns: N >= 1 required");
  std::vector<ClosestReturnRecord> out;
  const Real& c = f.c();
  Real near_c = c.mul_2exp(-f.precision() + 9);  // 2^(-p+8) * |c|*2
  Real x = c;
  for (long n = 1; n <= N; ++n) {
    x = f.eval(x);
    Real diff = x - c;
    int side = diff.sign();
    Real dist = diff.abs();
    if (side == 0 || dist < near_c)
      throw PrecisionExhausted(
          "closest_returns: orbit point indistinguishable from c at time " +
          std::to_string(n));
    if (out.empty()) {
      out.push_back({n, x, dist, side});
      continue;
    }
    const Real& best = out.back().distance;
    if (dist.decide_cmp(best) < 0) out.push_back({n, x, dist, side});
  }
  return out;
}

struct SidePatternVerdict {
  bool ok = true;
  // First n with side(d_{n+2}) != -side(d_n), if any.
  std::optional<int> first_violation;
};

// Confirms the period-4 side law side(d_{n+2}) = -side(d_n) of the
// Fibonacci closest returns. Needs at least 4 records.
inline SidePatternVerdict side_pattern(
    const std::vector<ClosestReturnRecord>& records) {
  if (records.size() < 4)
    throw InsufficientDepthError("side_pattern: needs depth >= 4");
  SidePatternVerdict v;
  for (size_t n = 0; n + 2 < records.size(); ++n) {
    if (records[n + 2].side != -records[n].side) {
      v.ok = false;
      v.first_violation = static_cast<int>(n);
      return v;
    }
  }
  return v;
}

struct CombinatoricsVerdict {
  bool ok = false;
  int depth_reached = -1;
  // (expected S_k, observed time at that position; -1 when missing)
  std::optional<std::pair<long, long>> first_violation;
};

// ok iff the closest returns up to N = S_K occur exactly at S_0..S_K and
// the period-4 side law holds on every available pair.
inline CombinatoricsVerdict is_fibonacci_to_depth(const FibMap& f, int K) {
  if (K < 2) throw DomainError("is_fibonacci_to_depth: K >= 2 required");
  auto S = fibonacci_times(K);
  auto rec = closest_returns(f, S[static_cast<size_t>(K)]);
  CombinatoricsVerdict v;
  for (int k = 0; k <= K; ++k) {
    if (k >= static_cast<int>(rec.size())) {
      v.first_violation = {S[static_cast<size_t>(k)], -1};
      return v;
    }
    if (rec[static_cast<size_t>(k)].time != S[static_cast<size_t>(k)]) {
      v.first_violation = {S[static_cast<size_t>(k)],
                           rec[static_cast<size_t>(k)].time};
      return v;
    }
    v.depth_reached = k;
  }
  // times are strictly increasing and capped at S_K, so an extra return
  // would already have displaced one of the K+1 positions above
  for (size_t n = 0; n + 2 < rec.size(); ++n) {
    if (rec[n + 2].side != -rec[n].side) {
      v.first_violation = {S[n + 2], rec[n + 2].time};
      v.depth_reached = -1;
      return v;
    }
  }
  v.ok = true;
  v.depth_reached = K;
  return v;
}

// Escalating wrapper: rebuilds the map at doubled precision whenever the
// orbit runs out of decidable bits.
inline CombinatoricsVerdict is_fibonacci_to_depth(
    const Real& lambda, const Real& ell, int K,
    const PrecisionPolicy& policy = {}) {
  return with_escalation(policy, [&](long p) {
    FibMap f(lambda.with_precision(p), ell.with_precision(p));
    return is_fibonacci_to_depth(f, K);
  });
}

// --- Kneading machinery -----------------------------------------------

// Symbolic target for the Fibonacci combinatorics: the itinerary of c_1
// to length S_K, reconstructed from the closest-return structure. The
// segment (S_{k-1}, S_k] copies e_1..e_{L-1} (L = S_k - S_{k-1}) and ends
// with the side of d_k; sides follow s_0=+1, s_1=-1, s_{k+2}=-s_k.
struct KneadingTarget {
  int K;
  std::vector<long> S;
  std::vector<int8_t> sym;  // sym[n-1] = expected sign of c_n - c
};

inline KneadingTarget fibonacci_kneading_target(int K) {
  KneadingTarget t;
  t.K = K;
  t.S = fibonacci_times(K);
  std::vector<int8_t> sides{1, -1};
  for (int k = 2; k <= K; ++k) sides.push_back(-sides[static_cast<size_t>(k - 2)]);
  std::vector<int8_t> e(static_cast<size_t>(t.S[static_cast<size_t>(K)]) + 1, 0);
  e[1] = sides[0];
  for (int k = 1; k <= K; ++k) {
    long lo = t.S[static_cast<size_t>(k - 1)];
    long L = t.S[static_cast<size_t>(k)] - lo;
    for (long j = 1; j < L; ++j) e[static_cast<size_t>(lo + j)] = e[static_cast<size_t>(j)];
    e[static_cast<size_t>(t.S[static_cast<size_t>(k)])] = sides[static_cast<size_t>(k)];
  }
  t.sym.assign(e.begin() + 1, e.end());
  return t;
}

// Twisted-lexicographic comparison of the candidate's kneading word
// against the target: -1 below, +1 above, 0 when the whole prefix
// matches. The orientation flips at every R symbol.
inline int kneading_compare(const FibMap& f, const KneadingTarget& target) {
  const Real& c = f.c();
  Real near_c = c.mul_2exp(-f.precision() + 9);
  Real x = c;
  int orient = 1;
  for (size_t n = 0; n < target.sym.size(); ++n) {
    x = f.eval(x);
    Real diff = x - c;
    int s = diff.sign();
    if (s == 0 || diff.abs() < near_c)
      throw PrecisionExhausted("kneading_compare: undecidable symbol at " +
                               std::to_string(n + 1));
    if (s != target.sym[n]) return orient * (s - target.sym[n] > 0 ? 1 : -1);
    if (s > 0) orient = -orient;
  }
  return 0;
}

struct SolveOptions {
  int target_extra = 4;          // bisect against depth K + target_extra
  Real stop_width = Real(1e-18, 64);
  long max_iterations = 512;
  PrecisionPolicy policy{};
};

struct SolveResult {
  Real lambda_star;
  CombinatoricsVerdict verdict;
  Real bracket_width;
  long precision_bits;
  int K;
  Real ell;
};

// Bisection for the parameter lambda*(ell, K) with Fibonacci closest
// returns to depth K. The bracket test is the kneading comparison above;
// ties (full prefix match) move toward larger lambda. Precision escalates
// as the bracket shrinks.
inline SolveResult solve_parameter(const Real& ell, int K,
                                   const SolveOptions& opts = {}) {
  if (K < 2) throw DomainError("solve_parameter: K >= 2 required");
  if (ell < Real(2L, 64)) throw DomainError("solve_parameter: ell >= 2 required");
  KneadingTarget target = fibonacci_kneading_target(K + opts.target_extra);
  long prec = opts.policy.initial_bits;
  Real lo("0.75", prec);
  Real hi(1L, prec);

  auto cmp_at = [&](const Real& lam) {
    return with_escalation(opts.policy, [&](long p) {
      // the policy floor has already escalated past `prec` retries
      long use = std::max(p, prec);
      FibMap f(lam.with_precision(use), ell.with_precision(use));
      return kneading_compare(f, target);
    });
  };

  if (cmp_at(lo) >= 0 || cmp_at(hi) < 0)
    throw NotFoundError("solve_parameter: initial bracket does not contain the target");

  // Iterate until the retained endpoint has the full target prefix (the
  // bracket is then inside the depth-(K+extra) window) and the bracket is
  // below the stop width. Ties move toward larger lambda.
  bool lo_in_window = false;
  for (long it = 0; it < opts.max_iterations; ++it) {
    Real width = hi - lo;
    if (lo_in_window && width <= opts.stop_width.with_precision(prec)) break;
    if (width < pow2(-(prec - 64), prec)) {
      if (prec >= opts.policy.cap_bits)
        throw PrecisionCapExceeded("solve_parameter: bracket below precision cap");
      prec = std::min(prec * 2, opts.policy.cap_bits);
      lo = lo.with_precision(prec);
      hi = hi.with_precision(prec);
    }
    Real mid = (lo + hi).mul_2exp(-1);
    int cres = cmp_at(mid);
    if (cres <= 0) {
      lo = mid;
      lo_in_window = cres == 0;
    } else {
      hi = mid;
    }
  }
  if (!lo_in_window)
    throw NotFoundError("solve_parameter: bracket collapsed without reaching depth " +
                        std::to_string(K + opts.target_extra));

  SolveResult res{lo, {}, hi - lo, prec, K, ell.with_precision(prec)};
  res.verdict = is_fibonacci_to_depth(lo, ell, K, opts.policy);
  if (!res.verdict.ok)
    throw NotFoundError("solve_parameter: bisection limit fails verification");
  return res;
}

}  // namespace fibwalk

#endif  // FIBWALK_COMBINATORICS_HPP
