#include <catch2/catch_amalgamated.hpp>

#include <optional>

#include "fibwalk/fibwalk.hpp"
#include "test_util.hpp"

using namespace fibwalk;
using fwtest::close_rel;

namespace {

// Affine test double: cross-ratios are preserved exactly and |Df| is
// constant, so B = 1 and the Koebe ratio is 1 bit-for-bit.
struct LinearMap {
  Real a, b;
  Real eval(const Real& x) const { return a * x + b; }
  Real deriv(const Real&) const { return a; }
  std::optional<Real> fold_point() const { return std::nullopt; }
};

FibMap solved(long ell, int K = 8) {
  auto res = solve_parameter(Real(ell, 256), K);
  return FibMap(res.lambda_star, Real(ell, 256));
}

struct MonotoneConfig {
  IntervalR t;
  IntervalR j;
  long n;
};

// Random configuration on a verified monotone branch of f^n.
std::optional<MonotoneConfig> random_config(const FibMap& f, SplitMix64& rng,
                                            long max_n) {
  long p = f.precision();
  Real x = fwtest::uniform(rng, Real("0.02", p), Real("0.98", p), p);
  long n = 1 + static_cast<long>(rng.next() % static_cast<uint64_t>(max_n));
  IntervalR br = monotone_branch(f, n, x);
  Real len = br.length();
  if (len < pow2(-60, p)) return std::nullopt;
  Real tl = br.lo + len * Real("0.05", p);
  Real th = br.hi - len * Real("0.05", p);
  Real tlen = th - tl;
  Real jl = tl + tlen * Real(0.15 + 0.3 * rng.uniform01(), p);
  Real jh = th - tlen * Real(0.15 + 0.3 * rng.uniform01(), p);
  if (!(jl < jh)) return std::nullopt;
  return MonotoneConfig{IntervalR(tl, th), IntervalR(jl, jh), n};
}

}  // namespace

TEST_CASE("cross_ratio formula") {
  long p = 256;
  CrossConfig c1{IntervalR(Real(0L, p), Real(4L, p)),
                 IntervalR(Real(1L, p), Real(3L, p))};
  CHECK(cross_ratio(c1) == Real(8L, p));
  CrossConfig c2{IntervalR(Real(0L, p), Real(3L, p)),
                 IntervalR(Real(1L, p), Real(2L, p))};
  CHECK(cross_ratio(c2) == Real(3L, p));
  CHECK_THROWS_AS(CrossConfig(IntervalR(Real(0L, p), Real(1L, p)),
                              IntervalR(Real(0L, p), Real(1L, p))),
                  DegenerateConfigError);
}

TEST_CASE("cross_ratio_distortion basics") {
  long p = 256;
  auto f = solved(2);
  CrossConfig cfg{IntervalR(Real("0.60", p), Real("0.70", p)),
                  IntervalR(Real("0.62", p), Real("0.66", p))};
  SECTION("identity map") {
    auto rec = cross_ratio_distortion(f, 0, cfg);
    CHECK(rec.B_value == Real(1L, p));
    CHECK(rec.sum_lengths.is_zero());
  }
  SECTION("scaled linear map preserves cross-ratios bit-exactly") {
    LinearMap scale{Real("0.5", p), Real(0L, p)};
    auto rec = cross_ratio_distortion(scale, 5, cfg);
    CHECK(rec.B_value == Real(1L, p));
  }
  SECTION("general affine maps preserve cross-ratios to round-off") {
    LinearMap lin{Real("0.5", p), Real("0.125", p)};
    auto rec = cross_ratio_distortion(lin, 5, cfg);
    CHECK((rec.B_value - Real(1L, p)).abs() <= pow2(-p + 40, p));
  }
  SECTION("straddling the critical point is rejected") {
    CrossConfig wide{IntervalR(Real("0.40", p), Real("0.60", p)),
                     IntervalR(Real("0.45", p), Real("0.55", p))};
    CHECK_THROWS_AS(cross_ratio_distortion(f, 1, wide), NonMonotoneError);
  }
}

TEST_CASE("B >= 1 on verified-monotone configurations") {
  long p = 256;
  for (long ell : {2L, 8L, 16L}) {
    auto f = solved(ell);
    SplitMix64 rng(static_cast<uint64_t>(100 + ell));
    int done = 0;
    Real floor1 = Real(1L, p) - Real("1e-12", p);
    while (done < 100) {
      auto cfg = random_config(f, rng, 30);
      if (!cfg) continue;
      auto rec = cross_ratio_distortion(f, cfg->n, CrossConfig{cfg->t, cfg->j});
      CHECK(rec.B_value >= floor1);
      ++done;
    }
  }
}

TEST_CASE("B multiplicativity along the orbit") {
  long p = 256;
  auto f = solved(2);
  SplitMix64 rng(77);
  int done = 0;
  while (done < 20) {
    auto cfg = random_config(f, rng, 20);
    if (!cfg || cfg->n < 2) continue;
    auto whole = cross_ratio_distortion(f, cfg->n, CrossConfig{cfg->t, cfg->j});
    Real prod(1L, p);
    Real tl = cfg->t.lo, th = cfg->t.hi, jl = cfg->j.lo, jh = cfg->j.hi;
    for (long i = 0; i < cfg->n; ++i) {
      auto one = cross_ratio_distortion(
          f, 1, CrossConfig{IntervalR(tl, th), IntervalR(jl, jh)});
      prod = prod * one.B_value;
      tl = f.eval(tl);
      th = f.eval(th);
      jl = f.eval(jl);
      jh = f.eval(jh);
      if (th < tl) {
        std::swap(tl, th);
        std::swap(jl, jh);
      }
    }
    CHECK(close_rel(whole.B_value, prod, pow2(-p / 4, p)));
    ++done;
  }
}

TEST_CASE("doubc_check") {
  long p = 256;
  auto f = solved(2);
  SECTION("identity brackets 1") {
    auto r = doubc_check(f, 0, IntervalR(Real("0.60", p), Real("0.70", p)),
                         IntervalR(Real("0.61", p), Real("0.63", p)),
                         IntervalR(Real("0.65", p), Real("0.68", p)));
    CHECK(r.lhs == Real(1L, p));
    CHECK(r.rhs_lower <= r.lhs);
    CHECK(r.lhs <= r.rhs_upper);
    CHECK(r.pass);
  }
  SECTION("overlapping intervals are rejected") {
    CHECK_THROWS_AS(
        doubc_check(f, 0, IntervalR(Real("0.60", p), Real("0.70", p)),
                    IntervalR(Real("0.61", p), Real("0.65", p)),
                    IntervalR(Real("0.64", p), Real("0.68", p))),
        OrderingError);
  }
  SECTION("random monotone configurations pass") {
    SplitMix64 rng(31);
    int done = 0;
    while (done < 100) {
      auto cfg = random_config(f, rng, 25);
      if (!cfg) continue;
      Real len = cfg->j.length();
      IntervalR j1(cfg->j.lo, cfg->j.lo + len * Real("0.3", p));
      IntervalR j2(cfg->j.hi - len * Real("0.3", p), cfg->j.hi);
      auto r = doubc_check(f, cfg->n, cfg->t, j1, j2);
      CHECK(r.pass);
      ++done;
    }
  }
}

TEST_CASE("koebe_check") {
  long p = 256;
  auto f = solved(2);
  SECTION("tau = 1 bound is 4") {
    CrossConfig cfg{IntervalR(Real("0.58", p), Real("0.73", p)),
                    IntervalR(Real("0.645", p), Real("0.665", p))};
    auto r = koebe_check(f, 0, cfg.j, cfg.t, Real(1L, p), 64);
    CHECK(r.bound == Real(4L, p));
    CHECK(r.ratio == Real(1L, p));  // identity
    CHECK(r.pass);
  }
  SECTION("affine stub has ratio exactly 1 for any configuration") {
    LinearMap lin{Real("0.25", p), Real("0.3", p)};
    auto r1 = koebe_check(lin, 6, IntervalR(Real("0.4", p), Real("0.5", p)),
                          IntervalR(Real("0.1", p), Real("0.9", p)),
                          Real("0.5", p), 128);
    auto r2 = koebe_check(lin, 6, IntervalR(Real("0.42", p), Real("0.44", p)),
                          IntervalR(Real("0.2", p), Real("0.7", p)),
                          Real("0.5", p), 128);
    CHECK(r1.ratio == Real(1L, p));
    CHECK(r2.ratio == r1.ratio);  // affine reparametrization, bit-level
    CHECK(r1.pass);
  }
  SECTION("missing collar raises the precondition error") {
    CHECK_THROWS_AS(
        koebe_check(f, 1, IntervalR(Real("0.60", p), Real("0.70", p)),
                    IntervalR(Real("0.60", p), Real("0.71", p)), Real(1L, p),
                    16),
        DomainError);
  }
}

TEST_CASE("monotone_branch") {
  long p = 256;
  auto f = solved(2);
  const Real c = f.c();
  SECTION("one fold at c") {
    auto left = monotone_branch(f, 1, Real("0.2", p));
    CHECK(left.lo.is_zero());
    CHECK(left.hi == c);
    auto right = monotone_branch(f, 1, Real("0.8", p));
    CHECK(right.lo == c);
    CHECK(right.hi == Real(1L, p));
  }
  SECTION("precritical point is rejected") {
    CHECK_THROWS_AS(monotone_branch(f, 2, c), PrecriticalError);
  }
  SECTION("endpoints are precritical or domain edges; interior is clean") {
    SplitMix64 rng(41);
    for (int trial = 0; trial < 10; ++trial) {
      Real x = fwtest::uniform(rng, Real("0.05", p), Real("0.95", p), p);
      long n = 3 + static_cast<long>(rng.next() % 20);
      auto br = monotone_branch(f, n, x);
      auto endpoint_ok = [&](const Real& e) {
        if (e.is_zero() || e == Real(1L, p) || e == c) return true;
        Real y = e;
        for (long i = 0; i < n; ++i) {
          if ((y - c).abs() <= pow2(-p / 2, p)) return true;
          y = f.eval(y);
        }
        return false;
      };
      CHECK(endpoint_ok(br.lo));
      CHECK(endpoint_ok(br.hi));
      // 64 interior samples: |Df^n| stays away from zero on the branch
      for (int s = 1; s <= 64; ++s) {
        Real xi = br.lo + br.length() * Real(s, p) / Real(65L, p);
        Real dp(1L, p);
        Real y = xi;
        for (long i = 0; i < n; ++i) {
          dp = dp * f.deriv(y).abs();
          y = f.eval(y);
        }
        CHECK(dp.sign() > 0);
      }
    }
  }
}

TEST_CASE("orbit_length_sum") {
  long p = 256;
  auto f = solved(2);
  IntervalR t(Real("0.6", p), Real("0.62", p));
  SECTION("n = 1 sums the initial length") {
    auto [sum, mx] = orbit_length_sum(f, 1, t);
    CHECK(sum == t.length());
    CHECK(mx >= sum.mul_2exp(-2));
  }
  SECTION("degenerate interval has zero sum") {
    auto [sum, mx] = orbit_length_sum(f, 10, Real("0.6", p), Real("0.6", p));
    CHECK(sum.is_zero());
    CHECK(mx.is_zero());
  }
  SECTION("max tracks the largest image") {
    auto [sum, mx] = orbit_length_sum(f, 6, t);
    CHECK(mx <= sum);
    CHECK(mx.sign() > 0);
  }
}
