#include <catch2/catch_amalgamated.hpp>

#include "fibwalk/fibwalk.hpp"
#include "test_util.hpp"

using namespace fibwalk;
using fwtest::close_abs;
using fwtest::close_rel;

namespace {

FibMap make_map(const char* lam, const char* ell, long prec = 256) {
  return FibMap(Real(lam, prec), Real(ell, prec));
}

// Centered finite difference, the independent oracle for deriv.
Real fd_deriv(const FibMap& f, const Real& x, long hbits) {
  Real h = pow2(-hbits, f.precision());
  return (f.eval(x + h) - f.eval(x - h)) / h.mul_2exp(1);
}

// Finite-difference Schwarzian from five map values.
Real fd_schwarzian(const FibMap& f, const Real& x, long hbits) {
  long p = f.precision();
  Real h = pow2(-hbits, p);
  Real fm2 = f.eval(x - h.mul_2exp(1)), fm1 = f.eval(x - h);
  Real f0 = f.eval(x), fp1 = f.eval(x + h), fp2 = f.eval(x + h.mul_2exp(1));
  Real d1 = (fp1 - fm1) / h.mul_2exp(1);
  Real d2 = (fp1 - f0.mul_2exp(1) + fm1) / (h * h);
  Real d3 = (fp2 - fp1.mul_2exp(1) + fm1.mul_2exp(1) - fm2) / (h * h * h).mul_2exp(1);
  Real r = d2 / d1;
  return d3 / d1 - (r * r) * Real("1.5", p);
}

}  // namespace

TEST_CASE("Real precision context") {
  Real a("0.1", 128), b("0.2", 512);
  CHECK((a + b).precision() == 512);
  CHECK((a * b).precision() == 512);
  CHECK(Real(1L, 16).precision() == 64);  // floor at 64 bits

  SECTION("undecidable comparisons raise the precision signal") {
    Real x(1L, 128);
    Real y = x + pow2(-200, 256);  // differs below 2^-120 of the magnitude
    CHECK_THROWS_AS(x.decide_cmp(y), PrecisionExhausted);
    CHECK(x.decide_cmp(x) == 0);  // bit-equal values are decidable
    Real z = x + pow2(-50, 128);
    CHECK(x.decide_cmp(z) < 0);
  }
}

TEST_CASE("eval of the canonical family") {
  auto f = make_map("0.9", "2");
  long p = f.precision();
  CHECK(close_abs(f.eval(Real("0.5", p)), Real("0.9", p), pow2(-240, p)));
  CHECK(f.eval(Real(0L, p)).is_zero());
  CHECK(close_abs(f.eval(Real("0.25", p)), Real("0.675", p), pow2(-240, p)));
  CHECK(f.eval(Real(1L, p)).is_zero());
  CHECK_THROWS_AS(f.eval(Real("1.001", p)), DomainError);
  CHECK_THROWS_AS(f.eval(Real("-0.2", p)), DomainError);

  SECTION("range stays inside [0, lambda]") {
    SplitMix64 rng(7);
    for (int i = 0; i < 200; ++i) {
      Real x = fwtest::uniform(rng, Real(0L, p), Real(1L, p), p);
      Real y = f.eval(x);
      CHECK(y.sign() >= 0);
      CHECK(y <= f.lambda());
    }
  }
}

TEST_CASE("deriv closed form and finite differences") {
  auto f = make_map("0.9", "2");
  long p = f.precision();
  CHECK(f.deriv(Real("0.5", p)).is_zero());
  CHECK(close_abs(f.deriv(Real("0.25", p)), Real("1.8", p), pow2(-240, p)));

  // matches the centered finite-difference oracle near c at relative 1e-8
  auto g = make_map("0.93", "3.5");
  Real x("0.5003", p);
  CHECK(close_rel(g.deriv(x), fd_deriv(g, x, 128), Real("1e-8", p)));

  // 10^3 random points away from c, step 2^(-p/2), relative 2^(-p/4)
  SplitMix64 rng(11);
  Real band("0.01", p);
  int checked = 0;
  for (int i = 0; i < 1000; ++i) {
    Real x2 = fwtest::uniform(rng, Real("0.02", p), Real("0.98", p), p);
    if ((x2 - f.c()).abs() < band) continue;
    ++checked;
    CHECK(close_rel(f.deriv(x2), fd_deriv(f, x2, p / 2), pow2(-p / 4, p)));
  }
  CHECK(checked > 900);
}

TEST_CASE("schwarzian sign and oracles") {
  long p = 256;
  SECTION("ell = 2 symbolic oracle: Sf = -6/(1-2x)^2") {
    for (const char* lam : {"0.9", "0.97", "1.0"}) {
      auto f = make_map(lam, "2");
      CHECK(close_rel(f.schwarzian(Real("0.25", p)), Real(-24L, p), pow2(-200, p)));
      CHECK(close_rel(f.schwarzian(Real("0.75", p)), Real(-24L, p), pow2(-200, p)));
      Real x("0.3", p);
      Real oracle = Real(-6L, p) / ((1 - x.mul_2exp(1)) * (1 - x.mul_2exp(1)));
      CHECK(close_rel(f.schwarzian(x), oracle, pow2(-200, p)));
    }
  }
  SECTION("finite-difference cross-check") {
    auto f = make_map("0.95", "2");
    Real x("0.31", p);
    CHECK(close_rel(f.schwarzian(x), fd_schwarzian(f, x, 40), Real("1e-6", p)));
  }
  SECTION("negative for every sampled x and ell in {2,4,8,16,32}") {
    for (long e : {2L, 4L, 8L, 16L, 32L}) {
      auto f = FibMap(Real("0.9", p), Real(e, p));
      SplitMix64 rng(static_cast<uint64_t>(e));
      for (int i = 0; i < 1000; ++i) {
        Real x = fwtest::uniform(rng, Real("0.001", p), Real("0.999", p), p);
        if ((x - f.c()).is_zero()) continue;
        CHECK(f.schwarzian(x).sign() < 0);
      }
    }
  }
  CHECK_THROWS_AS(make_map("0.9", "2").schwarzian(Real("0.5", p)),
                  SingularPointError);
}

TEST_CASE("iterate identities") {
  long p = 256;
  auto f = make_map("0.9", "2");
  Real x("0.37", p);
  CHECK(f.iterate(x, 0) == x);

  // Chebyshev case lambda = 1: c -> 1 -> 0 -> 0 (exact dyadics)
  auto cheb = make_map("1.0", "2");
  CHECK(cheb.iterate(cheb.c(), 2).is_zero());
  CHECK(cheb.iterate(cheb.c(), 3).is_zero());

  SECTION("n = a+b equals two-stage iteration bit-identically") {
    SplitMix64 rng(3);
    for (int i = 0; i < 50; ++i) {
      Real y = fwtest::uniform(rng, Real(0L, p), Real(1L, p), p);
      Real whole = f.iterate(y, 18);
      Real staged = f.iterate(f.iterate(y, 7), 11);
      CHECK(whole == staged);
    }
  }
  SECTION("orbit records every point") {
    auto orb = f.orbit(x, 5);
    REQUIRE(orb.size() == 6);
    CHECK(orb[0] == x);
    CHECK(orb[5] == f.iterate(x, 5));
  }
}

TEST_CASE("hat is the exact symmetry") {
  long p = 256;
  auto f = make_map("0.88", "7");
  CHECK(f.hat(Real("0.3", p)) == Real("0.7", p));
  CHECK(f.hat(f.c()) == f.c());
  SplitMix64 rng(5);
  for (int i = 0; i < 100; ++i) {
    Real x = fwtest::uniform(rng, Real(0L, p), Real(1L, p), p);
    CHECK(f.eval(x) == f.eval(f.hat(x)));  // bit-identical
  }
}

TEST_CASE("pullback_branch") {
  long p = 256;
  auto f = make_map("0.9", "2");
  Real target("0.675", p);
  Real left = f.pullback_branch(target, IntervalR(Real(0L, p), Real("0.5", p)));
  CHECK(close_abs(left, Real("0.25", p), pow2(-200, p)));
  Real right = f.pullback_branch(target, IntervalR(Real("0.5", p), Real(1L, p)));
  CHECK(close_abs(right, Real("0.75", p), pow2(-200, p)));

  // boundary case: target = lambda reachable only when c is an endpoint
  CHECK(f.pullback_branch(f.lambda(), IntervalR(Real(0L, p), Real("0.5", p))) ==
        Real("0.5", p));
  CHECK_THROWS_AS(
      f.pullback_branch(f.lambda(), IntervalR(Real(0L, p), Real("0.49", p))),
      NoRootError);
  CHECK_THROWS_AS(
      f.pullback_branch(target, IntervalR(Real("0.2", p), Real("0.8", p))),
      NonMonotoneError);

  SECTION("composed with eval returns the target within tolerance") {
    SplitMix64 rng(13);
    for (int i = 0; i < 100; ++i) {
      bool right_side = (rng.next() & 1) != 0;
      IntervalR branch = right_side
                             ? IntervalR(Real("0.5", p), Real(1L, p))
                             : IntervalR(Real(0L, p), Real("0.5", p));
      Real t = fwtest::uniform(rng, Real(0L, p), f.lambda(), p);
      Real y = f.pullback_branch(t, branch);
      CHECK(branch.contains(y));
      Real scale = t.abs().max(Real(1L, p));
      CHECK((f.eval(y) - t).abs() <= scale.mul_2exp(-p + 16));
    }
  }
}
