#include <catch2/catch_amalgamated.hpp>

#include "fibwalk/fibwalk.hpp"
#include "test_util.hpp"

using namespace fibwalk;
using fwtest::close_abs;

namespace {

// lambda*(ell=2) pinned independently (high-precision prototype, right
// edge of the depth-14 combinatorial window).
const char* kLambdaStar2 = "0.9781017497858120257071089";

}  // namespace

TEST_CASE("fibonacci_times") {
  CHECK(fibonacci_times(5) == std::vector<long>{1, 2, 3, 5, 8, 13});
  CHECK(fibonacci_times(1) == std::vector<long>{1, 2});
  CHECK(fibonacci_times(15).back() == 1597);
  CHECK_THROWS_AS(fibonacci_times(0), DomainError);
}

TEST_CASE("closest returns of the Chebyshev case") {
  FibMap f(Real(1L, 256), Real(2L, 256));
  auto rec = closest_returns(f, 10);
  REQUIRE(rec.size() == 1);  // orbit c -> 1 -> 0 -> 0: no strict improvement
  CHECK(rec[0].time == 1);
  CHECK(rec[0].point == Real(1L, 256));
  CHECK(rec[0].side == 1);
}

TEST_CASE("first closest return is always time 1 and distances decrease") {
  SplitMix64 rng(21);
  for (int i = 0; i < 10; ++i) {
    Real lam = fwtest::uniform(rng, Real("0.8", 256), Real("0.999", 256), 256);
    FibMap f(lam, Real(2L, 256));
    auto rec = closest_returns(f, 200);
    REQUIRE(!rec.empty());
    CHECK(rec[0].time == 1);
    for (size_t k = 1; k < rec.size(); ++k) {
      CHECK(rec[k].distance < rec[k - 1].distance);
      CHECK(rec[k].time > rec[k - 1].time);
    }
  }
}

TEST_CASE("side_pattern") {
  auto fake = [](std::vector<int> sides) {
    std::vector<ClosestReturnRecord> rec;
    long t = 1;
    Real dist("0.4", 64);
    for (int s : sides) {
      rec.push_back({t, Real("0.5", 64), dist, s});
      t += 2;
      dist = dist * Real("0.5", 64);
    }
    return rec;
  };
  CHECK(side_pattern(fake({1, 1, -1, -1, 1, 1, -1, -1})).ok);
  CHECK(side_pattern(fake({1, -1, -1, 1, 1, -1, -1, 1})).ok);
  auto bad = side_pattern(fake({1, -1, 1, -1}));
  CHECK_FALSE(bad.ok);
  CHECK(bad.first_violation == 0);
  CHECK_THROWS_AS(side_pattern(fake({1, -1, 1})), InsufficientDepthError);
}

TEST_CASE("is_fibonacci_to_depth rejects the Chebyshev case") {
  FibMap f(Real(1L, 256), Real(2L, 256));
  auto v = is_fibonacci_to_depth(f, 2);
  CHECK_FALSE(v.ok);
  REQUIRE(v.first_violation.has_value());
  // |c_2 - c| = |c_1 - c| = 1/2 is a tie, not a strict improvement, so the
  // first missing expected return time is S_1 = 2.
  CHECK(v.first_violation->first == 2);
}

TEST_CASE("kneading target prefix") {
  auto t = fibonacci_kneading_target(6);
  REQUIRE(t.sym.size() == 21);
  std::string got;
  for (auto s : t.sym) got += s > 0 ? 'R' : 'L';
  CHECK(got == "RLLRRRLRRLLRLRLLRRRLL");
}

TEST_CASE("solve_parameter for ell = 2") {
  SolveOptions opts;
  auto res = solve_parameter(Real(2L, 256), 10, opts);
  CHECK(res.verdict.ok);
  CHECK(res.verdict.depth_reached == 10);
  CHECK(res.bracket_width <= Real("1.0e-18", 64));
  // pinned independently at 1e-24; the solver stops at bracket 1e-18
  CHECK(close_abs(res.lambda_star, Real(kLambdaStar2, 256), Real("2e-18", 64)));

  SECTION("verifier agrees at the requested depth") {
    FibMap f(res.lambda_star, Real(2L, 256));
    CHECK(is_fibonacci_to_depth(f, 10).ok);
  }

  SECTION("nesting of closest returns") {
    FibMap f(res.lambda_star, Real(2L, 256));
    auto rec = closest_returns(f, fibonacci_times(10).back());
    for (size_t n = 0; n + 1 < rec.size(); ++n)
      CHECK(rec[n + 1].distance < rec[n].distance);
  }

  SECTION("idempotent under doubled starting precision") {
    SolveOptions wide;
    wide.policy.initial_bits = 512;
    auto res2 = solve_parameter(Real(2L, 512), 10, wide);
    Real coarser = res.bracket_width.max(res2.bracket_width);
    CHECK((res.lambda_star - res2.lambda_star).abs() <= coarser);
  }
}

TEST_CASE("solve_parameter for large ell") {
  auto res = solve_parameter(Real(16L, 256), 8);
  CHECK(res.verdict.ok);
  // lambda*(16) pinned by the prototype at 0.99991424279317329...
  CHECK(close_abs(res.lambda_star, Real("0.999914242793173292", 256),
                  Real("1e-15", 64)));
}

TEST_CASE("solver input validation") {
  CHECK_THROWS_AS(solve_parameter(Real(2L, 256), 1), DomainError);
  CHECK_THROWS_AS(solve_parameter(Real("1.5", 256), 8), DomainError);
}
