#ifndef FIBWALK_FIB_MAP_HPP
#define FIBWALK_FIB_MAP_HPP

#include <optional>
#include <vector>

#include "fibwalk/interval.hpp"
#include "fibwalk/real.hpp"

namespace fibwalk {

// The canonical unimodal family f(x) = lambda * (1 - |2x-1|^ell) on [0,1].
// Critical point c = 1/2, critical value f(c) = lambda, exact symmetry
// f(1-x) = f(x). All evaluations run at the map's working precision.
class FibMap {
 public:
  FibMap(Real lambda, Real ell)
      : lambda_(std::move(lambda)),
        ell_(std::move(ell)),
        prec_(std::max(lambda_.precision(), ell_.precision())),
        c_(Real(1L, prec_).mul_2exp(-1)) {
    lambda_ = lambda_.with_precision(prec_);
    ell_ = ell_.with_precision(prec_);
    if (lambda_.sign() <= 0 || lambda_ > Real(1L, prec_))
      throw DomainError("FibMap: lambda must be in (0,1]");
    if (ell_ < Real(1L, prec_)) throw DomainError("FibMap: ell must be >= 1");
  }

  const Real& lambda() const { return lambda_; }
  const Real& ell() const { return ell_; }
  const Real& c() const { return c_; }
  Real critical_value() const { return lambda_; }
  long precision() const { return prec_; }

  FibMap with_precision(long prec) const {
    return FibMap(lambda_.with_precision(prec), ell_.with_precision(prec));
  }

  std::optional<Real> fold_point() const { return c_; }

  Real eval(const Real& x) const {
    check_domain(x);
    Real u = (x.mul_2exp(1) - 1).abs();
    return lambda_ * (1 - u.pow(ell_));
  }

  // Df(x) = -2*lambda*ell*sign(2x-1)*|2x-1|^(ell-1); Df(c) = 0 for ell > 1.
  Real deriv(const Real& x) const {
    check_domain(x);
    Real t = x.mul_2exp(1) - 1;
    int s = t.sign();
    if (s == 0) return Real(0L, prec_);
    Real mag = lambda_ * ell_ * t.abs().pow(ell_ - 1).mul_2exp(1);
    return s > 0 ? -mag : mag;
  }

  // Sf(x) = -2*(ell^2 - 1)/(2x-1)^2, singular at the critical point.
  Real schwarzian(const Real& x) const {
    check_domain(x);
    Real t = x.mul_2exp(1) - 1;
    if (t.is_zero())
      throw SingularPointError("schwarzian: singular at the critical point");
    Real num = (ell_ * ell_ - 1).mul_2exp(1);
    return -(num / (t * t));
  }

  // The symmetric point with the same image: hat(x) = 1 - x.
  Real hat(const Real& x) const {
    check_domain(x);
    return 1 - x;
  }

  Real iterate(Real x, long n) const {
    for (long i = 0; i < n; ++i) x = eval(x);
    return x;
  }

  // Full orbit x, f(x), ..., f^n(x); out.size() == n+1.
  std::vector<Real> orbit(Real x, long n) const {
    std::vector<Real> out;
    out.reserve(static_cast<size_t>(n) + 1);
    out.push_back(x);
    for (long i = 0; i < n; ++i) {
      x = eval(x);
      out.push_back(x);
    }
    return out;
  }

  // Closed-form branch inverse: the preimage of y on the chosen side of c.
  // y must lie in [0, lambda]; tiny negative round-off of 1 - y/lambda is
  // clamped to the critical point.
  Real inverse(const Real& y, bool right_branch) const {
    if (y.sign() < 0 || y > lambda_)
      throw NoRootError("inverse: value outside [0, lambda]");
    Real rad = 1 - y / lambda_;
    if (rad.sign() < 0) rad = Real(0L, prec_);
    Real r = rad.pow(Real(1L, prec_) / ell_);
    Real half = Real(1L, prec_).mul_2exp(-1);
    return right_branch ? half + r.mul_2exp(-1) : half - r.mul_2exp(-1);
  }

  // Unique preimage of target inside a monotone branch interval, to within
  // 2^(-p+16) relative accuracy. The closed-form inverse is used and the
  // residual verified; a bisection fallback handles round-off at the
  // interval edges.
  Real pullback_branch(const Real& target, const IntervalR& branch) const {
    if (branch.lo.sign() < 0 || branch.hi > Real(1L, prec_))
      throw DomainError("pullback_branch: branch outside [0,1]");
    if (branch.strictly_contains(c_))
      throw NonMonotoneError("pullback_branch: branch straddles c");
    bool right = branch.lo >= c_;
    Real flo = eval(branch.lo);
    Real fhi = eval(branch.hi);
    Real ylo = flo.min(fhi);
    Real yhi = flo.max(fhi);
    if (target < ylo || target > yhi)
      throw NoRootError("pullback_branch: target not in f(branch)");
    Real y = inverse(target, right);
    Real slack = pow2(-prec_ + 12, prec_);
    if (y < branch.lo) {
      if (branch.lo - y > slack)
        throw NoRootError("pullback_branch: preimage outside branch");
      y = branch.lo;
    } else if (y > branch.hi) {
      if (y - branch.hi > slack)
        throw NoRootError("pullback_branch: preimage outside branch");
      y = branch.hi;
    }
    Real tol = residual_tolerance(target);
    if ((eval(y) - target).abs() <= tol) return y;
    y = bisect_fallback(target, branch, right);
    if ((eval(y) - target).abs() > tol)
      throw NoRootError("pullback_branch: residual above tolerance");
    return y;
  }

 private:
  void check_domain(const Real& x) const {
    if (x.sign() < 0 || x > Real(1L, prec_))
      throw DomainError("FibMap: x outside [0,1]");
  }

  Real residual_tolerance(const Real& target) const {
    Real scale = target.abs().max(Real(1L, prec_));
    return scale.mul_2exp(-prec_ + 16);
  }

  Real bisect_fallback(const Real& target, const IntervalR& branch,
                       bool right) const {
    Real lo = branch.lo, hi = branch.hi;
    // On the left branch f increases, on the right it decreases.
    for (long i = 0; i < prec_ + 16; ++i) {
      Real mid = (lo + hi).mul_2exp(-1);
      bool below = eval(mid) < target;
      if (below == !right)
        lo = mid;
      else
        hi = mid;
    }
    return (lo + hi).mul_2exp(-1);
  }

  Real lambda_;
  Real ell_;
  long prec_;
  Real c_;
};

}  // namespace fibwalk

#endif  // FIBWALK_FIB_MAP_HPP
