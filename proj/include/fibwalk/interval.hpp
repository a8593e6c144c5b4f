#ifndef FIBWALK_INTERVAL_HPP
#define FIBWALK_INTERVAL_HPP

#include "fibwalk/real.hpp"

namespace fibwalk {

// Closed subinterval of [0,1] with lo < hi.
struct IntervalR {
  Real lo;
  Real hi;

  IntervalR(Real lo_, Real hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
    if (!(lo < hi)) throw DomainError("IntervalR: requires lo < hi");
  }

  Real length() const { return hi - lo; }

  bool contains(const Real& x) const { return lo <= x && x <= hi; }

  bool strictly_contains(const Real& x) const { return lo < x && x < hi; }

  bool contains(const IntervalR& o) const { return lo <= o.lo && o.hi <= hi; }

  Real midpoint() const { return (lo + hi).mul_2exp(-1); }
};

}  // namespace fibwalk

#endif  // FIBWALK_INTERVAL_HPP
