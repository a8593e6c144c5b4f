#ifndef FIBWALK_REAL_HPP
#define FIBWALK_REAL_HPP

#include <mpfr.h>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <utility>

namespace fibwalk {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class SingularPointError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Raised when a comparison cannot be decided at the current precision.
class PrecisionExhausted : public Error {
 public:
  using Error::Error;
};

// Raised when escalation hits the configured cap.
class PrecisionCapExceeded : public Error {
 public:
  using Error::Error;
};

class NoRootError : public Error {
 public:
  using Error::Error;
};

class NonMonotoneError : public Error {
 public:
  using Error::Error;
};

class BranchError : public Error {
 public:
  using Error::Error;
};

class OrderingError : public Error {
 public:
  using Error::Error;
};

class DegenerateConfigError : public Error {
 public:
  using Error::Error;
};

class InsufficientDepthError : public Error {
 public:
  using Error::Error;
};

class OutOfDepthError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class UnboundedError : public Error {
 public:
  using Error::Error;
};

class OutsidePartitionError : public Error {
 public:
  using Error::Error;
};

class NestingViolationError : public Error {
 public:
  using Error::Error;
};

class InvalidLawError : public Error {
 public:
  using Error::Error;
};

class TailUndeclaredError : public Error {
 public:
  using Error::Error;
};

class DivergentTailError : public Error {
 public:
  using Error::Error;
};

class PrecriticalError : public Error {
 public:
  using Error::Error;
};

struct PrecisionPolicy {
  long initial_bits = 256;
  long cap_bits = 16384;

  static PrecisionPolicy from_env() {
    PrecisionPolicy p;
    if (const char* v = std::getenv("FIBWALK_PRECISION_CAP")) {
      long cap = std::strtol(v, nullptr, 10);
      if (cap >= 64) p.cap_bits = cap;
    }
    return p;
  }
};

constexpr long kMinPrecision = 64;

// Arbitrary-precision real with an explicit precision-in-bits context.
// Arithmetic between two Reals is carried out at the max of their
// precisions; comparisons that fall below the relative decidability
// threshold 2^(-p+8) raise PrecisionExhausted instead of silently
// deciding (see decide_cmp).
class Real {
 public:
  explicit Real(long prec = 256) {
    mpfr_init2(v_, clamp_prec(prec));
    mpfr_set_zero(v_, 1);
  }

  Real(const std::string& s, long prec) {
    mpfr_init2(v_, clamp_prec(prec));
    if (mpfr_set_str(v_, s.c_str(), 10, MPFR_RNDN) != 0)
      throw DomainError("Real: cannot parse '" + s + "'");
  }

  Real(double x, long prec) {
    mpfr_init2(v_, clamp_prec(prec));
    mpfr_set_d(v_, x, MPFR_RNDN);
  }

  Real(long x, long prec) {
    mpfr_init2(v_, clamp_prec(prec));
    mpfr_set_si(v_, x, MPFR_RNDN);
  }

  Real(int x, long prec) : Real(static_cast<long>(x), prec) {}

  Real(const Real& o) {
    mpfr_init2(v_, mpfr_get_prec(o.v_));
    mpfr_set(v_, o.v_, MPFR_RNDN);
  }

  Real(Real&& o) noexcept {
    mpfr_init2(v_, kMinPrecision);
    mpfr_swap(v_, o.v_);
  }

  Real& operator=(const Real& o) {
    if (this != &o) {
      mpfr_set_prec(v_, mpfr_get_prec(o.v_));
      mpfr_set(v_, o.v_, MPFR_RNDN);
    }
    return *this;
  }

  Real& operator=(Real&& o) noexcept {
    if (this != &o) mpfr_swap(v_, o.v_);
    return *this;
  }

  ~Real() { mpfr_clear(v_); }

  long precision() const { return mpfr_get_prec(v_); }

  // Exact re-rounding to a new precision context.
  Real with_precision(long prec) const {
    Real r(prec);
    mpfr_set(r.v_, v_, MPFR_RNDN);
    return r;
  }

  int sign() const { return mpfr_sgn(v_); }
  bool is_zero() const { return mpfr_zero_p(v_) != 0; }

  double to_double() const { return mpfr_get_d(v_, MPFR_RNDN); }

  long to_long() const { return mpfr_get_si(v_, MPFR_RNDN); }

  // Canonical decimal string (scientific form), byte-stable for a given
  // value and digit count. digits=0 derives the count from the precision.
  std::string str(int digits = 0) const {
    if (digits <= 0)
      digits = static_cast<int>(static_cast<double>(precision()) * 0.30103) + 2;
    char* out = nullptr;
    mpfr_asprintf(&out, "%.*Re", digits - 1, v_);
    std::string s = out ? std::string(out) : std::string("0");
    mpfr_free_str(out);
    return s;
  }

  // Exact comparison of stored values.
  int cmp(const Real& o) const { return mpfr_cmp(v_, o.v_); }

  bool operator<(const Real& o) const { return cmp(o) < 0; }
  bool operator<=(const Real& o) const { return cmp(o) <= 0; }
  bool operator>(const Real& o) const { return cmp(o) > 0; }
  bool operator>=(const Real& o) const { return cmp(o) >= 0; }
  bool operator==(const Real& o) const { return cmp(o) == 0; }
  bool operator!=(const Real& o) const { return cmp(o) != 0; }

  // Decision-grade comparison. Bit-equal values compare equal (the
  // difference is exactly zero, so nothing is being rounded away); a
  // nonzero difference below 2^(-p+8) of the operands' magnitude is
  // undecidable at precision p and raises PrecisionExhausted.
  int decide_cmp(const Real& o) const {
    int c = cmp(o);
    if (c == 0) return 0;
    long p = std::min(precision(), o.precision());
    Real diff = (*this - o).abs();
    Real mag = abs().max(o.abs());
    Real thresh = mag.mul_2exp(-p + 8);
    if (diff < thresh)
      throw PrecisionExhausted("comparison undecidable at " +
                               std::to_string(p) + " bits");
    return c;
  }

  Real operator+(const Real& o) const { return bin(mpfr_add, o); }
  Real operator-(const Real& o) const { return bin(mpfr_sub, o); }
  Real operator*(const Real& o) const { return bin(mpfr_mul, o); }
  Real operator/(const Real& o) const {
    if (o.is_zero()) throw DomainError("Real: division by zero");
    return bin(mpfr_div, o);
  }

  Real operator-() const {
    Real r(precision());
    mpfr_neg(r.v_, v_, MPFR_RNDN);
    return r;
  }

  Real abs() const {
    Real r(precision());
    mpfr_abs(r.v_, v_, MPFR_RNDN);
    return r;
  }

  Real max(const Real& o) const { return cmp(o) >= 0 ? *this : o; }
  Real min(const Real& o) const { return cmp(o) <= 0 ? *this : o; }

  Real mul_2exp(long e) const {
    Real r(precision());
    if (e >= 0)
      mpfr_mul_2ui(r.v_, v_, static_cast<unsigned long>(e), MPFR_RNDN);
    else
      mpfr_div_2ui(r.v_, v_, static_cast<unsigned long>(-e), MPFR_RNDN);
    return r;
  }

  Real pow(const Real& e) const {
    Real r(std::max(precision(), e.precision()));
    mpfr_pow(r.v_, v_, e.v_, MPFR_RNDN);
    return r;
  }

  Real pow_si(long e) const {
    Real r(precision());
    mpfr_pow_si(r.v_, v_, e, MPFR_RNDN);
    return r;
  }

  Real sqrt() const {
    Real r(precision());
    mpfr_sqrt(r.v_, v_, MPFR_RNDN);
    return r;
  }

  Real log() const {
    if (sign() <= 0) throw DomainError("Real: log of non-positive value");
    Real r(precision());
    mpfr_log(r.v_, v_, MPFR_RNDN);
    return r;
  }

  Real exp() const {
    Real r(precision());
    mpfr_exp(r.v_, v_, MPFR_RNDN);
    return r;
  }

  mpfr_srcptr raw() const { return v_; }
  mpfr_ptr raw() { return v_; }

 private:
  static long clamp_prec(long p) { return std::max(p, kMinPrecision); }

  using mpfr_bin_fn = int (*)(mpfr_ptr, mpfr_srcptr, mpfr_srcptr, mpfr_rnd_t);

  Real bin(mpfr_bin_fn fn, const Real& o) const {
    Real r(std::max(precision(), o.precision()));
    fn(r.v_, v_, o.v_, MPFR_RNDN);
    return r;
  }

  mpfr_t v_;
};

inline Real operator+(long a, const Real& b) { return Real(a, b.precision()) + b; }
inline Real operator-(long a, const Real& b) { return Real(a, b.precision()) - b; }
inline Real operator*(long a, const Real& b) { return Real(a, b.precision()) * b; }
inline Real operator/(long a, const Real& b) { return Real(a, b.precision()) / b; }
inline Real operator+(const Real& a, long b) { return a + Real(b, a.precision()); }
inline Real operator-(const Real& a, long b) { return a - Real(b, a.precision()); }
inline Real operator*(const Real& a, long b) { return a * Real(b, a.precision()); }
inline Real operator/(const Real& a, long b) { return a / Real(b, a.precision()); }

// 2^e at the given precision.
inline Real pow2(long e, long prec) { return Real(1L, prec).mul_2exp(e); }

// Runs fn(prec) starting at policy.initial_bits, doubling the precision on
// PrecisionExhausted until policy.cap_bits, then gives up with a diagnostic.
template <class Fn>
auto with_escalation(const PrecisionPolicy& policy, Fn&& fn)
    -> decltype(fn(policy.initial_bits)) {
  long p = policy.initial_bits;
  for (;;) {
    try {
      return fn(p);
    } catch (const PrecisionExhausted& e) {
      if (p >= policy.cap_bits)
        throw PrecisionCapExceeded(
            "precision cap " + std::to_string(policy.cap_bits) +
            " bits reached: " + e.what());
      p = std::min(p * 2, policy.cap_bits);
    }
  }
}

}  // namespace fibwalk

#endif  // FIBWALK_REAL_HPP
