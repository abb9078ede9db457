#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace riskshare {

enum class ErrorKind {
  Structural,   // malformed input: dimension mismatch, schema violation
  Validation,   // a model invariant failed
  Domain,       // argument outside the domain of the operation
  Contract,     // a precondition of a construction does not hold
  NRViolation,  // no jointly accepted security with nonzero price
  Unsupported,  // combination of measures without a constructive solver
  Numerical,    // iteration cap or bracket failure
  Internal      // results contradict theory; signals an invalid input system
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Structural: return "structural";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::NRViolation: return "nr-violation";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::Numerical: return "numerical";
    case ErrorKind::Internal: return "internal";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

/// Extended real number. Risk values can be +inf (no securitisation makes a
/// loss acceptable) and market prices can be -inf (security arbitrage), so
/// infinities are explicit states rather than IEEE sentinels.
class ExtReal {
 public:
  enum class Kind { Finite, PosInf, NegInf };

  ExtReal() = default;
  static ExtReal finite(double v) {
    if (!std::isfinite(v)) fail(ErrorKind::Numerical, "ExtReal::finite given non-finite value");
    return ExtReal(Kind::Finite, v);
  }
  static ExtReal pos_inf() { return ExtReal(Kind::PosInf, 0.0); }
  static ExtReal neg_inf() { return ExtReal(Kind::NegInf, 0.0); }

  Kind kind() const { return kind_; }
  bool is_finite() const { return kind_ == Kind::Finite; }
  bool is_pos_inf() const { return kind_ == Kind::PosInf; }
  bool is_neg_inf() const { return kind_ == Kind::NegInf; }

  double value() const {
    if (kind_ != Kind::Finite) fail(ErrorKind::Domain, "value() of an infinite ExtReal");
    return v_;
  }
  /// IEEE view, for reporting only.
  double as_double() const {
    switch (kind_) {
      case Kind::PosInf: return std::numeric_limits<double>::infinity();
      case Kind::NegInf: return -std::numeric_limits<double>::infinity();
      default: return v_;
    }
  }

  friend ExtReal operator+(ExtReal a, ExtReal b) {
    if (a.is_pos_inf() && b.is_neg_inf()) fail(ErrorKind::Domain, "inf - inf");
    if (a.is_neg_inf() && b.is_pos_inf()) fail(ErrorKind::Domain, "-inf + inf");
    if (a.is_pos_inf() || b.is_pos_inf()) return pos_inf();
    if (a.is_neg_inf() || b.is_neg_inf()) return neg_inf();
    return finite(a.v_ + b.v_);
  }
  friend ExtReal operator+(ExtReal a, double b) { return a + finite(b); }
  friend bool operator==(const ExtReal& a, const ExtReal& b) {
    return a.kind_ == b.kind_ && (a.kind_ != Kind::Finite || a.v_ == b.v_);
  }
  friend std::ostream& operator<<(std::ostream& os, const ExtReal& x) {
    if (x.is_pos_inf()) return os << "+inf";
    if (x.is_neg_inf()) return os << "-inf";
    return os << x.v_;
  }

 private:
  ExtReal(Kind k, double v) : kind_(k), v_(v) {}
  Kind kind_ = Kind::Finite;
  double v_ = 0.0;
};

}  // namespace riskshare
