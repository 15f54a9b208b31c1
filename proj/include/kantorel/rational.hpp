#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <compare>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>

namespace kantorel {

using Int = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

inline double to_double(const Rat& q) { return q.convert_to<double>(); }

inline std::string to_string(const Rat& q) { return q.str(); }

/// Extended rational: a finite (possibly negative) rational or +infinity.
/// Arithmetic follows the lattice conventions of extended nonnegative reals:
/// inf + x = inf, 0 * inf = 0, x * inf = inf for x != 0.
class ExtRat {
public:
  ExtRat() : finite_(true), q_(0) {}
  ExtRat(Rat q) : finite_(true), q_(std::move(q)) {}
  ExtRat(const Int& n) : finite_(true), q_(n) {}
  ExtRat(long n) : finite_(true), q_(n) {}
  ExtRat(int n) : finite_(true), q_(n) {}

  static ExtRat infinity() {
    ExtRat r;
    r.finite_ = false;
    return r;
  }

  bool is_inf() const { return !finite_; }
  bool is_finite() const { return finite_; }

  const Rat& value() const {
    if (!finite_) throw std::domain_error("ExtRat: value() on infinity");
    return q_;
  }

  bool is_zero() const { return finite_ && q_ == 0; }
  bool is_nonneg() const { return !finite_ || q_ >= 0; }

  ExtRat operator+(const ExtRat& o) const {
    if (!finite_ || !o.finite_) return infinity();
    return ExtRat(q_ + o.q_);
  }
  ExtRat operator-(const ExtRat& o) const {
    // Finite subtraction only; inf - finite = inf.
    if (!finite_ && o.finite_) return infinity();
    if (!finite_ || !o.finite_)
      throw std::domain_error("ExtRat: inf on right of subtraction");
    return ExtRat(q_ - o.q_);
  }
  ExtRat operator*(const ExtRat& o) const {
    // 0 * inf = inf * 0 = 0.
    if (is_zero() || o.is_zero()) return ExtRat(0);
    if (!finite_ || !o.finite_) return infinity();
    return ExtRat(q_ * o.q_);
  }
  ExtRat operator/(const ExtRat& o) const {
    if (!o.finite_) return ExtRat(0);
    if (o.q_ == 0) throw std::domain_error("ExtRat: division by zero");
    if (!finite_) return infinity();
    return ExtRat(q_ / o.q_);
  }
  ExtRat& operator+=(const ExtRat& o) { return *this = *this + o; }
  ExtRat& operator*=(const ExtRat& o) { return *this = *this * o; }

  bool operator==(const ExtRat& o) const {
    if (finite_ != o.finite_) return false;
    return !finite_ || q_ == o.q_;
  }
  bool operator!=(const ExtRat& o) const { return !(*this == o); }
  bool operator<(const ExtRat& o) const {
    if (!finite_) return false;
    if (!o.finite_) return true;
    return q_ < o.q_;
  }
  bool operator<=(const ExtRat& o) const { return *this < o || *this == o; }
  bool operator>(const ExtRat& o) const { return o < *this; }
  bool operator>=(const ExtRat& o) const { return o <= *this; }

  ExtRat abs() const {
    if (!finite_) return infinity();
    return ExtRat(q_ < 0 ? Rat(-q_) : q_);
  }

  /// Truncated subtraction: max(a - b, 0). inf monus anything finite = inf.
  ExtRat monus(const ExtRat& o) const {
    if (!o.finite_) return ExtRat(0);
    if (!finite_) return infinity();
    Rat d = q_ - o.q_;
    return ExtRat(d < 0 ? Rat(0) : d);
  }

  static ExtRat max(const ExtRat& a, const ExtRat& b) { return a < b ? b : a; }
  static ExtRat min(const ExtRat& a, const ExtRat& b) { return a < b ? a : b; }

  /// base^e for a natural exponent.
  static ExtRat pow(const ExtRat& base, const Int& e) {
    if (e < 0) throw std::domain_error("ExtRat: negative exponent");
    if (e == 0) return ExtRat(1);
    if (!base.finite_) return infinity();
    Rat acc(1);
    Rat b = base.q_;
    Int n = e;
    while (n > 0) {
      if ((n & 1) != 0) acc *= b;
      b *= b;
      n >>= 1;
    }
    return ExtRat(acc);
  }

  double to_double() const {
    if (!finite_) return std::numeric_limits<double>::infinity();
    return kantorel::to_double(q_);
  }

  std::string str() const { return finite_ ? q_.str() : "inf"; }

  friend std::ostream& operator<<(std::ostream& os, const ExtRat& r) {
    return os << r.str();
  }

private:
  bool finite_;
  Rat q_;
};

/// Parses "p/q", "n", or "inf".
inline ExtRat parse_ext_rat(const std::string& s) {
  if (s == "inf") return ExtRat::infinity();
  return ExtRat(Rat(s));
}

}  // namespace kantorel
