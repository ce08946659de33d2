#pragma once

#include <gmpxx.h>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace cotpot {

// Exact rational number. Always canonical: lowest terms, positive denominator.
// Backed by GMP so evaluation never sees a float anywhere.
class Rational {
 public:
  Rational() : q_(0) {}
  Rational(long n) : q_(n) {}  // NOLINT(google-explicit-constructor)
  Rational(long n, long d) : q_(n, d) { q_.canonicalize(); }
  explicit Rational(const mpz_class& n) : q_(n) {}
  Rational(const mpz_class& n, const mpz_class& d) : q_(n, d) { q_.canonicalize(); }

  static std::optional<Rational> parse(std::string_view text);

  Rational operator+(const Rational& o) const { return Rational(q_ + o.q_); }
  Rational operator-(const Rational& o) const { return Rational(q_ - o.q_); }
  Rational operator*(const Rational& o) const { return Rational(q_ * o.q_); }
  // Caller must reject zero divisors; GMP aborts on division by zero.
  Rational operator/(const Rational& o) const { return Rational(q_ / o.q_); }
  Rational operator-() const { return Rational(-q_); }

  bool operator==(const Rational& o) const { return q_ == o.q_; }
  bool operator!=(const Rational& o) const { return q_ != o.q_; }
  bool operator<(const Rational& o) const { return q_ < o.q_; }
  bool operator<=(const Rational& o) const { return q_ <= o.q_; }
  bool operator>(const Rational& o) const { return q_ > o.q_; }
  bool operator>=(const Rational& o) const { return q_ >= o.q_; }

  bool is_zero() const { return q_ == 0; }
  bool is_integer() const { return q_.get_den() == 1; }

  mpz_class numerator() const { return q_.get_num(); }
  mpz_class denominator() const { return q_.get_den(); }

  // Decimal digits of the larger of |numerator| and denominator.
  std::size_t max_digits() const;

  // "n" when the denominator is 1, otherwise "p/q".
  std::string to_string() const;

  double to_double() const { return q_.get_d(); }

 private:
  explicit Rational(const mpq_class& q) : q_(q) { q_.canonicalize(); }
  mpq_class q_;
};

}  // namespace cotpot
