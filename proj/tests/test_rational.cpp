#include <doctest.h>

#include "cotpot/rational.hpp"

using cotpot::Rational;

TEST_CASE("rationals stay canonical") {
  Rational r(10, 4);
  CHECK(r.numerator() == 5);
  CHECK(r.denominator() == 2);
  Rational neg(3, -6);
  CHECK(neg.numerator() == -1);
  CHECK(neg.denominator() == 2);
  CHECK((Rational(1, 3) + Rational(2, 3)).is_integer());
}

TEST_CASE("arithmetic is exact") {
  Rational third(1, 3);
  Rational sum = third + third + third;
  CHECK(sum == Rational(1));
  CHECK(Rational(1, 3) * Rational(3, 7) == Rational(1, 7));
  CHECK(Rational(5) - Rational(7) == Rational(-2));
  CHECK(Rational(1, 10) / Rational(1, 5) == Rational(1, 2));
}

TEST_CASE("string round trips") {
  CHECK(Rational(10).to_string() == "10");
  CHECK(Rational(10, 3).to_string() == "10/3");
  CHECK(Rational(-7, 2).to_string() == "-7/2");

  CHECK(*Rational::parse("10") == Rational(10));
  CHECK(*Rational::parse(" 10 / 3 ") == Rational(10, 3));
  CHECK(*Rational::parse("- 4") == Rational(-4));
  CHECK(*Rational::parse("-10/4") == Rational(-5, 2));
  CHECK(!Rational::parse(""));
  CHECK(!Rational::parse("1/0"));
  CHECK(!Rational::parse("3.5"));
  CHECK(!Rational::parse("12 apples"));
}

TEST_CASE("digit sizing") {
  CHECK(Rational(999).max_digits() == 3);
  CHECK(Rational(1, 1000).max_digits() == 4);
  Rational big = Rational(1000000) * Rational(1000000);
  CHECK(big.max_digits() == 13);
}
