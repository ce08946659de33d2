#include "cotpot/rational.hpp"

#include <algorithm>
#include <cctype>

namespace cotpot {

std::optional<Rational> Rational::parse(std::string_view text) {
  // Accepts optional sign, integer, or integer '/' positive-integer.
  // Whitespace around tokens is tolerated; anything else is a parse failure.
  std::size_t i = 0;
  auto skip_ws = [&] {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  };
  auto read_int = [&](bool allow_sign) -> std::optional<std::string> {
    skip_ws();
    std::string out;
    if (allow_sign && i < text.size() && (text[i] == '-' || text[i] == '+')) {
      if (text[i] == '-') out.push_back('-');
      ++i;
      skip_ws();
    }
    std::size_t start = out.size();
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
      out.push_back(text[i]);
      ++i;
    }
    if (out.size() == start) return std::nullopt;
    return out;
  };

  auto num = read_int(true);
  if (!num) return std::nullopt;
  skip_ws();
  if (i < text.size() && text[i] == '/') {
    ++i;
    auto den = read_int(false);
    if (!den) return std::nullopt;
    skip_ws();
    if (i != text.size()) return std::nullopt;
    mpz_class d(*den);
    if (d == 0) return std::nullopt;
    return Rational(mpz_class(*num), d);
  }
  if (i != text.size()) return std::nullopt;
  return Rational(mpz_class(*num), mpz_class(1));
}

std::size_t Rational::max_digits() const {
  // mpz_sizeinbase may report one high for base 10; make it exact.
  auto digits_of = [](const mpz_class& z) {
    std::size_t est = mpz_sizeinbase(z.get_mpz_t(), 10);
    if (est <= 1) return est;
    mpz_class probe;
    mpz_ui_pow_ui(probe.get_mpz_t(), 10, static_cast<unsigned long>(est - 1));
    return cmp(z, probe) >= 0 ? est : est - 1;
  };
  return std::max(digits_of(mpz_class(abs(numerator()))),
                  digits_of(mpz_class(denominator())));
}

std::string Rational::to_string() const {
  if (is_integer()) return numerator().get_str();
  return numerator().get_str() + "/" + denominator().get_str();
}

}  // namespace cotpot
