#pragma once

#include <gmpxx.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "contagion/error.hpp"

namespace contagion {

using Rational = mpq_class;

template <typename S>
inline constexpr bool is_rational_v = std::is_same_v<S, Rational>;

// Parses "12", "-0.125", "1e-3", "2.5E+2" or "1/12" into an exact rational.
inline Rational parse_rational(std::string_view text) {
  auto fail = [&]() -> Rational {
    throw DomainError("not a decimal or rational literal: '" +
                      std::string(text) + "'");
  };
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front())))
    text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back())))
    text.remove_suffix(1);
  if (text.empty()) return fail();

  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    Rational num = parse_rational(text.substr(0, slash));
    Rational den = parse_rational(text.substr(slash + 1));
    if (den == 0) return fail();
    return Rational(num / den);
  }

  bool negative = false;
  std::size_t pos = 0;
  if (text[pos] == '+' || text[pos] == '-') {
    negative = text[pos] == '-';
    ++pos;
  }
  std::string digits;
  long exponent = 0;
  bool seen_digit = false;
  bool seen_point = false;
  for (; pos < text.size(); ++pos) {
    char c = text[pos];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digits.push_back(c);
      seen_digit = true;
      if (seen_point) --exponent;
    } else if (c == '.' && !seen_point) {
      seen_point = true;
    } else {
      break;
    }
  }
  if (!seen_digit) return fail();
  if (pos < text.size()) {
    if (text[pos] != 'e' && text[pos] != 'E') return fail();
    ++pos;
    long e = 0;
    std::string_view rest = text.substr(pos);
    if (!rest.empty() && rest.front() == '+') rest.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), e);
    if (ec != std::errc() || ptr != rest.data() + rest.size()) return fail();
    exponent += e;
  }

  mpz_class mantissa(digits, 10);
  mpz_class scale;
  mpz_ui_pow_ui(scale.get_mpz_t(), 10, static_cast<unsigned long>(std::labs(exponent)));
  Rational value = exponent >= 0 ? Rational(mantissa * scale) : Rational(mantissa, scale);
  value.canonicalize();
  return negative ? Rational(-value) : value;
}

// Exact value of the shortest decimal that round-trips to x, so 0.1 -> 1/10.
inline Rational to_rational(double x) {
  if (!std::isfinite(x)) throw DomainError("non-finite value has no rational form");
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  (void)ec;
  return parse_rational(std::string_view(buf, static_cast<std::size_t>(ptr - buf)));
}

inline double to_double(const Rational& x) { return x.get_d(); }
inline double to_double(double x) { return x; }

template <typename S>
S from_rational(const Rational& x) {
  if constexpr (is_rational_v<S>) {
    return x;
  } else {
    return static_cast<S>(x.get_d());
  }
}

template <typename S>
S ipow(const S& base, unsigned long exponent) {
  S result(1);
  S b(base);
  while (exponent > 0) {
    if (exponent & 1UL) result *= b;
    exponent >>= 1;
    if (exponent > 0) b *= b;
  }
  return result;
}

template <typename S>
S binomial(long n, long k) {
  if (k < 0 || n < 0 || k > n) return S(0);
  if constexpr (is_rational_v<S>) {
    mpz_class c;
    mpz_bin_uiui(c.get_mpz_t(), static_cast<unsigned long>(n),
                 static_cast<unsigned long>(k));
    return Rational(c);
  } else {
    k = std::min(k, n - k);
    S c(1);
    for (long i = 1; i <= k; ++i) c = c * S(n - k + i) / S(i);
    return c;
  }
}

// Pascal triangle up to a fixed row; out-of-range (n,k) read as 0.
template <typename S>
class BinomialTable {
 public:
  explicit BinomialTable(int max_n = 0) { reserve(max_n); }

  void reserve(int max_n) {
    while (static_cast<int>(rows_.size()) <= max_n) {
      const int n = static_cast<int>(rows_.size());
      std::vector<S> row(static_cast<std::size_t>(n) + 1, S(1));
      for (int k = 1; k < n; ++k) row[k] = rows_[n - 1][k - 1] + rows_[n - 1][k];
      rows_.push_back(std::move(row));
    }
  }

  int max_n() const { return static_cast<int>(rows_.size()) - 1; }

  const S& operator()(int n, int k) const {
    if (k < 0 || n < 0 || k > n || n > max_n()) return zero_;
    return rows_[n][k];
  }

 private:
  std::vector<std::vector<S>> rows_;
  S zero_{0};
};

}  // namespace contagion
