#pragma once

#include <gmpxx.h>

#include <stdexcept>
#include <string>
#include <string_view>

namespace ctf {

/// Exact rational number. All probabilities in the library are carried as
/// Rational; floating point only appears when printing or sampling.
using Rational = mpq_class;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses "p/q", an integer, or a decimal literal ("0.95" is 19/20).
/// Throws Error on malformed input or a zero denominator.
Rational parse_rational(std::string_view text);

/// Canonical "p/q" form; integers print as "p/1" so every value has a slash.
std::string to_pq_string(const Rational& r);

/// Shortest canonical form: "2/5", "1", "0".
std::string to_string(const Rational& r);

double to_double(const Rational& r);

/// "%.6g" rendering used in human-readable output.
std::string to_decimal_string(const Rational& r);

mpz_class lcm(const mpz_class& a, const mpz_class& b);

}  // namespace ctf
