#pragma once

#include <cstdint>
#include <numeric>

namespace gcr::testing {

// Exact rational, always reduced with a positive denominator.
struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Fraction(std::int64_t n = 0, std::int64_t d = 1) : num(n), den(d) { reduce(); }

  void reduce() {
    if (den < 0) {
      num = -num;
      den = -den;
    }
    const std::int64_t g = std::gcd(num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }
  friend Fraction operator+(Fraction a, Fraction b) { return {a.num * b.den + b.num * a.den, a.den * b.den}; }
  friend Fraction operator/(Fraction a, Fraction b) { return {a.num * b.den, a.den * b.num}; }
  friend bool operator==(const Fraction&, const Fraction&) = default;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

}  // namespace gcr::testing
