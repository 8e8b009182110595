#pragma once

#include <gmpxx.h>

#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pfsarnn {

/// Exact rational number, always kept in lowest terms with a positive
/// denominator. Zero is 0/1.
class Rational {
 public:
  Rational() = default;
  Rational(long n) : v_(n) {}  // NOLINT(google-explicit-constructor)
  Rational(long n, long d);
  explicit Rational(mpq_class v) : v_(std::move(v)) { v_.canonicalize(); }

  /// Parses "p/q", an integer, or a finite decimal ("0.4", "-1.25", "1e-3").
  /// Decimals are converted exactly (0.4 -> 2/5). Throws std::invalid_argument.
  static Rational parse(std::string_view text);

  /// Canonical "p/q" form; integers keep the "/1" suffix.
  std::string str() const;

  mpz_class numerator() const { return v_.get_num(); }
  mpz_class denominator() const { return v_.get_den(); }
  const mpq_class& raw() const { return v_; }

  double to_double() const { return v_.get_d(); }
  bool is_zero() const { return sgn(v_) == 0; }
  int sign() const { return sgn(v_); }

  Rational operator-() const { return Rational(mpq_class(-v_)); }
  Rational& operator+=(const Rational& o) { v_ += o.v_; return *this; }
  Rational& operator-=(const Rational& o) { v_ -= o.v_; return *this; }
  Rational& operator*=(const Rational& o) { v_ *= o.v_; return *this; }
  Rational& operator/=(const Rational& o);

  friend Rational operator+(Rational a, const Rational& b) { return a += b; }
  friend Rational operator-(Rational a, const Rational& b) { return a -= b; }
  friend Rational operator*(Rational a, const Rational& b) { return a *= b; }
  friend Rational operator/(Rational a, const Rational& b) { return a /= b; }

  friend bool operator==(const Rational& a, const Rational& b) { return a.v_ == b.v_; }
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
    const int c = cmp(a.v_, b.v_);
    return c < 0 ? std::strong_ordering::less
                 : (c > 0 ? std::strong_ordering::greater : std::strong_ordering::equal);
  }

  friend std::ostream& operator<<(std::ostream& os, const Rational& r) { return os << r.str(); }

 private:
  mpq_class v_{0};
};

Rational abs(const Rational& x);
Rational pow(const Rational& base, unsigned exponent);

/// Real number extended with -inf and +inf. exp(-inf) is 0 and -inf
/// orders below every finite value.
class ExtendedReal {
 public:
  constexpr ExtendedReal() = default;
  constexpr ExtendedReal(double v) : v_(v) {}  // NOLINT(google-explicit-constructor)

  static constexpr ExtendedReal negative_infinity() {
    return ExtendedReal(-std::numeric_limits<double>::infinity());
  }
  static constexpr ExtendedReal positive_infinity() {
    return ExtendedReal(std::numeric_limits<double>::infinity());
  }

  constexpr double value() const { return v_; }
  bool is_finite() const { return std::isfinite(v_); }
  bool is_negative_infinity() const { return std::isinf(v_) && v_ < 0; }
  double exp() const { return is_negative_infinity() ? 0.0 : std::exp(v_); }

  friend constexpr auto operator<=>(ExtendedReal a, ExtendedReal b) { return a.v_ <=> b.v_; }
  friend constexpr bool operator==(ExtendedReal a, ExtendedReal b) { return a.v_ == b.v_; }

 private:
  double v_ = 0.0;
};

enum class ScalarMode { exact, float64 };

ScalarMode parse_mode(std::string_view name);
std::string_view to_string(ScalarMode mode);

/// Bits needed to write x >= 0 as p/q: ceil(log2 p) + ceil(log2 q) over the
/// reduced form, with ceil(log2 0) taken as 0.
std::uint64_t precision_of(const Rational& x);

/// Maximum of precision_of over the entries; 0 for an empty vector.
std::uint64_t vector_precision(std::span<const Rational> h);

/// A value that is either exact or a double, used in reports.
using Number = std::variant<Rational, double>;

double to_double(const Number& n);
/// "p/q" for exact values, 17 significant digits for doubles.
std::string format_number(const Number& n);
std::string format_double(double x);

// Scalar abstraction shared by the exact and float code paths.
template <class S>
struct ScalarTraits;

template <>
struct ScalarTraits<Rational> {
  static constexpr ScalarMode mode = ScalarMode::exact;
  static Rational from(const Rational& r) { return r; }
  static double to_double(const Rational& r) { return r.to_double(); }
  static bool is_zero(const Rational& r) { return r.is_zero(); }
  static Rational relu(const Rational& r) { return r.sign() > 0 ? r : Rational(0); }
  static Number to_number(const Rational& r) { return r; }
};

template <>
struct ScalarTraits<double> {
  static constexpr ScalarMode mode = ScalarMode::float64;
  static double from(const Rational& r) { return r.to_double(); }
  static double to_double(double r) { return r; }
  static bool is_zero(double r) { return r == 0.0; }
  static double relu(double r) { return r > 0.0 ? r : 0.0; }
  static Number to_number(double r) { return r; }
};

template <class S>
std::vector<S> convert_vector(std::span<const Rational> v) {
  std::vector<S> out;
  out.reserve(v.size());
  for (const auto& x : v) out.push_back(ScalarTraits<S>::from(x));
  return out;
}

}  // namespace pfsarnn
