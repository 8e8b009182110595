#include "pfsarnn/numerics.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace pfsarnn {

namespace {

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

mpz_class parse_integer(std::string_view s) {
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  if (!all_digits(s)) throw std::invalid_argument("not an integer");
  mpz_class v(std::string(s), 10);
  return negative ? mpz_class(-v) : v;
}

mpz_class pow10(unsigned long e) {
  mpz_class r;
  mpz_ui_pow_ui(r.get_mpz_t(), 10, e);
  return r;
}

constexpr long kMaxExponent = 4096;

Rational parse_decimal(std::string_view s) {
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  long exponent = 0;
  if (const auto e = s.find_first_of("eE"); e != std::string_view::npos) {
    std::string_view exp_text = s.substr(e + 1);
    if (!exp_text.empty() && exp_text.front() == '+') exp_text.remove_prefix(1);
    const auto* first = exp_text.data();
    const auto* last = exp_text.data() + exp_text.size();
    auto [ptr, ec] = std::from_chars(first, last, exponent);
    if (exp_text.empty() || ec != std::errc() || ptr != last) throw std::invalid_argument("bad exponent");
    if (exponent > kMaxExponent || exponent < -kMaxExponent) throw std::invalid_argument("exponent out of range");
    s = s.substr(0, e);
  }
  std::string digits;
  long frac_digits = 0;
  if (const auto dot = s.find('.'); dot != std::string_view::npos) {
    const auto int_part = s.substr(0, dot);
    const auto frac_part = s.substr(dot + 1);
    if (int_part.empty() && frac_part.empty()) throw std::invalid_argument("empty decimal");
    if ((!int_part.empty() && !all_digits(int_part)) || (!frac_part.empty() && !all_digits(frac_part)))
      throw std::invalid_argument("bad decimal digits");
    digits = std::string(int_part) + std::string(frac_part);
    frac_digits = static_cast<long>(frac_part.size());
  } else {
    if (!all_digits(s)) throw std::invalid_argument("bad decimal digits");
    digits = std::string(s);
  }
  mpq_class v{mpz_class(digits, 10)};
  const long shift = exponent - frac_digits;
  if (shift > 0) v *= mpq_class(pow10(static_cast<unsigned long>(shift)));
  if (shift < 0) v /= mpq_class(pow10(static_cast<unsigned long>(-shift)));
  if (negative) v = -v;
  return Rational(v);
}

}  // namespace

Rational::Rational(long n, long d) {
  if (d == 0) throw std::domain_error("rational with zero denominator");
  v_ = mpq_class(n, 1) / mpq_class(d, 1);
  v_.canonicalize();
}

Rational& Rational::operator/=(const Rational& o) {
  if (o.is_zero()) throw std::domain_error("division by zero");
  v_ /= o.v_;
  return *this;
}

Rational Rational::parse(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  if (text.empty()) throw std::invalid_argument("empty rational");
  try {
    if (const auto slash = text.find('/'); slash != std::string_view::npos) {
      const mpz_class num = parse_integer(text.substr(0, slash));
      const std::string_view den_text = text.substr(slash + 1);
      if (!all_digits(den_text)) throw std::invalid_argument("bad denominator");
      const mpz_class den(std::string(den_text), 10);
      if (den == 0) throw std::invalid_argument("zero denominator");
      mpq_class v(num, den);
      v.canonicalize();
      return Rational(v);
    }
    return parse_decimal(text);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("invalid rational '" + std::string(text) + "': " + e.what());
  }
}

std::string Rational::str() const {
  return v_.get_num().get_str() + "/" + v_.get_den().get_str();
}

Rational abs(const Rational& x) { return x.sign() < 0 ? -x : x; }

Rational pow(const Rational& base, unsigned exponent) {
  Rational result(1);
  Rational b = base;
  while (exponent > 0) {
    if (exponent & 1U) result *= b;
    b *= b;
    exponent >>= 1U;
  }
  return result;
}

ScalarMode parse_mode(std::string_view name) {
  if (name == "exact") return ScalarMode::exact;
  if (name == "float") return ScalarMode::float64;
  throw std::invalid_argument("unknown mode '" + std::string(name) + "' (expected exact|float)");
}

std::string_view to_string(ScalarMode mode) {
  return mode == ScalarMode::exact ? "exact" : "float";
}

namespace {

// ceil(log2 n) for n >= 1; 0 for n == 0.
std::uint64_t ceil_log2(const mpz_class& n) {
  if (n <= 1) return 0;
  const mpz_class m = n - 1;
  return mpz_sizeinbase(m.get_mpz_t(), 2);
}

}  // namespace

std::uint64_t precision_of(const Rational& x) {
  if (x.sign() < 0) throw std::domain_error("precision_of expects a nonnegative rational");
  return ceil_log2(x.numerator()) + ceil_log2(x.denominator());
}

std::uint64_t vector_precision(std::span<const Rational> h) {
  std::uint64_t best = 0;
  for (const auto& x : h) best = std::max(best, precision_of(x));
  return best;
}

double to_double(const Number& n) {
  return std::visit([](const auto& v) -> double {
    if constexpr (std::is_same_v<std::decay_t<decltype(v)>, Rational>) {
      return v.to_double();
    } else {
      return v;
    }
  }, n);
}

std::string format_double(double x) {
  if (std::isinf(x)) return x < 0 ? "-inf" : "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string format_number(const Number& n) {
  if (const auto* r = std::get_if<Rational>(&n)) {
    // Integers print bare so "0" reads naturally in tables.
    if (r->denominator() == 1) return r->numerator().get_str();
    return r->str();
  }
  return format_double(std::get<double>(n));
}

}  // namespace pfsarnn
