#include "pfsarnn/heads.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace pfsarnn {

template <class S>
std::vector<S> sparsemax(std::span<const S> x) {
  if (x.empty()) return {};
  std::vector<S> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  S cumulative{0};
  S support_sum{0};
  std::size_t support = 0;
  for (std::size_t k = 1; k <= sorted.size(); ++k) {
    cumulative += sorted[k - 1];
    if (S{1} + S(static_cast<long>(k)) * sorted[k - 1] > cumulative) {
      support = k;
      support_sum = cumulative;
    }
  }
  const S tau = (support_sum - S{1}) / S(static_cast<long>(support));
  std::vector<S> out;
  out.reserve(x.size());
  for (const auto& v : x) out.push_back(v > tau ? v - tau : S{0});
  return out;
}

template std::vector<Rational> sparsemax<Rational>(std::span<const Rational>);
template std::vector<double> sparsemax<double>(std::span<const double>);

std::vector<double> softmax(std::span<const ExtendedReal> x, double temperature) {
  if (!(temperature > 0.0)) throw std::domain_error("temperature must be positive");
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& v : x) {
    if (v.is_finite()) top = std::max(top, v.value());
    if (v == ExtendedReal::positive_infinity()) throw std::domain_error("softmax of +inf");
  }
  if (std::isinf(top)) throw std::domain_error("empty support");
  std::vector<double> out;
  out.reserve(x.size());
  double total = 0.0;
  for (const auto& v : x) {
    const double e = v.is_negative_infinity() ? 0.0 : std::exp(temperature * (v.value() - top));
    out.push_back(e);
    total += e;
  }
  for (auto& p : out) p /= total;
  return out;
}

std::vector<ExtendedReal> extended_log(std::span<const double> x) {
  std::vector<ExtendedReal> out;
  out.reserve(x.size());
  for (double v : x) {
    if (v < 0.0 || std::isnan(v)) throw std::domain_error("extended_log of a negative value");
    out.push_back(v == 0.0 ? ExtendedReal::negative_infinity() : ExtendedReal(std::log(v)));
  }
  return out;
}

std::vector<ExtendedReal> extended_log(std::span<const Rational> x) {
  std::vector<ExtendedReal> out;
  out.reserve(x.size());
  for (const auto& v : x) {
    if (v.sign() < 0) throw std::domain_error("extended_log of a negative value");
    if (v.is_zero()) {
      out.push_back(ExtendedReal::negative_infinity());
      continue;
    }
    // log p - log q keeps tiny rationals away from double underflow.
    long exp_num = 0, exp_den = 0;
    const double m_num = mpz_get_d_2exp(&exp_num, v.numerator().get_mpz_t());
    const double m_den = mpz_get_d_2exp(&exp_den, v.denominator().get_mpz_t());
    out.push_back(ExtendedReal(std::log(m_num) - std::log(m_den) +
                               static_cast<double>(exp_num - exp_den) * std::log(2.0)));
  }
  return out;
}

HeadKind parse_head_kind(std::string_view name) {
  if (name == "sparsemax") return HeadKind::sparsemax;
  if (name == "softmax") return HeadKind::softmax;
  if (name == "mlp") return HeadKind::mlp;
  throw std::invalid_argument("unknown head '" + std::string(name) + "' (expected sparsemax|softmax|mlp)");
}

std::string_view to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::sparsemax: return "sparsemax";
    case HeadKind::softmax: return "softmax";
    case HeadKind::mlp: return "mlp";
  }
  return "?";
}

namespace {

Matrix<double> to_float(const OutputMatrix& m) { return m.E.map<double>([](const Rational& r) { return r.to_double(); }); }

template <class S>
const Matrix<S>& pick(const OutputMatrix& exact, const Matrix<double>& approx) {
  if constexpr (std::is_same_v<S, Rational>) {
    (void)approx;
    return exact.E;
  } else {
    (void)exact;
    return approx;
  }
}

template <class S>
bool all_zero(const std::vector<S>& v) {
  return std::all_of(v.begin(), v.end(), [](const S& x) { return ScalarTraits<S>::is_zero(x); });
}

}  // namespace

SparsemaxHead::SparsemaxHead(OutputMatrix output) : exact_(std::move(output)), float_(to_float(exact_)) {}

template <class S>
std::vector<S> SparsemaxHead::conditional(const HiddenState<S>& h) const {
  const S norm = h.l1_norm();
  if (ScalarTraits<S>::is_zero(norm)) throw ZeroMassError();
  auto scores = multiply(pick<S>(exact_, float_), std::span<const S>(h.entries));
  for (auto& s : scores) s /= norm;
  return sparsemax<S>(scores);
}

template std::vector<Rational> SparsemaxHead::conditional(const HiddenState<Rational>&) const;
template std::vector<double> SparsemaxHead::conditional(const HiddenState<double>&) const;

SoftmaxLogHead::SoftmaxLogHead(OutputMatrix output, Rational temperature)
    : exact_(std::move(output)), float_(to_float(exact_)), temperature_(std::move(temperature)) {
  if (temperature_.sign() <= 0) throw std::invalid_argument("temperature must be positive");
  if (temperature_.denominator() == 1 && temperature_.numerator().fits_uint_p())
    integer_temperature_ = static_cast<unsigned>(temperature_.numerator().get_ui());
}

template <class S>
std::vector<S> SoftmaxLogHead::conditional(const HiddenState<S>& h) const {
  if (all_zero(h.entries)) throw ZeroMassError();
  const auto scores = multiply(pick<S>(exact_, float_), std::span<const S>(h.entries));
  if constexpr (std::is_same_v<S, Rational>) {
    if (!integer_temperature_)
      throw std::invalid_argument("exact softmax head needs a positive integer temperature, got " + temperature_.str());
    std::vector<Rational> out;
    Rational total(0);
    for (const auto& s : scores) {
      out.push_back(pow(s, *integer_temperature_));
      total += out.back();
    }
    if (total.is_zero()) throw ZeroMassError();
    for (auto& p : out) p /= total;
    return out;
  } else {
    return softmax(extended_log(std::span<const double>(scores)), temperature_.to_double());
  }
}

template std::vector<Rational> SoftmaxLogHead::conditional(const HiddenState<Rational>&) const;
template std::vector<double> SoftmaxLogHead::conditional(const HiddenState<double>&) const;

std::vector<double> MlpHead::logits(std::span<const double> h) const {
  if (h.size() != input_dim) throw std::invalid_argument("MLP input has the wrong dimension");
  std::vector<double> x(h.begin(), h.end());
  if (clamp) {
    for (auto& v : x) v = std::max(xi1, v);
  }
  std::vector<double> hidden_out(hidden);
  for (std::size_t j = 0; j < hidden; ++j) {
    double acc = b1[j];
    for (std::size_t i = 0; i < input_dim; ++i) acc += W1(j, i) * x[i];
    hidden_out[j] = acc > 0.0 ? acc : 0.0;
  }
  std::vector<double> out(outputs);
  for (std::size_t k = 0; k < outputs; ++k) {
    double acc = b2[k];
    for (std::size_t j = 0; j < hidden; ++j) acc += W2(k, j) * hidden_out[j];
    out[k] = acc;
  }
  return out;
}

std::vector<double> MlpHead::conditional(const HiddenState<double>& h) const {
  const auto z = logits(h.entries);
  std::vector<ExtendedReal> ext(z.begin(), z.end());
  return softmax(ext, temperature);
}

MlpHead zero_mlp(std::size_t input_dim, std::size_t hidden, std::size_t outputs) {
  MlpHead head;
  head.input_dim = input_dim;
  head.hidden = hidden;
  head.outputs = outputs;
  head.W1 = Matrix<double>(hidden, input_dim);
  head.b1.assign(hidden, 0.0);
  head.W2 = Matrix<double>(outputs, hidden);
  head.b2.assign(outputs, 0.0);
  return head;
}

double lipschitz_constant(std::size_t string_length, double temperature, std::size_t dim) {
  if (!(temperature > 0.0) || dim == 0) throw std::invalid_argument("lipschitz_constant needs positive arguments");
  return static_cast<double>(string_length + 1) * std::sqrt(static_cast<double>(dim)) * temperature;
}

}  // namespace pfsarnn
