#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pfsarnn/compiler.hpp"
#include "pfsarnn/matrix.hpp"
#include "pfsarnn/numerics.hpp"
#include "pfsarnn/runtime.hpp"

namespace pfsarnn {

/// Euclidean projection onto the probability simplex (sort and threshold).
/// Exact for Rational input.
template <class S>
std::vector<S> sparsemax(std::span<const S> x);

/// exp(temperature * x_n) / sum_m exp(temperature * x_m), exp(-inf) = 0.
/// Throws std::domain_error("empty support") when every entry is -inf.
std::vector<double> softmax(std::span<const ExtendedReal> x, double temperature = 1.0);

/// log x_d, or -inf where x_d = 0. Throws std::domain_error on negative input.
std::vector<ExtendedReal> extended_log(std::span<const double> x);
std::vector<ExtendedReal> extended_log(std::span<const Rational> x);

enum class HeadKind { sparsemax, softmax, mlp };

HeadKind parse_head_kind(std::string_view name);
std::string_view to_string(HeadKind kind);

/// Raised when a head is asked for the conditional at a zero-mass prefix.
class ZeroMassError : public std::domain_error {
 public:
  ZeroMassError() : std::domain_error("zero-probability prefix") {}
};

/// sparsemax(E h / ||h||_1).
class SparsemaxHead {
 public:
  explicit SparsemaxHead(OutputMatrix output);
  const OutputMatrix& output() const { return exact_; }

  template <class S>
  std::vector<S> conditional(const HiddenState<S>& h) const;

 private:
  OutputMatrix exact_;
  Matrix<double> float_;
};

/// softmax(temperature * extended_log(E h)). The exact path evaluates the
/// same function in closed form, (E h)^n / sum (E h)^n, and therefore needs a
/// positive integer temperature n.
class SoftmaxLogHead {
 public:
  explicit SoftmaxLogHead(OutputMatrix output, Rational temperature = Rational(1));
  const OutputMatrix& output() const { return exact_; }
  const Rational& temperature() const { return temperature_; }

  template <class S>
  std::vector<S> conditional(const HiddenState<S>& h) const;

 private:
  OutputMatrix exact_;
  Matrix<double> float_;
  Rational temperature_;
  std::optional<unsigned> integer_temperature_;
};

/// Single-hidden-layer ReLU network producing logits, softmax-normalized.
struct MlpHead {
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  std::size_t outputs = 0;
  Matrix<double> W1;  // hidden x input_dim
  std::vector<double> b1;
  Matrix<double> W2;  // outputs x hidden
  std::vector<double> b2;
  double xi1 = 0.0;    // clamp floor
  bool clamp = false;  // apply max(xi1, .) to the input when set
  double temperature = 1.0;

  std::vector<double> logits(std::span<const double> h) const;
  std::vector<double> conditional(const HiddenState<double>& h) const;
};

/// Zero network: every logit is 0, so the distribution is uniform.
MlpHead zero_mlp(std::size_t input_dim, std::size_t hidden, std::size_t outputs);

struct MlpFitConfig {
  std::size_t hidden = 64;
  std::size_t train_copies = 8;        // jittered copies per sample in the training set
  std::size_t validation_copies = 4;   // fresh jittered copies per sample, held out
  double jitter = 0.02;                // relative multiplicative jitter in the active block
  std::size_t max_iterations = 20000;
  double learning_rate = 2e-3;
  double final_learning_rate = 1e-5;   // cosine decay endpoint
  double target_tau = 1e-3;
  std::uint64_t seed = 0;
  bool clamp = false;
};

struct MlpFitReport {
  double tau_achieved = 0.0;  // sup logit error on the validation set
  double target_tau = 0.0;
  bool converged = false;     // tau_achieved <= target_tau
  double xi1 = 0.0;           // smallest positive sample coordinate
  double xi2 = 0.0;           // smallest log(E h) over the samples
  std::size_t iterations = 0;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
  double initial_tau = 0.0;   // after the constructive initialization
  MlpFitConfig config;
  std::vector<std::vector<double>> validation;  // inputs the tau was measured on
};

struct MlpFit {
  MlpHead head;
  MlpFitReport report;
};

/// Fits logits to log(E h) over the samples. Throws std::invalid_argument when
/// samples is empty or some sample has a zero entry of E h.
MlpFit fit_mlp_log_head(const OutputMatrix& output, const std::vector<HiddenState<double>>& samples,
                        const MlpFitConfig& config);

/// Sup-norm logit error of the head against log(E h) over the given inputs.
double sup_logit_error(const MlpHead& head, const OutputMatrix& output, const std::vector<std::vector<double>>& inputs);

/// (string_length + 1) * sqrt(dim) * temperature.
double lipschitz_constant(std::size_t string_length, double temperature, std::size_t dim);

std::string mlp_to_json(const MlpFit& fit);
MlpFit parse_mlp(std::string_view text);

}  // namespace pfsarnn
