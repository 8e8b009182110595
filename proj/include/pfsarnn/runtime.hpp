#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pfsarnn/compiler.hpp"
#include "pfsarnn/pfsa.hpp"

namespace pfsarnn {

template <class S>
struct HiddenState {
  std::vector<S> entries;
  std::size_t t = 0;
  Word consumed;

  S l1_norm() const {
    S total{0};
    for (const auto& e : entries) total += e < S{0} ? S{0} - e : e;
    return total;
  }
};

/// The compiled network with its parameters converted to scalar type S.
template <class S>
class ElmanNetwork {
 public:
  explicit ElmanNetwork(const ElmanParams& params);

  const ElmanParams& params() const { return *params_; }

  HiddenState<S> init() const;
  /// h' = ReLU(U h + V onehot(y) + b). A zero state stays zero.
  HiddenState<S> step(const HiddenState<S>& h, std::size_t symbol) const;
  HiddenState<S> run(const Word& y) const;

 private:
  const ElmanParams* params_;
  Matrix<S> U_;
  Matrix<S> V_;
  std::vector<S> b_;
  std::vector<S> eta_;
};

extern template class ElmanNetwork<Rational>;
extern template class ElmanNetwork<double>;

/// Exact-mode convenience wrappers.
HiddenState<Rational> init(const ElmanParams& params);
HiddenState<Rational> step(const ElmanParams& params, const HiddenState<Rational>& h, std::size_t symbol);
HiddenState<Rational> run(const ElmanParams& params, const Word& y);

struct InvarianceFailure {
  Word word;
  std::size_t coordinate;
  Rational expected;
  Rational actual;
};

/// Compares run(params, y) against the forward vector of y placed in the
/// block of y's last symbol (the dummy block for the empty string), with all
/// other coordinates 0. Returns the first mismatch, if any.
std::optional<InvarianceFailure> find_invariance_failure(const Pfsa& a, const ElmanParams& params, const Word& y);
bool check_invariance(const Pfsa& a, const ElmanParams& params, const Word& y);

struct PrecisionTrace {
  std::vector<std::uint64_t> bits;  // bits[t] for h_0..h_|y|
  std::uint64_t bound_constant;
};

/// Largest precision of any entry, including ψ(|x|) for the -1 bias entries.
std::uint64_t bound_constant(const ElmanParams& params);
PrecisionTrace precision_trace(const ElmanParams& params, const Word& y);

}  // namespace pfsarnn
