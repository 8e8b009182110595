#include "pfsarnn/runtime.hpp"

#include <algorithm>

namespace pfsarnn {

template <class S>
ElmanNetwork<S>::ElmanNetwork(const ElmanParams& params)
    : params_(&params),
      U_(params.U.template map<S>(ScalarTraits<S>::from)),
      V_(params.V.template map<S>(ScalarTraits<S>::from)),
      b_(convert_vector<S>(params.b)),
      eta_(convert_vector<S>(params.eta)) {}

template <class S>
HiddenState<S> ElmanNetwork<S>::init() const {
  return {eta_, 0, {}};
}

template <class S>
HiddenState<S> ElmanNetwork<S>::step(const HiddenState<S>& h, std::size_t symbol) const {
  if (symbol >= params_->num_symbols()) throw std::invalid_argument("symbol index out of range");
  auto pre = multiply(U_, std::span<const S>(h.entries));
  for (std::size_t d = 0; d < pre.size(); ++d) pre[d] = ScalarTraits<S>::relu(pre[d] + V_(d, symbol) + b_[d]);
  HiddenState<S> out{std::move(pre), h.t + 1, h.consumed};
  out.consumed.push_back(symbol);
  return out;
}

template <class S>
HiddenState<S> ElmanNetwork<S>::run(const Word& y) const {
  auto h = init();
  for (auto symbol : y) h = step(h, symbol);
  return h;
}

template class ElmanNetwork<Rational>;
template class ElmanNetwork<double>;

HiddenState<Rational> init(const ElmanParams& params) { return ElmanNetwork<Rational>(params).init(); }

HiddenState<Rational> step(const ElmanParams& params, const HiddenState<Rational>& h, std::size_t symbol) {
  return ElmanNetwork<Rational>(params).step(h, symbol);
}

HiddenState<Rational> run(const ElmanParams& params, const Word& y) { return ElmanNetwork<Rational>(params).run(y); }

std::optional<InvarianceFailure> find_invariance_failure(const Pfsa& a, const ElmanParams& params, const Word& y) {
  if (a.num_states() != params.num_states() || a.num_symbols() != params.num_symbols())
    throw std::invalid_argument("automaton and params have different shapes");
  const auto h = run(params, y);
  const auto fv = forward<Rational>(a, y);
  const std::size_t block = y.empty() ? 0 : y.back();
  for (std::size_t d = 0; d < params.dimension(); ++d) {
    const auto [q, sym] = params.inverse(d);
    const Rational expected = sym == block ? fv.entries[q] : Rational(0);
    if (h.entries[d] != expected) return InvarianceFailure{y, d, expected, h.entries[d]};
  }
  return std::nullopt;
}

bool check_invariance(const Pfsa& a, const ElmanParams& params, const Word& y) {
  return !find_invariance_failure(a, params, y).has_value();
}

std::uint64_t bound_constant(const ElmanParams& params) {
  auto max_psi = [](const auto& values) {
    std::uint64_t best = 0;
    for (const auto& x : values) best = std::max(best, precision_of(abs(x)));
    return best;
  };
  // Entries of V r(y) + b: 0 inside the block of y, -1 elsewhere.
  std::uint64_t input_term = 0;
  for (std::size_t y = 0; y < params.num_symbols(); ++y) {
    for (std::size_t d = 0; d < params.dimension(); ++d)
      input_term = std::max(input_term, precision_of(abs(params.V(d, y) + params.b[d])));
  }
  return precision_of(Rational(static_cast<long>(params.dimension()))) + max_psi(params.U.data()) +
         max_psi(params.eta) + input_term;
}

PrecisionTrace precision_trace(const ElmanParams& params, const Word& y) {
  const ElmanNetwork<Rational> net(params);
  PrecisionTrace trace{{}, bound_constant(params)};
  auto h = net.init();
  trace.bits.push_back(vector_precision(h.entries));
  for (auto symbol : y) {
    h = net.step(h, symbol);
    trace.bits.push_back(vector_precision(h.entries));
  }
  return trace;
}

}  // namespace pfsarnn
