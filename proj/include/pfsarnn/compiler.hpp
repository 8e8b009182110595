#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pfsarnn/matrix.hpp"
#include "pfsarnn/numerics.hpp"
#include "pfsarnn/pfsa.hpp"

namespace pfsarnn {

/// Parameters of the ReLU Elman network simulating an automaton.
/// Coordinate of (state i, symbol j) is j * |Q| + i.
struct ElmanParams {
  std::vector<std::string> alphabet;
  std::vector<std::string> states;
  Matrix<Rational> U;          // D x D recurrence
  Matrix<Rational> V;          // D x |Σ| input
  std::vector<Rational> b;     // D
  std::vector<Rational> eta;   // D, initial hidden state

  std::size_t dimension() const { return states.size() * alphabet.size(); }
  std::size_t num_states() const { return states.size(); }
  std::size_t num_symbols() const { return alphabet.size(); }

  std::size_t index_of(std::size_t state, std::size_t symbol) const;
  /// Name-based lookup; throws std::invalid_argument on unknown names.
  std::size_t index_of(std::string_view state, std::string_view symbol) const;
  /// (state, symbol) for a coordinate.
  std::pair<std::size_t, std::size_t> inverse(std::size_t coordinate) const;
  std::size_t symbol_index(std::string_view symbol) const;
  Word parse_word(std::string_view text) const;
  std::string format_word(const Word& word) const;

  friend bool operator==(const ElmanParams&, const ElmanParams&) = default;
};

/// Next-action matrix: row y < |Σ| holds sum_{q'} w(q, y, q') in every column
/// (q, .); the last row holds the final weight rho(q).
struct OutputMatrix {
  Matrix<Rational> E;  // (|Σ| + 1) x D

  friend bool operator==(const OutputMatrix&, const OutputMatrix&) = default;
};

/// The dummy symbol carrying the initial block is alphabet[0].
ElmanParams compile(const Pfsa& a);
OutputMatrix output_matrix(const Pfsa& a);

struct CompiledModel {
  ElmanParams params;
  OutputMatrix output;
};

/// JSON with D, the coordinate ordering, and dense U, V, b, eta, E as "p/q".
std::string params_to_json(const CompiledModel& model);
CompiledModel parse_params(std::string_view text);

}  // namespace pfsarnn
