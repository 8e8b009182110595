#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pfsarnn/matrix.hpp"
#include "pfsarnn/numerics.hpp"

namespace pfsarnn {

/// A string over the alphabet, as symbol indices.
using Word = std::vector<std::size_t>;

class UnknownSymbolError : public std::invalid_argument {
 public:
  explicit UnknownSymbolError(const std::string& symbol)
      : std::invalid_argument("unknown symbol '" + symbol + "'"), symbol_(symbol) {}
  const std::string& symbol() const { return symbol_; }

 private:
  std::string symbol_;
};

struct Transition {
  std::size_t from;
  std::size_t symbol;
  std::size_t to;
  Rational weight;

  friend bool operator==(const Transition&, const Transition&) = default;
};

/// Probabilistic finite-state automaton. Symbols and states are indexed in
/// declaration order; that order is also the coordinate order of every
/// derived vector and matrix. Transitions are stored sparsely, one per
/// (from, symbol, to) triple; a missing triple has weight 0.
class Pfsa {
 public:
  Pfsa(std::vector<std::string> alphabet, std::vector<std::string> states,
       std::vector<Transition> transitions, std::vector<Rational> initial,
       std::vector<Rational> final_weights);

  const std::vector<std::string>& alphabet() const { return alphabet_; }
  const std::vector<std::string>& states() const { return states_; }
  const std::vector<Transition>& transitions() const { return transitions_; }
  const std::vector<Rational>& initial() const { return initial_; }
  const std::vector<Rational>& final_weights() const { return final_; }

  std::size_t num_states() const { return states_.size(); }
  std::size_t num_symbols() const { return alphabet_.size(); }

  std::size_t symbol_index(std::string_view symbol) const;
  std::size_t state_index(std::string_view state) const;

  /// Weight of (from, symbol, to), or 0 when absent.
  Rational weight(std::size_t from, std::size_t symbol, std::size_t to) const;

  /// T^(y)_{q,q'} = w(q, y, q').
  Matrix<Rational> transition_matrix(std::size_t symbol) const;

  /// Splits text into symbols: per character when every symbol is a single
  /// character, otherwise on whitespace. Throws UnknownSymbolError.
  Word parse_word(std::string_view text) const;
  std::string format_word(const Word& word) const;

  friend bool operator==(const Pfsa&, const Pfsa&) = default;

 private:
  std::vector<std::string> alphabet_;
  std::vector<std::string> states_;
  std::vector<Transition> transitions_;  // sorted by (from, symbol, to)
  std::vector<Rational> initial_;
  std::vector<Rational> final_;
};

struct Violation {
  std::string location;  // "initial", a state name, or a transition
  std::string message;
};

/// Empty iff every normalization and nonnegativity constraint holds.
std::vector<Violation> validate(const Pfsa& a);

bool is_deterministic(const Pfsa& a);

struct TrimResult {
  Pfsa automaton;
  std::vector<std::string> warnings;
};

/// Keeps only states on a positive-weight initial-to-final path. Never
/// renormalizes; warns for each surviving state whose mass no longer sums to 1.
TrimResult trim(const Pfsa& a);

template <class S>
struct ForwardVector {
  std::vector<S> entries;  // p(q, prefix) per state
  Word prefix;

  S mass() const {
    S total{0};
    for (const auto& e : entries) total += e;
    return total;
  }
};

/// Entries over Σ followed by EOS as the last coordinate.
template <class S>
struct NextSymbolDistribution {
  std::vector<S> probs;
};

template <class S>
ForwardVector<S> forward(const Pfsa& a, const Word& prefix);

template <class S>
S stringsum(const Pfsa& a, const Word& y);

/// Throws std::domain_error("prefix has probability zero") on a zero-mass prefix.
template <class S>
NextSymbolDistribution<S> conditional(const Pfsa& a, const Word& prefix);

/// Pads to a fully connected automaton and mixes every transition and final
/// weight with delta, renormalizing per state. Initial weights are kept.
Pfsa perturb(const Pfsa& a, const Rational& delta);

/// Total probability of strings of length exactly t.
Rational length_mass(const Pfsa& a, std::size_t t);

/// length_mass for t = 0..max_t.
std::vector<Rational> length_masses(const Pfsa& a, std::size_t max_t);

struct TailCutoff {
  std::size_t length;  // smallest M with 1 - sum_{t<=M} mass < eps
  Rational tail;       // 1 - sum_{t<=M} mass
};

/// std::nullopt when no M <= max_len qualifies (e.g. a non-tight automaton).
std::optional<TailCutoff> tail_cutoff(const Pfsa& a, const Rational& epsilon, std::size_t max_len);

/// Ancestral sample; deterministic in seed. Requires a validated, trim automaton.
Word sample(const Pfsa& a, std::uint64_t seed);

struct RandomPfsaOptions {
  std::size_t max_states = 4;
  std::size_t max_symbols = 3;
  std::uint64_t max_denominator = 10;
};

/// Seeded random trim automaton. Weights are multiples of 1/N for a per-automaton
/// N in [2, max_denominator].
Pfsa random_trim_pfsa(std::uint64_t seed, const RandomPfsaOptions& options = {});

}  // namespace pfsarnn
