#pragma once

// Reference computations for tests. These deliberately avoid the library's
// forward/perturb/length-mass code paths.

#include <cstdint>
#include <string>
#include <vector>

#include "pfsarnn/pfsa.hpp"

namespace oracle {

using pfsarnn::Rational;
using pfsarnn::Word;

/// Weighted edge list read straight from a document-like description.
struct Edge {
  std::size_t from, symbol, to;
  Rational weight;
};

struct RawAutomaton {
  std::size_t states = 0;
  std::size_t symbols = 0;
  std::vector<Edge> edges;
  std::vector<Rational> initial;
  std::vector<Rational> final_weights;
};

RawAutomaton raw(const pfsarnn::Pfsa& a);

/// Adds delta to every (state, symbol, state) triple and every final weight,
/// then divides each state's row by its own sum.
RawAutomaton perturbed(const RawAutomaton& a, const Rational& delta);

/// Sum over all accepting state paths of the path weight, by explicit path
/// enumeration.
Rational path_sum(const RawAutomaton& a, const Word& y);

/// All words of length exactly n, odometer order.
std::vector<Word> words_of_length(std::size_t symbols, std::size_t n);

/// 1/2 sum over strings of length <= max_len of |p_a - p_b|, by path sums.
Rational brute_restricted_tvd(const RawAutomaton& a, const RawAutomaton& b, std::size_t max_len);

/// Sum of path sums over every string of length <= max_len.
Rational brute_cumulative_mass(const RawAutomaton& a, std::size_t max_len);

/// ceil(log2 p) + ceil(log2 q) by repeated doubling.
std::uint64_t psi(const Rational& x);

}  // namespace oracle
