#include "oracles.hpp"

#include <functional>

namespace oracle {

RawAutomaton raw(const pfsarnn::Pfsa& a) {
  RawAutomaton out{a.num_states(), a.num_symbols(), {}, a.initial(), a.final_weights()};
  for (const auto& t : a.transitions()) out.edges.push_back({t.from, t.symbol, t.to, t.weight});
  return out;
}

RawAutomaton perturbed(const RawAutomaton& a, const Rational& delta) {
  RawAutomaton out{a.states, a.symbols, {}, a.initial, {}};
  for (std::size_t q = 0; q < a.states; ++q) {
    std::vector<Rational> row;
    Rational total(0);
    for (std::size_t y = 0; y < a.symbols; ++y) {
      for (std::size_t r = 0; r < a.states; ++r) {
        Rational w = delta;
        for (const auto& e : a.edges) {
          if (e.from == q && e.symbol == y && e.to == r) w += e.weight;
        }
        total += w;
        row.push_back(w);
      }
    }
    const Rational f = a.final_weights[q] + delta;
    total += f;
    std::size_t i = 0;
    for (std::size_t y = 0; y < a.symbols; ++y) {
      for (std::size_t r = 0; r < a.states; ++r) out.edges.push_back({q, y, r, row[i++] / total});
    }
    out.final_weights.push_back(f / total);
  }
  return out;
}

Rational path_sum(const RawAutomaton& a, const Word& y) {
  Rational total(0);
  std::function<void(std::size_t, std::size_t, const Rational&)> walk = [&](std::size_t q, std::size_t pos,
                                                                            const Rational& weight) {
    if (weight.is_zero()) return;
    if (pos == y.size()) {
      total += weight * a.final_weights[q];
      return;
    }
    for (const auto& e : a.edges) {
      if (e.from == q && e.symbol == y[pos]) walk(e.to, pos + 1, weight * e.weight);
    }
  };
  for (std::size_t q = 0; q < a.states; ++q) walk(q, 0, a.initial[q]);
  return total;
}

std::vector<Word> words_of_length(std::size_t symbols, std::size_t n) {
  std::vector<Word> out;
  Word w(n, 0);
  while (true) {
    out.push_back(w);
    std::size_t i = n;
    while (i > 0) {
      --i;
      if (++w[i] < symbols) break;
      w[i] = 0;
      if (i == 0) return out;
    }
    if (n == 0) return out;
  }
}

Rational brute_restricted_tvd(const RawAutomaton& a, const RawAutomaton& b, std::size_t max_len) {
  Rational total(0);
  for (std::size_t n = 0; n <= max_len; ++n) {
    for (const auto& w : words_of_length(a.symbols, n)) total += pfsarnn::abs(path_sum(a, w) - path_sum(b, w));
  }
  return total / Rational(2);
}

Rational brute_cumulative_mass(const RawAutomaton& a, std::size_t max_len) {
  Rational total(0);
  for (std::size_t n = 0; n <= max_len; ++n) {
    for (const auto& w : words_of_length(a.symbols, n)) total += path_sum(a, w);
  }
  return total;
}

namespace {

std::uint64_t ceil_log2_by_doubling(const mpz_class& n) {
  std::uint64_t bits = 0;
  mpz_class power = 1;
  while (power < n) {
    power *= 2;
    ++bits;
  }
  return bits;
}

}  // namespace

std::uint64_t psi(const Rational& x) {
  return ceil_log2_by_doubling(x.numerator()) + ceil_log2_by_doubling(x.denominator());
}

}  // namespace oracle
