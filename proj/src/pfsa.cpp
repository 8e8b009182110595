#include "pfsarnn/pfsa.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

namespace pfsarnn {

namespace {

auto key(const Transition& t) { return std::tie(t.from, t.symbol, t.to); }

}  // namespace

Pfsa::Pfsa(std::vector<std::string> alphabet, std::vector<std::string> states,
           std::vector<Transition> transitions, std::vector<Rational> initial,
           std::vector<Rational> final_weights)
    : alphabet_(std::move(alphabet)),
      states_(std::move(states)),
      transitions_(std::move(transitions)),
      initial_(std::move(initial)),
      final_(std::move(final_weights)) {
  if (alphabet_.empty()) throw std::invalid_argument("alphabet is empty");
  if (states_.empty()) throw std::invalid_argument("automaton has no states");
  if (std::set<std::string>(alphabet_.begin(), alphabet_.end()).size() != alphabet_.size())
    throw std::invalid_argument("duplicate symbol in alphabet");
  if (std::set<std::string>(states_.begin(), states_.end()).size() != states_.size())
    throw std::invalid_argument("duplicate state name");
  for (const auto& s : alphabet_) {
    if (s.empty()) throw std::invalid_argument("empty symbol name");
  }
  if (initial_.size() != states_.size() || final_.size() != states_.size())
    throw std::invalid_argument("initial/final vectors must have one entry per state");
  for (const auto& t : transitions_) {
    if (t.from >= states_.size() || t.to >= states_.size() || t.symbol >= alphabet_.size())
      throw std::invalid_argument("transition index out of range");
  }
  std::sort(transitions_.begin(), transitions_.end(),
            [](const Transition& x, const Transition& y) { return key(x) < key(y); });
  for (std::size_t i = 1; i < transitions_.size(); ++i) {
    if (key(transitions_[i - 1]) == key(transitions_[i])) {
      const auto& t = transitions_[i];
      throw std::invalid_argument("duplicate transition " + states_[t.from] + " -" + alphabet_[t.symbol] +
                                  "-> " + states_[t.to]);
    }
  }
}

std::size_t Pfsa::symbol_index(std::string_view symbol) const {
  const auto it = std::find(alphabet_.begin(), alphabet_.end(), symbol);
  if (it == alphabet_.end()) throw UnknownSymbolError(std::string(symbol));
  return static_cast<std::size_t>(it - alphabet_.begin());
}

std::size_t Pfsa::state_index(std::string_view state) const {
  const auto it = std::find(states_.begin(), states_.end(), state);
  if (it == states_.end()) throw std::invalid_argument("unknown state '" + std::string(state) + "'");
  return static_cast<std::size_t>(it - states_.begin());
}

Rational Pfsa::weight(std::size_t from, std::size_t symbol, std::size_t to) const {
  const Transition probe{from, symbol, to, Rational(0)};
  const auto it = std::lower_bound(transitions_.begin(), transitions_.end(), probe,
                                   [](const Transition& x, const Transition& y) { return key(x) < key(y); });
  if (it != transitions_.end() && key(*it) == key(probe)) return it->weight;
  return Rational(0);
}

Matrix<Rational> Pfsa::transition_matrix(std::size_t symbol) const {
  Matrix<Rational> t(num_states(), num_states());
  for (const auto& tr : transitions_) {
    if (tr.symbol == symbol) t(tr.from, tr.to) = tr.weight;
  }
  return t;
}

Word Pfsa::parse_word(std::string_view text) const {
  const bool single_char =
      std::all_of(alphabet_.begin(), alphabet_.end(), [](const std::string& s) { return s.size() == 1; });
  Word word;
  if (single_char) {
    for (char c : text) {
      if (std::isspace(static_cast<unsigned char>(c))) continue;
      word.push_back(symbol_index(std::string_view(&c, 1)));
    }
    return word;
  }
  std::istringstream in{std::string(text)};
  std::string token;
  while (in >> token) word.push_back(symbol_index(token));
  return word;
}

std::string Pfsa::format_word(const Word& word) const {
  const bool single_char =
      std::all_of(alphabet_.begin(), alphabet_.end(), [](const std::string& s) { return s.size() == 1; });
  std::string out;
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (!single_char && i > 0) out += ' ';
    out += alphabet_.at(word[i]);
  }
  return out;
}

std::vector<Violation> validate(const Pfsa& a) {
  std::vector<Violation> out;
  Rational initial_sum(0);
  for (std::size_t q = 0; q < a.num_states(); ++q) {
    if (a.initial()[q].sign() < 0)
      out.push_back({a.states()[q], "negative initial weight " + a.initial()[q].str()});
    if (a.final_weights()[q].sign() < 0)
      out.push_back({a.states()[q], "negative final weight " + a.final_weights()[q].str()});
    initial_sum += a.initial()[q];
  }
  if (initial_sum != Rational(1)) out.push_back({"initial", "initial weights sum to " + initial_sum.str()});

  std::vector<Rational> row_sum(a.final_weights());
  for (const auto& t : a.transitions()) {
    if (t.weight.sign() < 0) {
      out.push_back({a.states()[t.from] + " -" + a.alphabet()[t.symbol] + "-> " + a.states()[t.to],
                     "negative transition weight " + t.weight.str()});
    }
    row_sum[t.from] += t.weight;
  }
  for (std::size_t q = 0; q < a.num_states(); ++q) {
    if (row_sum[q] != Rational(1)) {
      out.push_back({a.states()[q], "state " + a.states()[q] +
                                        ": outgoing weights plus final weight sum to " + row_sum[q].str()});
    }
  }
  return out;
}

bool is_deterministic(const Pfsa& a) {
  const auto initial_states =
      std::count_if(a.initial().begin(), a.initial().end(), [](const Rational& w) { return w.sign() > 0; });
  if (initial_states != 1) return false;
  std::map<std::pair<std::size_t, std::size_t>, int> successors;
  for (const auto& t : a.transitions()) {
    if (t.weight.sign() > 0 && ++successors[{t.from, t.symbol}] > 1) return false;
  }
  return true;
}

namespace {

std::vector<bool> reachable(std::size_t n, const std::vector<std::vector<std::size_t>>& edges,
                            const std::vector<bool>& seeds) {
  std::vector<bool> seen = seeds;
  std::vector<std::size_t> stack;
  for (std::size_t q = 0; q < n; ++q) {
    if (seen[q]) stack.push_back(q);
  }
  while (!stack.empty()) {
    const auto q = stack.back();
    stack.pop_back();
    for (auto r : edges[q]) {
      if (!seen[r]) {
        seen[r] = true;
        stack.push_back(r);
      }
    }
  }
  return seen;
}

}  // namespace

TrimResult trim(const Pfsa& a) {
  const auto n = a.num_states();
  std::vector<std::vector<std::size_t>> fwd(n), bwd(n);
  for (const auto& t : a.transitions()) {
    if (t.weight.sign() > 0) {
      fwd[t.from].push_back(t.to);
      bwd[t.to].push_back(t.from);
    }
  }
  std::vector<bool> init(n), fin(n);
  for (std::size_t q = 0; q < n; ++q) {
    init[q] = a.initial()[q].sign() > 0;
    fin[q] = a.final_weights()[q].sign() > 0;
  }
  const auto accessible = reachable(n, fwd, init);
  const auto coaccessible = reachable(n, bwd, fin);

  std::vector<std::size_t> remap(n, n);
  std::vector<std::string> states;
  std::vector<Rational> initial, final_weights;
  for (std::size_t q = 0; q < n; ++q) {
    if (accessible[q] && coaccessible[q]) {
      remap[q] = states.size();
      states.push_back(a.states()[q]);
      initial.push_back(a.initial()[q]);
      final_weights.push_back(a.final_weights()[q]);
    }
  }
  if (states.empty()) throw std::invalid_argument("trim removes every state: the automaton accepts nothing");

  std::vector<Transition> transitions;
  std::vector<Rational> row_sum = final_weights;
  for (const auto& t : a.transitions()) {
    if (remap[t.from] == n || remap[t.to] == n) continue;
    transitions.push_back({remap[t.from], t.symbol, remap[t.to], t.weight});
    row_sum[remap[t.from]] += t.weight;
  }
  std::vector<std::string> warnings;
  for (std::size_t q = 0; q < states.size(); ++q) {
    if (row_sum[q] != Rational(1)) {
      warnings.push_back("state " + states[q] + " keeps mass " + row_sum[q].str() +
                         " after trimming (input was not tight)");
    }
  }
  return {Pfsa(a.alphabet(), std::move(states), std::move(transitions), std::move(initial),
               std::move(final_weights)),
          std::move(warnings)};
}

template <class S>
ForwardVector<S> forward(const Pfsa& a, const Word& prefix) {
  using T = ScalarTraits<S>;
  ForwardVector<S> fv{convert_vector<S>(a.initial()), {}};
  for (auto y : prefix) {
    if (y >= a.num_symbols()) throw std::invalid_argument("symbol index out of range");
    std::vector<S> next(a.num_states(), S{0});
    for (const auto& t : a.transitions()) {
      if (t.symbol != y || T::is_zero(fv.entries[t.from])) continue;
      next[t.to] += fv.entries[t.from] * T::from(t.weight);
    }
    fv.entries = std::move(next);
    fv.prefix.push_back(y);
  }
  return fv;
}

template <class S>
S stringsum(const Pfsa& a, const Word& y) {
  const auto fv = forward<S>(a, y);
  S total{0};
  for (std::size_t q = 0; q < a.num_states(); ++q) total += fv.entries[q] * ScalarTraits<S>::from(a.final_weights()[q]);
  return total;
}

template <class S>
NextSymbolDistribution<S> conditional(const Pfsa& a, const Word& prefix) {
  using T = ScalarTraits<S>;
  const auto fv = forward<S>(a, prefix);
  const S mass = fv.mass();
  if (T::is_zero(mass)) throw std::domain_error("prefix has probability zero");
  NextSymbolDistribution<S> out{std::vector<S>(a.num_symbols() + 1, S{0})};
  for (const auto& t : a.transitions()) out.probs[t.symbol] += fv.entries[t.from] * T::from(t.weight);
  for (std::size_t q = 0; q < a.num_states(); ++q)
    out.probs.back() += fv.entries[q] * T::from(a.final_weights()[q]);
  for (auto& p : out.probs) p /= mass;
  return out;
}

template ForwardVector<Rational> forward<Rational>(const Pfsa&, const Word&);
template ForwardVector<double> forward<double>(const Pfsa&, const Word&);
template Rational stringsum<Rational>(const Pfsa&, const Word&);
template double stringsum<double>(const Pfsa&, const Word&);
template NextSymbolDistribution<Rational> conditional<Rational>(const Pfsa&, const Word&);
template NextSymbolDistribution<double> conditional<double>(const Pfsa&, const Word&);

Pfsa perturb(const Pfsa& a, const Rational& delta) {
  if (delta.sign() < 0) throw std::invalid_argument("perturbation delta must be nonnegative");
  const auto n = a.num_states();
  const auto k = a.num_symbols();
  const Rational norm = Rational(1) + Rational(static_cast<long>(k * n + 1)) * delta;
  std::vector<Transition> transitions;
  transitions.reserve(n * k * n);
  for (std::size_t q = 0; q < n; ++q) {
    for (std::size_t y = 0; y < k; ++y) {
      for (std::size_t r = 0; r < n; ++r) {
        Rational w = (a.weight(q, y, r) + delta) / norm;
        if (!w.is_zero()) transitions.push_back({q, y, r, std::move(w)});
      }
    }
  }
  std::vector<Rational> final_weights;
  final_weights.reserve(n);
  for (const auto& rho : a.final_weights()) final_weights.push_back((rho + delta) / norm);
  return Pfsa(a.alphabet(), a.states(), std::move(transitions), a.initial(), std::move(final_weights));
}

std::vector<Rational> length_masses(const Pfsa& a, std::size_t max_t) {
  const auto n = a.num_states();
  Matrix<Rational> total(n, n);
  for (const auto& t : a.transitions()) total(t.from, t.to) += t.weight;
  std::vector<Rational> v = a.initial();
  std::vector<Rational> out;
  out.reserve(max_t + 1);
  for (std::size_t t = 0;; ++t) {
    Rational m(0);
    for (std::size_t q = 0; q < n; ++q) m += v[q] * a.final_weights()[q];
    out.push_back(std::move(m));
    if (t == max_t) break;
    std::vector<Rational> next(n, Rational(0));
    for (std::size_t q = 0; q < n; ++q) {
      if (v[q].is_zero()) continue;
      for (std::size_t r = 0; r < n; ++r) {
        if (!total(q, r).is_zero()) next[r] += v[q] * total(q, r);
      }
    }
    v = std::move(next);
  }
  return out;
}

Rational length_mass(const Pfsa& a, std::size_t t) { return length_masses(a, t).back(); }

std::optional<TailCutoff> tail_cutoff(const Pfsa& a, const Rational& epsilon, std::size_t max_len) {
  if (epsilon.sign() <= 0) throw std::invalid_argument("tail_cutoff epsilon must be positive");
  const auto masses = length_masses(a, max_len);
  Rational tail(1);
  for (std::size_t m = 0; m <= max_len; ++m) {
    tail -= masses[m];
    if (tail < epsilon) return TailCutoff{m, tail};
  }
  return std::nullopt;
}

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <class Weights>
std::size_t draw(std::mt19937_64& rng, const Weights& weights) {
  const double u = uniform01(rng);
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double w = weights[i].to_double();
    if (w <= 0.0) continue;
    last_positive = i;
    acc += w;
    if (u < acc) return i;
  }
  return last_positive;
}

}  // namespace

Word sample(const Pfsa& a, std::uint64_t seed) {
  constexpr std::size_t kMaxSteps = 1'000'000;
  std::mt19937_64 rng(seed);
  std::vector<std::vector<const Transition*>> outgoing(a.num_states());
  for (const auto& t : a.transitions()) {
    if (t.weight.sign() > 0) outgoing[t.from].push_back(&t);
  }
  std::size_t q = draw(rng, a.initial());
  Word out;
  for (std::size_t step = 0; step < kMaxSteps; ++step) {
    std::vector<Rational> choices;
    for (const auto* t : outgoing[q]) choices.push_back(t->weight);
    choices.push_back(a.final_weights()[q]);
    const auto pick = draw(rng, choices);
    if (pick == outgoing[q].size()) return out;
    out.push_back(outgoing[q][pick]->symbol);
    q = outgoing[q][pick]->to;
  }
  throw std::runtime_error("sampling did not terminate; is the automaton tight?");
}

namespace {

// Splits `total` units over `slots` with every slot receiving at least one.
std::vector<long> composition(std::mt19937_64& rng, std::size_t slots, long total) {
  std::vector<long> parts(slots, 1);
  for (long rest = total - static_cast<long>(slots); rest > 0; --rest) parts[rng() % slots] += 1;
  return parts;
}

}  // namespace

Pfsa random_trim_pfsa(std::uint64_t seed, const RandomPfsaOptions& options) {
  std::mt19937_64 rng(seed);
  const std::size_t n = 1 + rng() % options.max_states;
  const std::size_t k = 1 + rng() % options.max_symbols;
  const long denom = 2 + static_cast<long>(rng() % (std::max<std::uint64_t>(options.max_denominator, 2) - 1));

  std::vector<std::string> alphabet, states;
  for (std::size_t y = 0; y < k; ++y) alphabet.emplace_back(1, static_cast<char>('a' + y));
  for (std::size_t q = 0; q < n; ++q) states.push_back("q" + std::to_string(q));

  std::vector<Transition> transitions;
  std::vector<Rational> final_weights(n, Rational(0));
  const std::size_t final_slot = k * n;
  for (std::size_t q = 0; q < n; ++q) {
    // A chain q -> q+1 keeps every state accessible; the last state always
    // halts and also gets an arc, so no automaton is transition-free.
    std::vector<std::size_t> forced;
    if (q + 1 < n) {
      forced.push_back((rng() % k) * n + (q + 1));
    } else {
      forced.push_back((rng() % k) * n + rng() % n);
      forced.push_back(final_slot);
    }
    std::vector<std::size_t> optional_slots;
    for (std::size_t s = 0; s <= final_slot; ++s) {
      if (std::find(forced.begin(), forced.end(), s) == forced.end() && rng() % 100 < 30)
        optional_slots.push_back(s);
    }
    std::shuffle(optional_slots.begin(), optional_slots.end(), rng);
    const auto room = static_cast<std::size_t>(denom) - forced.size();
    if (optional_slots.size() > room) optional_slots.resize(room);
    std::vector<std::size_t> support = forced;
    support.insert(support.end(), optional_slots.begin(), optional_slots.end());
    std::sort(support.begin(), support.end());
    const auto parts = composition(rng, support.size(), denom);
    for (std::size_t i = 0; i < support.size(); ++i) {
      const Rational w(parts[i], denom);
      if (support[i] == final_slot) {
        final_weights[q] = w;
      } else {
        transitions.push_back({q, support[i] / n, support[i] % n, w});
      }
    }
  }
  std::vector<Rational> initial(n, Rational(0));
  if (n == 1 || rng() % 2 == 0) {
    initial[0] = Rational(1);
  } else {
    const std::size_t extra = 1 + rng() % (n - 1);
    const long units = std::max<long>(denom, 2);
    const auto parts = composition(rng, 2, units);
    initial[0] = Rational(parts[0], units);
    initial[extra] = Rational(parts[1], units);
  }
  Pfsa a(std::move(alphabet), std::move(states), std::move(transitions), std::move(initial),
         std::move(final_weights));
  auto trimmed = trim(a);
  if (!trimmed.warnings.empty() || trimmed.automaton.num_states() != a.num_states())
    throw std::logic_error("random automaton is not trim");
  return a;
}

}  // namespace pfsarnn
