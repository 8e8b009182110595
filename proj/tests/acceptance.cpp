// One PASS/FAIL line per acceptance criterion. Exit status is nonzero if any line fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pfsarnn/equivalence.hpp"
#include "pfsarnn/pfsa_io.hpp"

using namespace pfsarnn;

namespace {

// Pinned tolerances and budgets.
constexpr double kExactRuntimeSeconds = 10.0;
constexpr double kFloatAgreement = 1e-9;
constexpr double kSimplexSum = 1e-12;
constexpr double kFloatPropertyTolerance = 1e-12;
constexpr double kOptimalityTolerance = 1e-9;
constexpr double kMlpTau = 1e-3;
constexpr double kMlpRtvd = 1e-2;
constexpr double kMlpRuntimeSeconds = 300.0;
constexpr std::size_t kRandomAutomata = 20;
constexpr std::size_t kInvarianceLength = 5;
constexpr std::size_t kPrecisionLength = 32;
constexpr std::size_t kLongStringsPerAutomaton = 10;
constexpr std::size_t kSparsemaxVectors = 1000;
constexpr std::size_t kSimplexSamples = 10000;

int failures = 0;

void report(bool ok, const std::string& id, const std::string& title, const std::string& detail) {
  std::printf("[%s] %s %s: %s\n", ok ? "PASS" : "FAIL", id.c_str(), title.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

Pfsa fixture(const std::string& name) { return load_pfsa(std::string(FIXTURE_DIR) + "/" + name + ".json"); }

struct Named {
  std::string name;
  Pfsa automaton;
};

std::vector<Named> fixtures() {
  return {{"fig2a_top", fixture("fig2a_top")}, {"fig2a_bottom", fixture("fig2a_bottom")}, {"fig2b", fixture("fig2b")}};
}

std::vector<Named> automaton_set() {
  auto out = fixtures();
  for (std::uint64_t seed = 1; seed <= kRandomAutomata; ++seed)
    out.push_back({"random#" + std::to_string(seed), random_trim_pfsa(seed)});
  return out;
}

bool all_rows_zero(const EquivalenceReport& r) {
  return std::all_of(r.rows.begin(), r.rows.end(), [](const ReportRow& row) {
    return std::holds_alternative<Rational>(row.diff) && std::get<Rational>(row.diff).is_zero();
  });
}

// a <= b, exactly when both are rational.
bool number_le(const Number& a, const Number& b) {
  if (std::holds_alternative<Rational>(a) && std::holds_alternative<Rational>(b))
    return !(std::get<Rational>(b) < std::get<Rational>(a));
  return to_double(a) <= to_double(b);
}

void criterion_exact(const std::string& id, HeadKind head) {
  bool ok = true;
  std::ostringstream detail;
  for (const auto& [name, a] : fixtures()) {
    const auto start = std::chrono::steady_clock::now();
    const auto r = verify_exact(a, ExactOptions{head, 8, ScalarMode::exact, Rational(1)});
    const double elapsed = seconds_since(start);
    const bool zero = r.pass && all_rows_zero(r) && std::get<Rational>(r.restricted_tvd).is_zero();
    bool this_ok = zero;
    detail << name << " " << r.rows.size() << " strings " << (zero ? "all diffs 0" : "NONZERO DIFF");
    if (head == HeadKind::sparsemax) {
      this_ok = this_ok && elapsed < kExactRuntimeSeconds;
      detail << " in " << fmt(elapsed) << "s";
    }
    if (head == HeadKind::softmax) {
      const auto f = verify_exact(a, ExactOptions{head, 8, ScalarMode::float64, Rational(1)});
      const double max_diff = to_double(f.max_diff);
      this_ok = this_ok && f.pass && max_diff <= kFloatAgreement;
      detail << ", float max diff " << fmt(max_diff);
    }
    detail << "; ";
    ok = ok && this_ok;
  }
  report(ok, id,
         head == HeadKind::sparsemax ? "exact simulation, sparsemax head, M=8"
                                     : "exact simulation, softmax-log head, exact and float, M=8",
         detail.str());
}

void criterion_closed_form() {
  const auto b = fixture("fig2b");
  bool ok = true;
  std::size_t n_checked = 0;
  for (std::size_t n = 0; n <= 12; ++n) {
    Word y{b.symbol_index("a")};
    y.insert(y.end(), n, b.symbol_index("b"));
    Rational expected = Rational(1, 25) * pow(Rational(9, 10), n) + Rational(27, 50) * pow(Rational(1, 10), n);
    const Rational got = stringsum<Rational>(b, y);
    if (!(got == expected)) ok = false;
    ++n_checked;
  }
  report(ok, "C3", "closed form for a b^n on fig2b",
         std::to_string(n_checked) + " values of n, exact rational equality");
}

void criterion_nondeterministic() {
  const auto b = fixture("fig2b");
  const bool det = is_deterministic(b);
  const auto sm = verify_exact(b, ExactOptions{HeadKind::sparsemax, 8, ScalarMode::exact, Rational(1)});
  const auto so = verify_exact(b, ExactOptions{HeadKind::softmax, 8, ScalarMode::exact, Rational(1)});
  report(!det && sm.pass && so.pass, "C4", "non-deterministic automaton is simulated",
         std::string("is_deterministic=") + (det ? "true" : "false") + ", sparsemax " + (sm.pass ? "PASS" : "FAIL") +
             ", softmax " + (so.pass ? "PASS" : "FAIL"));
}

// Picks an active (state, last-symbol block) coordinate that some short string
// reaches with positive value and whose state has a positive transition, then
// corrupts the recurrence entry feeding that transition's target.
std::optional<std::pair<std::size_t, std::size_t>> mutation_site(const Pfsa& a, const ElmanParams& p) {
  for (const auto& y : enumerate(a.alphabet(), kInvarianceLength - 1).words) {
    const auto h = run(p, y);
    for (std::size_t d = 0; d < p.dimension(); ++d) {
      if (h.entries[d].is_zero()) continue;
      const auto [q, block] = p.inverse(d);
      for (const auto& t : a.transitions()) {
        if (t.from == q && !t.weight.is_zero()) return std::make_pair(p.index_of(t.to, t.symbol), d);
      }
    }
  }
  return std::nullopt;
}

void criterion_invariance() {
  std::size_t strings = 0, violations = 0, detected = 0, automata = 0;
  std::string example;
  for (const auto& [name, a] : automaton_set()) {
    ++automata;
    const auto p = compile(a);
    const auto words = enumerate(a.alphabet(), kInvarianceLength).words;
    for (const auto& y : words) {
      ++strings;
      if (!check_invariance(a, p, y)) ++violations;
    }
    auto mutated = p;
    const auto site = mutation_site(a, p);
    if (!site) continue;
    mutated.U(site->first, site->second) += Rational(1, 7);
    for (const auto& y : words) {
      if (auto failure = find_invariance_failure(a, mutated, y)) {
        ++detected;
        if (example.empty())
          example = name + " on \"" + a.format_word(failure->word) + "\" coordinate " +
                    std::to_string(failure->coordinate) + " expected " + failure->expected.str() + " got " +
                    failure->actual.str();
        break;
      }
    }
  }
  report(violations == 0 && detected == automata, "C5", "construction invariance and mutation detection",
         std::to_string(automata) + " automata, " + std::to_string(strings) + " strings, " +
             std::to_string(violations) + " violations; mutations detected " + std::to_string(detected) + "/" +
             std::to_string(automata) + " (first: " + example + ")");
}

void criterion_precision() {
  std::size_t steps = 0, violations = 0, automata = 0;
  std::uint64_t worst_bits = 0;
  for (const auto& [name, a] : automaton_set()) {
    const auto p = compile(a);
    std::vector<Word> words = enumerate(a.alphabet(), kInvarianceLength).words;
    std::mt19937_64 rng(1000 + automata++);
    std::uniform_int_distribution<std::size_t> pick(0, a.num_symbols() - 1);
    for (std::size_t k = 0; k < kLongStringsPerAutomaton; ++k) {
      Word y(kPrecisionLength);
      for (auto& s : y) s = pick(rng);
      words.push_back(std::move(y));
    }
    // A sampled string keeps the trace on positive-mass states.
    for (std::uint64_t s = 0; s < kLongStringsPerAutomaton; ++s) {
      Word y = sample(a, s);
      if (y.size() > kPrecisionLength) y.resize(kPrecisionLength);
      words.push_back(std::move(y));
    }
    for (const auto& y : words) {
      const auto trace = precision_trace(p, y);
      for (std::size_t t = 0; t < trace.bits.size(); ++t) {
        ++steps;
        worst_bits = std::max(worst_bits, trace.bits[t]);
        if (trace.bits[t] > trace.bound_constant * (t + 1)) ++violations;
      }
    }
  }
  report(violations == 0, "C6", "linear precision bound",
         std::to_string(automata) + " automata, " + std::to_string(steps) + " steps checked, " +
             std::to_string(violations) + " violations, max bits " + std::to_string(worst_bits));
}

void criterion_perturbation() {
  const auto b = fixture("fig2b");
  const std::vector<Rational> deltas{Rational(1, 100), Rational(1, 1000), Rational(1, 10000)};
  const auto base = pfsa_table<Rational>(b, 8);
  std::vector<Rational> distances;
  for (const auto& delta : deltas) {
    const auto table = pfsa_table<Rational>(perturb(b, delta), 8);
    distances.push_back(restricted_tvd(base.probs, table.probs));
  }
  bool decreasing = distances[1] < distances[0] && distances[2] < distances[1];
  const auto raw = oracle::raw(b);
  const Rational brute = oracle::brute_restricted_tvd(raw, oracle::perturbed(raw, deltas[2]), 8);
  const bool matches = brute == distances[2];

  bool all_validate = true;
  std::size_t perturbed = 0;
  for (const auto& [name, a] : automaton_set()) {
    for (const auto& delta : deltas) {
      ++perturbed;
      if (!validate(perturb(a, delta)).empty()) all_validate = false;
    }
  }
  report(decreasing && matches && all_validate, "C7", "perturbation continuity",
         "rTVD " + fmt(distances[0].to_double()) + " > " + fmt(distances[1].to_double()) + " > " +
             fmt(distances[2].to_double()) + (decreasing ? "" : " NOT DECREASING") + "; oracle " +
             (matches ? "equal" : "DIFFERENT") + " at 1/10000; " + std::to_string(perturbed) +
             " perturbed automata " + (all_validate ? "all validate" : "SOME DO NOT VALIDATE"));
}

std::vector<EquivalenceReport> approx_runs;

void criterion_mlp() {
  const auto b = fixture("fig2b");
  ApproxOptions options;
  options.head = HeadKind::mlp;
  options.delta = Rational(1, 1000);
  options.epsilon = Rational(1, 100);
  options.max_len = 6;
  options.fit.hidden = 64;
  options.fit.seed = 0;
  const auto start = std::chrono::steady_clock::now();
  const auto r = verify_approx(b, options);
  const double elapsed = seconds_since(start);
  approx_runs.push_back(r);
  const double tau = r.fit->tau_achieved;
  const double rtvd = to_double(*r.rtvd_adelta_r);
  const bool ok = tau <= kMlpTau && rtvd <= kMlpRtvd && elapsed < kMlpRuntimeSeconds;
  report(ok, "C8", "MLP log head on perturbed fig2b, H=64",
         "tau_achieved " + fmt(tau) + (tau <= kMlpTau ? " <= " : " > ") + fmt(kMlpTau) + ", rTVD(A_delta, MLP) " +
             fmt(rtvd) + (rtvd <= kMlpRtvd ? " <= " : " > ") + fmt(kMlpRtvd) + ", rTVD(A, MLP) " +
             fmt(to_double(r.restricted_tvd)) + ", " + fmt(elapsed) + "s");
}

template <class S>
std::vector<S> shifted(const std::vector<S>& x, const S& c) {
  auto out = x;
  for (auto& v : out) v += c;
  return out;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

void criterion_sparsemax() {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::size_t> dim_dist(1, 8);
  std::uniform_real_distribution<double> value(-3.0, 3.0);
  std::uniform_int_distribution<long> numerator(-20, 20), weight(0, 9);
  std::exponential_distribution<double> expo(1.0);
  std::bernoulli_distribution keep(0.6);

  std::size_t simplex_bad = 0, identity_bad = 0, idempotent_bad = 0, shift_bad = 0, optimal_bad = 0;
  double worst_sum = 0, worst_gap = 0;
  for (std::size_t i = 0; i < kSparsemaxVectors; ++i) {
    const std::size_t n = dim_dist(rng);
    std::vector<double> x(n);
    for (auto& v : x) v = value(rng);
    const auto p = sparsemax<double>(x);
    double sum = 0;
    bool nonneg = true;
    for (double v : p) {
      sum += v;
      nonneg = nonneg && v >= 0.0;
    }
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    if (!nonneg || std::abs(sum - 1.0) > kSimplexSum) ++simplex_bad;
    if (max_abs_diff(sparsemax<double>(p), p) > kFloatPropertyTolerance) ++idempotent_bad;
    if (max_abs_diff(sparsemax<double>(shifted(x, value(rng))), p) > kFloatPropertyTolerance) ++shift_bad;

    // Exact versions on rational inputs.
    std::vector<Rational> xr(n);
    for (auto& v : xr) v = Rational(numerator(rng), 7);
    const auto pr = sparsemax<Rational>(xr);
    if (!(sparsemax<Rational>(pr) == pr)) ++idempotent_bad;
    if (!(sparsemax<Rational>(shifted(xr, Rational(numerator(rng), 3))) == pr)) ++shift_bad;
    std::vector<long> w(n);
    long total = 0;
    for (auto& k : w) total += (k = weight(rng));
    if (total == 0) w[0] = total = 1;
    std::vector<Rational> on_simplex(n);
    for (std::size_t j = 0; j < n; ++j) on_simplex[j] = Rational(w[j], total);
    if (!(sparsemax<Rational>(on_simplex) == on_simplex)) ++identity_bad;

    // No simplex point is closer to x than the projection.
    const double best = sq_dist(x, p);
    for (std::size_t s = 0; s < kSimplexSamples; ++s) {
      std::vector<double> q(n);
      double z = 0;
      for (auto& v : q) {
        v = keep(rng) ? expo(rng) : 0.0;
        z += v;
      }
      if (z == 0) {
        q[s % n] = 1.0;
        z = 1.0;
      }
      for (auto& v : q) v /= z;
      const double gap = best - sq_dist(x, q);
      worst_gap = std::max(worst_gap, gap);
      if (gap > kOptimalityTolerance) {
        ++optimal_bad;
        break;
      }
    }
  }
  const bool ok = simplex_bad + identity_bad + idempotent_bad + shift_bad + optimal_bad == 0;
  report(ok, "C9", "sparsemax properties",
         std::to_string(kSparsemaxVectors) + " vectors; failures: simplex " + std::to_string(simplex_bad) +
             ", identity " + std::to_string(identity_bad) + ", idempotence " + std::to_string(idempotent_bad) +
             ", shift " + std::to_string(shift_bad) + ", optimality " + std::to_string(optimal_bad) +
             "; worst |sum-1| " + fmt(worst_sum) + ", worst optimality gap " + fmt(worst_gap));
}

// Mass of every state path reading y from an initial state, final weights excluded.
Rational prefix_weight(const oracle::RawAutomaton& a, const Word& y) {
  std::function<Rational(std::size_t, std::size_t)> go = [&](std::size_t q, std::size_t i) -> Rational {
    if (i == y.size()) return Rational(1);
    Rational total(0);
    for (const auto& e : a.edges) {
      if (e.from == q && e.symbol == y[i] && !e.weight.is_zero()) total += e.weight * go(e.to, i + 1);
    }
    return total;
  };
  Rational total(0);
  for (std::size_t q = 0; q < a.states; ++q) {
    if (!a.initial[q].is_zero()) total += a.initial[q] * go(q, 0);
  }
  return total;
}

// String enumeration that skips extensions of zero-weight prefixes.
Rational pruned_cumulative_mass(const oracle::RawAutomaton& a, std::size_t max_len) {
  Rational total(0);
  std::function<void(Word&)> visit = [&](Word& y) {
    total += oracle::path_sum(a, y);
    if (y.size() == max_len) return;
    for (std::size_t s = 0; s < a.symbols; ++s) {
      y.push_back(s);
      if (!prefix_weight(a, y).is_zero()) visit(y);
      y.pop_back();
    }
  };
  Word y;
  visit(y);
  return total;
}

void criterion_tail() {
  const auto b = fixture("fig2b");
  const Rational epsilon(1, 1000);
  const auto cut = tail_cutoff(b, epsilon, 200);
  const auto raw = oracle::raw(b);
  bool ok = cut.has_value();
  std::string detail;
  if (cut) {
    const Rational mass = pruned_cumulative_mass(raw, cut->length);
    const Rational before = pruned_cumulative_mass(raw, cut->length - 1);
    const bool confirmed = mass == Rational(1) - cut->tail && cut->tail < epsilon;
    const bool minimal = !(Rational(1) - before < epsilon);
    bool prefix_match = true;
    const auto masses = length_masses(b, 10);
    Rational running(0);
    for (std::size_t m = 0; m <= 10; ++m) {
      running += masses[m];
      if (!(running == oracle::brute_cumulative_mass(raw, m))) prefix_match = false;
    }
    ok = confirmed && minimal && prefix_match;
    detail = "M=" + std::to_string(cut->length) + ", tail " + fmt(cut->tail.to_double()) + ", oracle mass " +
             (confirmed ? "equal" : "DIFFERENT") + (minimal ? ", minimal" : ", NOT MINIMAL") +
             ", cumulative masses M<=10 " + (prefix_match ? "equal" : "DIFFERENT");
  } else {
    detail = "no cutoff found";
  }
  const auto nontight = tail_cutoff(fixture("nontight"), epsilon, 200);
  ok = ok && !nontight.has_value();
  detail += std::string("; non-tight fixture ") + (nontight ? "RETURNED A CUTOFF" : "returns failure");
  report(ok, "C10", "tail cutoff", detail);
}

void criterion_bound() {
  const auto b = fixture("fig2b");
  for (const auto& delta : {Rational(1, 100), Rational(1, 1000), Rational(1, 10000)}) {
    ApproxOptions options;
    options.head = HeadKind::softmax;
    options.delta = delta;
    options.max_len = 8;
    approx_runs.push_back(verify_approx(b, options));
  }
  bool ok = !approx_runs.empty();
  std::ostringstream detail;
  for (const auto& r : approx_runs) {
    const bool sound = number_le(*r.rtvd_next, r.tvd_bound);
    ok = ok && sound;
    detail << to_string(r.head) << " delta=" << r.delta->str() << " M=" << r.max_len << ": bound "
           << fmt(to_double(r.tvd_bound)) << (sound ? " >= " : " < ") << fmt(to_double(*r.rtvd_next)) << "; ";
  }
  report(ok, "C11", "three-term TVD bound soundness", detail.str());
}

}  // namespace

int main() {
  criterion_exact("C1", HeadKind::sparsemax);
  criterion_exact("C2", HeadKind::softmax);
  criterion_closed_form();
  criterion_nondeterministic();
  criterion_invariance();
  criterion_precision();
  criterion_perturbation();
  criterion_mlp();
  criterion_sparsemax();
  criterion_tail();
  criterion_bound();
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
