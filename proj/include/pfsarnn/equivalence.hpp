#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pfsarnn/compiler.hpp"
#include "pfsarnn/heads.hpp"
#include "pfsarnn/numerics.hpp"
#include "pfsarnn/pfsa.hpp"
#include "pfsarnn/runtime.hpp"

namespace pfsarnn {

/// Raised when an enumeration would exceed the size guard.
class EnumerationTooLarge : public std::length_error {
 public:
  EnumerationTooLarge() : std::length_error("enumeration too large") {}
};

/// |Σ|^M above this is refused.
inline constexpr double kEnumerationLimit = 1e7;

/// All strings of length <= max_len in length-lexicographic order.
struct StringSet {
  std::vector<std::string> alphabet;
  std::size_t max_len = 0;
  std::vector<Word> words;
};

StringSet enumerate(const std::vector<std::string>& alphabet, std::size_t max_len);

template <class S>
using ConditionalFn = std::function<std::vector<S>(const HiddenState<S>&)>;

/// p(EOS | y) * prod_t p(y_t | y_<t). A zero-mass prefix gives exactly 0.
template <class S>
S lm_string_prob(const ElmanNetwork<S>& net, const ConditionalFn<S>& head, const Word& y);

/// String probabilities for every string of length <= max_len, length-lex
/// order, plus the total probability of generating a length max_len + 1
/// prefix (what the model leaves for longer strings).
template <class S>
struct ProbabilityTable {
  std::vector<Word> words;
  std::vector<S> probs;
  S continuation_mass{0};
};

template <class S>
ProbabilityTable<S> lm_table(const ElmanNetwork<S>& net, const ConditionalFn<S>& head, std::size_t max_len);

/// Same table computed from the automaton's forward vectors.
template <class S>
ProbabilityTable<S> pfsa_table(const Pfsa& a, std::size_t max_len);

/// 1/2 * sum |p - q| over paired entries.
template <class S>
S restricted_tvd(const std::vector<S>& p, const std::vector<S>& q);

/// restricted + p_tail/2 + q_tail/2.
template <class S>
S tvd_upper_bound(const S& restricted, const S& p_tail, const S& q_tail);

/// 1 - sum_{t<=max_len} length_mass(a, t).
Rational tail_mass(const Pfsa& a, std::size_t max_len);

struct ReportRow {
  std::string text;  // "<eps>" for the empty string
  Number p_a;
  Number p_r;
  Number diff;
};

struct EquivalenceReport {
  std::string kind;  // "exact" or "approx"
  HeadKind head = HeadKind::sparsemax;
  ScalarMode mode = ScalarMode::exact;
  std::size_t max_len = 0;
  std::optional<Rational> delta;
  std::optional<Rational> epsilon;

  std::vector<ReportRow> rows;
  Number restricted_tvd = Rational(0);  // between p_A and p_R on S
  Number tail_a = Rational(0);          // p_A mass beyond S
  Number tail_r = Rational(0);          // bound on p_R mass beyond S
  Number tvd_bound = Rational(0);       // three-term bound
  Number max_diff = Rational(0);
  std::optional<Number> conservation;   // sum_S p_R + continuation mass

  // Approximate runs only.
  std::optional<Number> rtvd_a_adelta;
  std::optional<Number> rtvd_adelta_r;
  std::optional<Number> tail_adelta;
  std::optional<Number> rtvd_next;      // rTVD(p_A, p_R) over length <= M+1
  std::optional<MlpFitReport> fit;
  std::optional<double> lipschitz;

  bool pass = false;
  std::string verdict;
  std::optional<std::string> counterexample;
  double wall_seconds = 0.0;
};

struct ExactOptions {
  HeadKind head = HeadKind::sparsemax;
  std::size_t max_len = 8;
  ScalarMode mode = ScalarMode::exact;
  Rational temperature = Rational(1);
};

/// Compiles the automaton (or uses the given compiled model) and compares head
/// string probabilities to stringsum on every string of length <= max_len.
EquivalenceReport verify_exact(const Pfsa& a, const ExactOptions& options);
EquivalenceReport verify_exact(const Pfsa& a, const CompiledModel& model, const ExactOptions& options);

struct ApproxOptions {
  HeadKind head = HeadKind::mlp;  // mlp or softmax
  Rational delta = Rational(1, 1000);
  Rational epsilon = Rational(1, 100);
  std::size_t max_len = 8;
  ScalarMode mode = ScalarMode::exact;  // exact applies to the softmax head
  Rational temperature = Rational(1);
  MlpFitConfig fit;
};

/// Perturbs, compiles, builds the head on the perturbed automaton and
/// measures against the original automaton. With the MLP head the fit uses
/// the hidden states of every prefix of length <= max_len.
EquivalenceReport verify_approx(const Pfsa& a, const ApproxOptions& options);

/// Hidden states of all prefixes of length <= max_len, length-lex order.
std::vector<HiddenState<double>> prefix_states(const ElmanParams& params, std::size_t max_len);

std::string report_to_json(const EquivalenceReport& report);
std::string report_to_tsv(const EquivalenceReport& report);
/// Human-readable "key: value" summary.
std::string report_summary(const EquivalenceReport& report);

}  // namespace pfsarnn
