#include "pfsarnn/equivalence.hpp"

#include <chrono>
#include <memory>
#include <cmath>
#include <sstream>

#include <json.hpp>

namespace pfsarnn {

namespace {

std::size_t level_offset(std::size_t k, std::size_t len) {
  std::size_t offset = 0, power = 1;
  for (std::size_t t = 0; t < len; ++t) {
    offset += power;
    power *= k;
  }
  return offset;
}

// Position of w in the length-lex enumeration over k symbols.
std::size_t lex_index(std::size_t k, const Word& w) {
  std::size_t rank = 0;
  for (auto y : w) rank = rank * k + y;
  return level_offset(k, w.size()) + rank;
}

void guard(std::size_t k, std::size_t max_len) {
  if (std::pow(static_cast<double>(k), static_cast<double>(max_len)) > kEnumerationLimit) throw EnumerationTooLarge();
}

std::string display(const std::string& text) { return text.empty() ? "<eps>" : text; }

}  // namespace

StringSet enumerate(const std::vector<std::string>& alphabet, std::size_t max_len) {
  const auto k = alphabet.size();
  if (k == 0) throw std::invalid_argument("empty alphabet");
  guard(k, max_len);
  StringSet set{alphabet, max_len, {}};
  set.words.push_back({});
  std::size_t level_begin = 0;
  for (std::size_t len = 1; len <= max_len; ++len) {
    const std::size_t level_end = set.words.size();
    for (std::size_t i = level_begin; i < level_end; ++i) {
      for (std::size_t y = 0; y < k; ++y) {
        Word w = set.words[i];
        w.push_back(y);
        set.words.push_back(std::move(w));
      }
    }
    level_begin = level_end;
  }
  return set;
}

template <class S>
S lm_string_prob(const ElmanNetwork<S>& net, const ConditionalFn<S>& head, const Word& y) {
  auto h = net.init();
  S prob{1};
  try {
    for (auto symbol : y) {
      prob *= head(h).at(symbol);
      h = net.step(h, symbol);
    }
    prob *= head(h).back();
  } catch (const ZeroMassError&) {
    return S{0};
  }
  return prob;
}

template <class S>
ProbabilityTable<S> lm_table(const ElmanNetwork<S>& net, const ConditionalFn<S>& head, std::size_t max_len) {
  const auto k = net.params().num_symbols();
  const auto set = enumerate(net.params().alphabet, max_len);
  ProbabilityTable<S> table{set.words, std::vector<S>(set.words.size(), S{0}), S{0}};
  Word path;
  // Depth-first over prefixes; each conditional is evaluated once.
  std::function<void(const HiddenState<S>&, const S&)> visit = [&](const HiddenState<S>& h, const S& prefix) {
    std::vector<S> dist;
    try {
      dist = head(h);
    } catch (const ZeroMassError&) {
      return;  // every extension has probability 0
    }
    table.probs[lex_index(k, path)] = prefix * dist.back();
    for (std::size_t y = 0; y < k; ++y) {
      const S next = prefix * dist[y];
      if (path.size() == max_len) {
        table.continuation_mass += next;
        continue;
      }
      path.push_back(y);
      visit(net.step(h, y), next);
      path.pop_back();
    }
  };
  visit(net.init(), S{1});
  return table;
}

template <class S>
ProbabilityTable<S> pfsa_table(const Pfsa& a, std::size_t max_len) {
  using T = ScalarTraits<S>;
  const auto k = a.num_symbols();
  const auto n = a.num_states();
  const auto set = enumerate(a.alphabet(), max_len);
  ProbabilityTable<S> table{set.words, std::vector<S>(set.words.size(), S{0}), S{0}};
  const auto rho = convert_vector<S>(a.final_weights());
  std::vector<S> out_mass(n, S{0});
  for (const auto& t : a.transitions()) out_mass[t.from] += T::from(t.weight);
  std::vector<std::vector<std::tuple<std::size_t, std::size_t, S>>> by_symbol(k);
  for (const auto& t : a.transitions()) {
    if (!t.weight.is_zero()) by_symbol[t.symbol].emplace_back(t.from, t.to, T::from(t.weight));
  }
  Word path;
  std::function<void(const std::vector<S>&)> visit = [&](const std::vector<S>& fv) {
    S prob{0};
    for (std::size_t q = 0; q < n; ++q) prob += fv[q] * rho[q];
    table.probs[lex_index(k, path)] = prob;
    if (path.size() == max_len) {
      for (std::size_t q = 0; q < n; ++q) table.continuation_mass += fv[q] * out_mass[q];
      return;
    }
    for (std::size_t y = 0; y < k; ++y) {
      std::vector<S> next(n, S{0});
      for (const auto& [from, to, w] : by_symbol[y]) {
        if (!T::is_zero(fv[from])) next[to] += fv[from] * w;
      }
      path.push_back(y);
      visit(next);
      path.pop_back();
    }
  };
  visit(convert_vector<S>(a.initial()));
  return table;
}

template <class S>
S restricted_tvd(const std::vector<S>& p, const std::vector<S>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("restricted_tvd needs paired vectors");
  S total{0};
  for (std::size_t i = 0; i < p.size(); ++i) total += p[i] < q[i] ? q[i] - p[i] : p[i] - q[i];
  return total / S{2};
}

template <class S>
S tvd_upper_bound(const S& restricted, const S& p_tail, const S& q_tail) {
  return restricted + p_tail / S{2} + q_tail / S{2};
}

#define PFSARNN_INSTANTIATE(S)                                                                        \
  template S lm_string_prob<S>(const ElmanNetwork<S>&, const ConditionalFn<S>&, const Word&);       \
  template ProbabilityTable<S> lm_table<S>(const ElmanNetwork<S>&, const ConditionalFn<S>&, std::size_t); \
  template ProbabilityTable<S> pfsa_table<S>(const Pfsa&, std::size_t);                               \
  template S restricted_tvd<S>(const std::vector<S>&, const std::vector<S>&);                          \
  template S tvd_upper_bound<S>(const S&, const S&, const S&);

PFSARNN_INSTANTIATE(Rational)
PFSARNN_INSTANTIATE(double)
#undef PFSARNN_INSTANTIATE

Rational tail_mass(const Pfsa& a, std::size_t max_len) {
  Rational tail(1);
  for (const auto& m : length_masses(a, max_len)) tail -= m;
  return tail;
}

namespace {

void require_trim_and_valid(const Pfsa& a) {
  if (const auto violations = validate(a); !violations.empty())
    throw std::invalid_argument("automaton does not validate: " + violations.front().message);
  if (const auto trimmed = trim(a); trimmed.automaton.num_states() != a.num_states())
    throw std::invalid_argument("automaton is not trim; run the trim command first");
}

template <class S>
ConditionalFn<S> exact_head(HeadKind kind, const OutputMatrix& output, const Rational& temperature) {
  if (kind == HeadKind::sparsemax) {
    auto head = std::make_shared<SparsemaxHead>(output);
    return [head](const HiddenState<S>& h) { return head->template conditional<S>(h); };
  }
  if (kind == HeadKind::softmax) {
    auto head = std::make_shared<SoftmaxLogHead>(output, temperature);
    return [head](const HiddenState<S>& h) { return head->template conditional<S>(h); };
  }
  throw std::invalid_argument("exact verification supports the sparsemax and softmax heads");
}

template <class S>
S absdiff(const S& x, const S& y) {
  return x < y ? y - x : x - y;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

template <class S>
S clip_unit(const S& x) {
  if (x < S{0}) return S{0};
  if (x > S{1}) return S{1};
  return x;
}

template <class S>
EquivalenceReport exact_impl(const Pfsa& a, const CompiledModel& model, const ExactOptions& options) {
  using T = ScalarTraits<S>;
  const auto start = std::chrono::steady_clock::now();
  EquivalenceReport report;
  report.kind = "exact";
  report.head = options.head;
  report.mode = T::mode;
  report.max_len = options.max_len;

  const ElmanNetwork<S> net(model.params);
  const auto head = exact_head<S>(options.head, model.output, options.temperature);
  const auto reference = pfsa_table<S>(a, options.max_len);
  const auto simulated = lm_table<S>(net, head, options.max_len);

  constexpr double kFloatTolerance = 1e-9;
  S max_diff{0}, sum_r{0};
  std::vector<S> diffs;
  for (std::size_t i = 0; i < reference.words.size(); ++i) {
    const S d = absdiff(reference.probs[i], simulated.probs[i]);
    const std::string text = display(a.format_word(reference.words[i]));
    report.rows.push_back({text, T::to_number(reference.probs[i]), T::to_number(simulated.probs[i]), T::to_number(d)});
    const bool bad = T::mode == ScalarMode::exact ? !T::is_zero(d) : T::to_double(d) > kFloatTolerance;
    if (bad && !report.counterexample) report.counterexample = text;
    if (d > max_diff) max_diff = d;
    sum_r += simulated.probs[i];
    diffs.push_back(d);
  }
  const S rtvd = restricted_tvd(reference.probs, simulated.probs);
  const S tail_a = T::from(tail_mass(a, options.max_len));
  // The model's mass beyond S is at most what it leaves for longer prefixes.
  const S tail_r = clip_unit(simulated.continuation_mass);
  report.restricted_tvd = T::to_number(rtvd);
  report.tail_a = T::to_number(tail_a);
  report.tail_r = T::to_number(tail_r);
  report.tvd_bound = T::to_number(tvd_upper_bound(rtvd, tail_a, tail_r));
  report.max_diff = T::to_number(max_diff);
  report.conservation = T::to_number(sum_r + simulated.continuation_mass);
  report.pass = !report.counterexample.has_value();
  if (report.pass) {
    report.verdict = T::mode == ScalarMode::exact ? "every per-string difference is exactly 0"
                                                  : "every per-string difference is within 1e-9";
  } else {
    report.verdict = "head probability differs from stringsum on \"" + *report.counterexample + "\"";
  }
  report.wall_seconds = seconds_since(start);
  return report;
}

// Probabilities from an exact table converted to S.
template <class S>
std::vector<S> converted(const std::vector<Rational>& v) {
  return convert_vector<S>(v);
}

template <class S>
EquivalenceReport approx_impl(const Pfsa& a, const ApproxOptions& options) {
  using T = ScalarTraits<S>;
  const auto start = std::chrono::steady_clock::now();
  EquivalenceReport report;
  report.kind = "approx";
  report.head = options.head;
  report.mode = T::mode;
  report.max_len = options.max_len;
  report.delta = options.delta;
  report.epsilon = options.epsilon;

  const auto perturbed = perturb(a, options.delta);
  const CompiledModel model{compile(perturbed), output_matrix(perturbed)};
  const std::size_t big = options.max_len + 1;

  const auto p_a_exact = pfsa_table<Rational>(a, big);
  const auto p_d_exact = pfsa_table<Rational>(perturbed, big);
  const auto p_a = converted<S>(p_a_exact.probs);
  const auto p_d = converted<S>(p_d_exact.probs);

  std::vector<S> p_r;
  if (options.head == HeadKind::mlp) {
    if constexpr (std::is_same_v<S, double>) {
      auto fit = fit_mlp_log_head(model.output, prefix_states(model.params, options.max_len), options.fit);
      fit.head.temperature = options.temperature.to_double();
      const ElmanNetwork<double> net(model.params);
      auto shared = std::make_shared<MlpHead>(fit.head);
      const ConditionalFn<double> head = [shared](const HiddenState<double>& h) { return shared->conditional(h); };
      p_r = lm_table<double>(net, head, big).probs;
      report.fit = std::move(fit.report);
      report.lipschitz = lipschitz_constant(options.max_len, options.temperature.to_double(),
                                            model.params.num_symbols() + 1);
    } else {
      throw std::invalid_argument("the MLP head runs in float mode");
    }
  } else {
    const ElmanNetwork<S> net(model.params);
    p_r = lm_table<S>(net, exact_head<S>(options.head, model.output, options.temperature), big).probs;
  }

  // Entries for strings of length <= M form a prefix of the length-lex tables.
  const auto in_s = enumerate(a.alphabet(), options.max_len).words.size();
  auto head_part = [in_s](const std::vector<S>& v) { return std::vector<S>(v.begin(), v.begin() + static_cast<long>(in_s)); };
  const auto a_s = head_part(p_a), d_s = head_part(p_d), r_s = head_part(p_r);

  S max_diff{0};
  for (std::size_t i = 0; i < in_s; ++i) {
    const S d = absdiff(a_s[i], r_s[i]);
    report.rows.push_back({display(a.format_word(p_a_exact.words[i])), T::to_number(a_s[i]), T::to_number(r_s[i]),
                           T::to_number(d)});
    if (d > max_diff) max_diff = d;
  }
  const S rtvd = restricted_tvd(a_s, r_s);
  const S rtvd_dr = restricted_tvd(d_s, r_s);
  const S tail_a = T::from(tail_mass(a, options.max_len));
  const S tail_d = T::from(tail_mass(perturbed, options.max_len));
  const S tail_r = clip_unit(tail_d + S{2} * rtvd_dr);
  report.restricted_tvd = T::to_number(rtvd);
  report.rtvd_a_adelta = T::to_number(restricted_tvd(a_s, d_s));
  report.rtvd_adelta_r = T::to_number(rtvd_dr);
  report.tail_a = T::to_number(tail_a);
  report.tail_adelta = T::to_number(tail_d);
  report.tail_r = T::to_number(tail_r);
  report.tvd_bound = T::to_number(tvd_upper_bound(rtvd, tail_a, tail_r));
  report.rtvd_next = T::to_number(restricted_tvd(p_a, p_r));
  report.max_diff = T::to_number(max_diff);

  const S eps = T::from(options.epsilon);
  report.pass = rtvd < eps;
  report.verdict = std::string("restricted TVD ") + (report.pass ? "<" : ">=") + " epsilon " + options.epsilon.str();
  report.wall_seconds = seconds_since(start);
  return report;
}

}  // namespace

EquivalenceReport verify_exact(const Pfsa& a, const ExactOptions& options) {
  require_trim_and_valid(a);
  guard(a.num_symbols(), options.max_len);
  return verify_exact(a, CompiledModel{compile(a), output_matrix(a)}, options);
}

EquivalenceReport verify_exact(const Pfsa& a, const CompiledModel& model, const ExactOptions& options) {
  guard(a.num_symbols(), options.max_len);
  if (options.mode == ScalarMode::exact) return exact_impl<Rational>(a, model, options);
  return exact_impl<double>(a, model, options);
}

EquivalenceReport verify_approx(const Pfsa& a, const ApproxOptions& options) {
  require_trim_and_valid(a);
  if (options.delta.sign() < 0) throw std::invalid_argument("delta must be nonnegative");
  if (options.epsilon.sign() <= 0) throw std::invalid_argument("epsilon must be positive");
  if (options.head == HeadKind::sparsemax)
    throw std::invalid_argument("approximate verification supports the softmax and mlp heads");
  guard(a.num_symbols(), options.max_len + 1);
  if (options.mode == ScalarMode::exact && options.head == HeadKind::softmax) return approx_impl<Rational>(a, options);
  return approx_impl<double>(a, options);
}

std::vector<HiddenState<double>> prefix_states(const ElmanParams& params, std::size_t max_len) {
  const ElmanNetwork<double> net(params);
  const auto set = enumerate(params.alphabet, max_len);
  std::vector<HiddenState<double>> out;
  out.reserve(set.words.size());
  out.push_back(net.init());
  // Length-lex order means each word's parent is already present.
  const auto k = params.num_symbols();
  for (std::size_t i = 1; i < set.words.size(); ++i) {
    Word parent = set.words[i];
    const auto y = parent.back();
    parent.pop_back();
    out.push_back(net.step(out[lex_index(k, parent)], y));
  }
  return out;
}

namespace {

using nlohmann::json;

json number_json(const Number& n) { return format_number(n); }

template <class V>
json optional_json(const std::optional<V>& v) {
  if (!v) return nullptr;
  if constexpr (std::is_same_v<V, Number>) {
    return number_json(*v);
  } else if constexpr (std::is_same_v<V, Rational>) {
    return v->str();
  } else {
    return *v;
  }
}

}  // namespace

std::string report_to_json(const EquivalenceReport& r) {
  json doc;
  doc["kind"] = r.kind;
  doc["head"] = std::string(to_string(r.head));
  doc["mode"] = std::string(to_string(r.mode));
  doc["max_len"] = r.max_len;
  doc["delta"] = optional_json(r.delta);
  doc["epsilon"] = optional_json(r.epsilon);
  doc["verdict"] = r.pass ? "PASS" : "FAIL";
  doc["reason"] = r.verdict;
  doc["counterexample"] = r.counterexample ? json(*r.counterexample) : json(nullptr);
  doc["restricted_tvd"] = number_json(r.restricted_tvd);
  doc["max_diff"] = number_json(r.max_diff);
  doc["tail_a"] = number_json(r.tail_a);
  doc["tail_r"] = number_json(r.tail_r);
  doc["tvd_bound"] = number_json(r.tvd_bound);
  doc["conservation"] = optional_json(r.conservation);
  doc["rtvd_a_adelta"] = optional_json(r.rtvd_a_adelta);
  doc["rtvd_adelta_r"] = optional_json(r.rtvd_adelta_r);
  doc["tail_adelta"] = optional_json(r.tail_adelta);
  doc["rtvd_next"] = optional_json(r.rtvd_next);
  doc["lipschitz"] = optional_json(r.lipschitz);
  if (r.fit) {
    doc["fit"] = {{"tau_achieved", r.fit->tau_achieved}, {"target_tau", r.fit->target_tau},
                  {"converged", r.fit->converged},       {"initial_tau", r.fit->initial_tau},
                  {"xi1", r.fit->xi1},                   {"xi2", r.fit->xi2},
                  {"iterations", r.fit->iterations},     {"train_size", r.fit->train_size},
                  {"validation_size", r.fit->validation_size}, {"seed", r.fit->config.seed},
                  {"hidden", r.fit->config.hidden}};
  }
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"string", row.text}, {"p_a", number_json(row.p_a)}, {"p_r", number_json(row.p_r)},
                    {"diff", number_json(row.diff)}});
  doc["rows"] = rows;
  return doc.dump(1) + "\n";
}

std::string report_to_tsv(const EquivalenceReport& r) {
  std::ostringstream out;
  out << "string\tp_A\tp_R\tdiff\n";
  for (const auto& row : r.rows)
    out << row.text << '\t' << format_number(row.p_a) << '\t' << format_number(row.p_r) << '\t'
        << format_number(row.diff) << '\n';
  return out.str();
}

std::string report_summary(const EquivalenceReport& r) {
  std::ostringstream out;
  out << "verdict: " << (r.pass ? "PASS" : "FAIL") << "\n";
  out << "reason: " << r.verdict << "\n";
  if (r.counterexample) out << "counterexample: " << *r.counterexample << "\n";
  out << "head: " << to_string(r.head) << "\nmode: " << to_string(r.mode) << "\nmax_len: " << r.max_len << "\n";
  if (r.delta) out << "delta: " << r.delta->str() << "\n";
  if (r.epsilon) out << "epsilon: " << r.epsilon->str() << "\n";
  out << "strings: " << r.rows.size() << "\n";
  out << "restricted_tvd: " << format_number(r.restricted_tvd) << "\n";
  out << "max_diff: " << format_number(r.max_diff) << "\n";
  if (r.rtvd_a_adelta) out << "rtvd_a_adelta: " << format_number(*r.rtvd_a_adelta) << "\n";
  if (r.rtvd_adelta_r) out << "rtvd_adelta_r: " << format_number(*r.rtvd_adelta_r) << "\n";
  out << "tail_a: " << format_number(r.tail_a) << "\n";
  if (r.tail_adelta) out << "tail_adelta: " << format_number(*r.tail_adelta) << "\n";
  out << "tail_r: " << format_number(r.tail_r) << "\n";
  out << "tvd_bound: " << format_number(r.tvd_bound) << "\n";
  if (r.rtvd_next) out << "rtvd_next: " << format_number(*r.rtvd_next) << "\n";
  if (r.conservation) out << "conservation: " << format_number(*r.conservation) << "\n";
  if (r.lipschitz) out << "lipschitz: " << format_double(*r.lipschitz) << "\n";
  if (r.fit) {
    out << "fit_tau_achieved: " << format_double(r.fit->tau_achieved) << "\n";
    out << "fit_target_tau: " << format_double(r.fit->target_tau) << "\n";
    out << "fit_converged: " << (r.fit->converged ? "true" : "false") << "\n";
    out << "fit_xi1: " << format_double(r.fit->xi1) << "\nfit_xi2: " << format_double(r.fit->xi2) << "\n";
  }
  return out.str();
}

}  // namespace pfsarnn
