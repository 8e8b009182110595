// Command-line front end: load, validate, compile, run and verify automata.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>

#include "pfsarnn/equivalence.hpp"
#include "pfsarnn/pfsa_io.hpp"

using namespace pfsarnn;

namespace {

constexpr int kOk = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

struct Options {
  std::string input;
  std::string params_path;
  std::string text;
  std::string mode = "exact";
  std::string head = "sparsemax";
  std::string temperature = "1";
  std::string delta;
  std::string epsilon = "1/100";
  std::size_t max_len = 8;
  std::size_t sample_len = 6;
  std::uint64_t seed = 0;
  std::size_t count = 1;
  std::string out;
  std::string tsv;
  bool table = false;
  bool trace_precision = false;
  MlpFitConfig fit;
};

void emit(const Options& o, const std::string& content) {
  if (o.out.empty()) {
    std::cout << content;
  } else {
    write_file(o.out, content);
  }
}

std::string show_word(const std::string& text) { return text.empty() ? "<eps>" : text; }

int cmd_validate(const Options& o) {
  const auto a = load_pfsa(o.input);
  const auto violations = validate(a);
  if (violations.empty()) {
    std::cout << "OK: " << a.num_states() << " states, " << a.num_symbols() << " symbols, "
              << a.transitions().size() << " transitions"
              << (is_deterministic(a) ? ", deterministic" : ", non-deterministic") << "\n";
    return kOk;
  }
  for (const auto& v : violations) std::cout << "violation: " << v.location << ": " << v.message << "\n";
  return kFail;
}

int require_valid(const Pfsa& a) {
  const auto violations = validate(a);
  for (const auto& v : violations) std::cerr << "violation: " << v.location << ": " << v.message << "\n";
  return violations.empty() ? kOk : kFail;
}

int cmd_trim(const Options& o) {
  const auto a = load_pfsa(o.input);
  if (const int rc = require_valid(a); rc != kOk) return rc;
  const auto result = trim(a);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  emit(o, pfsa_to_json(result.automaton));
  return kOk;
}

int cmd_compile(const Options& o) {
  const auto a = load_pfsa(o.input);
  if (const int rc = require_valid(a); rc != kOk) return rc;
  const CompiledModel model{compile(a), output_matrix(a)};
  emit(o, params_to_json(model));
  if (!o.out.empty()) std::cout << "D = " << model.params.dimension() << "\n";
  return kOk;
}

CompiledModel model_from(const Options& o) {
  if (!o.params_path.empty()) return parse_params(read_file(o.params_path));
  if (o.input.empty()) throw std::invalid_argument("give an automaton file or --params");
  const auto a = load_pfsa(o.input);
  if (const auto v = validate(a); !v.empty())
    throw std::invalid_argument("automaton does not validate: " + v.front().location + ": " + v.front().message);
  return {compile(a), output_matrix(a)};
}

template <class S>
nlohmann::json state_json(const HiddenState<S>& h, const ElmanParams& p) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& x : h.entries) entries.push_back(format_number(ScalarTraits<S>::to_number(x)));
  return {{"t", h.t}, {"consumed", p.format_word(h.consumed)}, {"entries", entries}};
}

int cmd_run(const Options& o) {
  const auto model = model_from(o);
  const auto& p = model.params;
  const auto word = p.parse_word(o.text);
  nlohmann::json doc;
  nlohmann::json ordering = nlohmann::json::array();
  for (std::size_t d = 0; d < p.dimension(); ++d) {
    const auto [q, y] = p.inverse(d);
    ordering.push_back(p.states[q] + "," + p.alphabet[y]);
  }
  doc["ordering"] = ordering;
  if (parse_mode(o.mode) == ScalarMode::exact) {
    doc["state"] = state_json(run(p, word), p);
  } else {
    doc["state"] = state_json(ElmanNetwork<double>(p).run(word), p);
  }
  int rc = kOk;
  if (o.trace_precision) {
    const auto trace = precision_trace(p, word);
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t t = 0; t < trace.bits.size(); ++t) {
      const bool ok = trace.bits[t] <= trace.bound_constant * (t + 1);
      if (!ok) rc = kFail;
      rows.push_back({{"t", t}, {"bits", trace.bits[t]}, {"bound", trace.bound_constant * (t + 1)}, {"ok", ok}});
    }
    doc["precision"] = {{"C", trace.bound_constant}, {"trace", rows}};
  }
  emit(o, doc.dump(1) + "\n");
  return rc;
}

template <class S>
ConditionalFn<S> head_fn(HeadKind kind, const OutputMatrix& output, const Rational& temperature) {
  if (kind == HeadKind::sparsemax) {
    auto head = std::make_shared<SparsemaxHead>(output);
    return [head](const HiddenState<S>& h) { return head->template conditional<S>(h); };
  }
  if (kind == HeadKind::softmax) {
    auto head = std::make_shared<SoftmaxLogHead>(output, temperature);
    return [head](const HiddenState<S>& h) { return head->template conditional<S>(h); };
  }
  throw std::invalid_argument("prob supports the sparsemax and softmax heads");
}

template <class S>
int prob_impl(const Pfsa& a, const Word& word, HeadKind kind, const Rational& temperature) {
  const CompiledModel model{compile(a), output_matrix(a)};
  const ElmanNetwork<S> net(model.params);
  const S reference = stringsum<S>(a, word);
  const S simulated = lm_string_prob<S>(net, head_fn<S>(kind, model.output, temperature), word);
  const S diff = reference < simulated ? simulated - reference : reference - simulated;
  using T = ScalarTraits<S>;
  std::cout << format_number(T::to_number(reference)) << "  " << format_number(T::to_number(simulated)) << "  "
            << format_number(T::to_number(diff)) << "\n";
  return kOk;
}

int cmd_prob(const Options& o) {
  const auto a = load_pfsa(o.input);
  if (const int rc = require_valid(a); rc != kOk) return rc;
  const auto word = a.parse_word(o.text);
  const auto kind = parse_head_kind(o.head);
  const auto temperature = Rational::parse(o.temperature);
  if (parse_mode(o.mode) == ScalarMode::exact) return prob_impl<Rational>(a, word, kind, temperature);
  return prob_impl<double>(a, word, kind, temperature);
}

int cmd_conditional(const Options& o) {
  const auto a = load_pfsa(o.input);
  if (const int rc = require_valid(a); rc != kOk) return rc;
  const auto word = a.parse_word(o.text);
  auto print = [&](const auto& probs) {
    using S = typename std::decay_t<decltype(probs)>::value_type;
    for (std::size_t y = 0; y < probs.size(); ++y) {
      const std::string name = y < a.num_symbols() ? a.alphabet()[y] : "EOS";
      std::cout << name << '\t' << format_number(ScalarTraits<S>::to_number(probs[y])) << '\n';
    }
  };
  try {
    if (parse_mode(o.mode) == ScalarMode::exact) {
      print(conditional<Rational>(a, word).probs);
    } else {
      print(conditional<double>(a, word).probs);
    }
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFail;
  }
  return kOk;
}

int cmd_perturb(const Options& o) {
  const auto a = load_pfsa(o.input);
  if (const int rc = require_valid(a); rc != kOk) return rc;
  if (o.delta.empty()) throw std::invalid_argument("perturb needs --delta");
  emit(o, pfsa_to_json(perturb(a, Rational::parse(o.delta))));
  return kOk;
}

int cmd_sample(const Options& o) {
  const auto a = load_pfsa(o.input);
  if (const int rc = require_valid(a); rc != kOk) return rc;
  const auto trimmed = trim(a);
  if (trimmed.automaton.num_states() != a.num_states()) throw std::invalid_argument("sampling needs a trim automaton");
  for (std::size_t i = 0; i < o.count; ++i) std::cout << show_word(a.format_word(sample(a, o.seed + i))) << "\n";
  return kOk;
}

int cmd_precision(const Options& o) {
  const auto model = model_from(o);
  const auto& p = model.params;
  const auto trace = precision_trace(p, p.parse_word(o.text));
  std::cout << "C = " << trace.bound_constant << "\n";
  std::cout << "t\tbits\tbound\tstatus\n";
  bool all_ok = true;
  for (std::size_t t = 0; t < trace.bits.size(); ++t) {
    const auto bound = trace.bound_constant * (t + 1);
    const bool ok = trace.bits[t] <= bound;
    all_ok = all_ok && ok;
    std::cout << t << '\t' << trace.bits[t] << '\t' << bound << '\t' << (ok ? "PASS" : "FAIL") << "\n";
  }
  return all_ok ? kOk : kFail;
}

int cmd_fit_mlp(const Options& o) {
  const auto a = load_pfsa(o.input);
  if (const int rc = require_valid(a); rc != kOk) return rc;
  const Rational delta = Rational::parse(o.delta.empty() ? "1/1000" : o.delta);
  const auto perturbed = perturb(a, delta);
  const auto params = compile(perturbed);
  auto config = o.fit;
  config.seed = o.seed;
  const auto fit = fit_mlp_log_head(output_matrix(perturbed), prefix_states(params, o.sample_len), config);
  if (!o.out.empty()) write_file(o.out, mlp_to_json(fit));
  const auto& r = fit.report;
  std::cout << "tau_achieved: " << format_double(r.tau_achieved) << "\n"
            << "target_tau: " << format_double(r.target_tau) << "\n"
            << "converged: " << (r.converged ? "true" : "false") << "\n"
            << "xi1: " << format_double(r.xi1) << "\n"
            << "xi2: " << format_double(r.xi2) << "\n"
            << "lipschitz: " << format_double(lipschitz_constant(o.sample_len, 1.0, a.num_symbols() + 1)) << "\n"
            << "iterations: " << r.iterations << "\n"
            << "train_size: " << r.train_size << "\n"
            << "validation_size: " << r.validation_size << "\n";
  return r.converged ? kOk : kFail;
}

int cmd_verify(const Options& o) {
  const auto a = load_pfsa(o.input);
  if (const int rc = require_valid(a); rc != kOk) return rc;
  const auto kind = parse_head_kind(o.head);
  const auto mode = parse_mode(o.mode);
  const auto temperature = Rational::parse(o.temperature);
  EquivalenceReport report;
  if (kind == HeadKind::mlp || !o.delta.empty()) {
    ApproxOptions options;
    options.head = kind;
    options.delta = Rational::parse(o.delta.empty() ? "1/1000" : o.delta);
    options.epsilon = Rational::parse(o.epsilon);
    options.max_len = o.max_len;
    options.mode = mode;
    options.temperature = temperature;
    options.fit = o.fit;
    options.fit.seed = o.seed;
    report = verify_approx(a, options);
  } else {
    report = verify_exact(a, ExactOptions{kind, o.max_len, mode, temperature});
  }
  if (!o.out.empty()) write_file(o.out, report_to_json(report));
  if (!o.tsv.empty()) write_file(o.tsv, report_to_tsv(report));
  std::cout << report_summary(report);
  if (o.table) std::cout << "\n" << report_to_tsv(report);
  std::cerr << "elapsed: " << format_double(report.wall_seconds) << " s\n";
  return report.pass ? kOk : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compile probabilistic automata into ReLU Elman language models and verify them"};
  app.require_subcommand(1);
  Options o;

  auto input = [&](CLI::App* sub, bool required = true) {
    auto* opt = sub->add_option("automaton", o.input, "automaton JSON file");
    if (required) opt->required();
  };
  auto mode = [&](CLI::App* sub) {
    sub->add_option("--mode", o.mode, "exact|float")->check(CLI::IsMember({"exact", "float"}));
  };
  auto text = [&](CLI::App* sub) { sub->add_option("--string,-s", o.text, "input string (empty by default)"); };
  auto out = [&](CLI::App* sub) { sub->add_option("--out,-o", o.out, "output file"); };
  auto fit_flags = [&](CLI::App* sub) {
    sub->add_option("--hidden", o.fit.hidden, "MLP hidden width")->check(CLI::PositiveNumber);
    sub->add_option("--fit-iterations", o.fit.max_iterations, "maximum optimizer steps")->check(CLI::PositiveNumber);
    sub->add_option("--train-copies", o.fit.train_copies, "jittered training copies per sample");
    sub->add_option("--validation-copies", o.fit.validation_copies, "held-out jittered copies per sample");
    sub->add_option("--jitter", o.fit.jitter, "relative jitter inside the active block")->check(CLI::NonNegativeNumber);
    sub->add_option("--learning-rate", o.fit.learning_rate, "initial step size")->check(CLI::PositiveNumber);
    sub->add_option("--target-tau", o.fit.target_tau, "sup logit error target")->check(CLI::PositiveNumber);
    sub->add_flag("--clamp", o.fit.clamp, "apply the max(xi1, .) input clamp");
    sub->add_option("--seed", o.seed, "random seed");
  };

  auto* validate_cmd = app.add_subcommand("validate", "check normalization and nonnegativity");
  input(validate_cmd);
  auto* trim_cmd = app.add_subcommand("trim", "drop states off every initial-to-final path");
  input(trim_cmd);
  out(trim_cmd);
  auto* compile_cmd = app.add_subcommand("compile", "write Elman parameters and the output matrix");
  input(compile_cmd);
  out(compile_cmd);
  auto* run_cmd = app.add_subcommand("run", "print the hidden state after a string");
  input(run_cmd, false);
  run_cmd->add_option("--params", o.params_path, "compiled params file");
  text(run_cmd);
  mode(run_cmd);
  out(run_cmd);
  run_cmd->add_flag("--trace-precision", o.trace_precision, "include the per-step precision trace");
  auto* prob_cmd = app.add_subcommand("prob", "stringsum, head probability and their difference");
  input(prob_cmd);
  text(prob_cmd);
  mode(prob_cmd);
  prob_cmd->add_option("--head", o.head, "sparsemax|softmax");
  prob_cmd->add_option("--temperature", o.temperature, "softmax inverse temperature");
  auto* cond_cmd = app.add_subcommand("conditional", "next-symbol distribution after a prefix");
  input(cond_cmd);
  text(cond_cmd);
  mode(cond_cmd);
  auto* perturb_cmd = app.add_subcommand("perturb", "mix every weight with delta and renormalize");
  input(perturb_cmd);
  perturb_cmd->add_option("--delta", o.delta, "perturbation size")->required();
  out(perturb_cmd);
  auto* sample_cmd = app.add_subcommand("sample", "draw strings by ancestral sampling");
  input(sample_cmd);
  sample_cmd->add_option("--seed", o.seed, "random seed");
  sample_cmd->add_option("--count,-n", o.count, "number of strings");
  auto* precision_cmd = app.add_subcommand("precision", "hidden-state bits against C(t+1)");
  input(precision_cmd, false);
  precision_cmd->add_option("--params", o.params_path, "compiled params file");
  text(precision_cmd);
  auto* fit_cmd = app.add_subcommand("fit-mlp", "fit an MLP log head on a perturbed automaton");
  input(fit_cmd);
  fit_cmd->add_option("--delta", o.delta, "perturbation size (default 1/1000)");
  fit_cmd->add_option("--sample-len", o.sample_len, "prefix length bound for the fitting samples");
  fit_flags(fit_cmd);
  out(fit_cmd);
  auto* verify_cmd = app.add_subcommand("verify", "compare head string probabilities with the automaton");
  input(verify_cmd);
  mode(verify_cmd);
  verify_cmd->add_option("--head", o.head, "sparsemax|softmax|mlp");
  verify_cmd->add_option("--max-len", o.max_len, "string length bound M");
  verify_cmd->add_option("--temperature", o.temperature, "softmax inverse temperature");
  verify_cmd->add_option("--delta", o.delta, "perturb first and run the approximate check");
  verify_cmd->add_option("--epsilon", o.epsilon, "restricted TVD tolerance for the approximate check");
  verify_cmd->add_option("--tsv", o.tsv, "write the per-string table here");
  verify_cmd->add_flag("--table", o.table, "print the per-string table");
  fit_flags(verify_cmd);
  out(verify_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (!(Rational::parse(o.temperature) > Rational(0))) throw std::invalid_argument("temperature must be positive");
    if (validate_cmd->parsed()) return cmd_validate(o);
    if (trim_cmd->parsed()) return cmd_trim(o);
    if (compile_cmd->parsed()) return cmd_compile(o);
    if (run_cmd->parsed()) return cmd_run(o);
    if (prob_cmd->parsed()) return cmd_prob(o);
    if (cond_cmd->parsed()) return cmd_conditional(o);
    if (perturb_cmd->parsed()) return cmd_perturb(o);
    if (sample_cmd->parsed()) return cmd_sample(o);
    if (precision_cmd->parsed()) return cmd_precision(o);
    if (fit_cmd->parsed()) return cmd_fit_mlp(o);
    if (verify_cmd->parsed()) return cmd_verify(o);
  } catch (const ParseError& e) {
    std::cerr << "error: " << o.input << (o.input.empty() ? "" : ": ") << e.what() << "\n";
    return kUsage;
  } catch (const EnumerationTooLarge& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFail;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
