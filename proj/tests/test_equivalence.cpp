#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "pfsarnn/equivalence.hpp"
#include "pfsarnn/pfsa_io.hpp"

using namespace pfsarnn;

namespace {

Pfsa fixture(const std::string& name) { return load_pfsa(std::string(FIXTURE_DIR) + "/" + name + ".json"); }

}  // namespace

TEST_CASE("enumerate") {
  const std::vector<std::string> ab{"a", "b"};
  CHECK(enumerate(ab, 0).words == std::vector<Word>{{}});
  CHECK(enumerate(ab, 2).words == std::vector<Word>{{}, {0}, {1}, {0, 0}, {0, 1}, {1, 0}, {1, 1}});
  CHECK(enumerate({"a"}, 3).words.size() == 4);
  CHECK_THROWS_WITH_AS(enumerate(ab, 40), "enumeration too large", EnumerationTooLarge);
  CHECK_NOTHROW(enumerate({"a"}, 40));
}

TEST_CASE("lm_string_prob equals stringsum") {
  const auto a = fixture("fig2b");
  const auto p = compile(a);
  const ElmanNetwork<Rational> net(p);
  const SparsemaxHead sparse(output_matrix(a));
  const SoftmaxLogHead soft(output_matrix(a));
  const ConditionalFn<Rational> fs = [&](const HiddenState<Rational>& h) { return sparse.conditional(h); };
  const ConditionalFn<Rational> fl = [&](const HiddenState<Rational>& h) { return soft.conditional(h); };
  CHECK(lm_string_prob(net, fs, a.parse_word("a")) == Rational(29, 50));
  CHECK(lm_string_prob(net, fs, a.parse_word("ab")) == Rational(9, 100));
  CHECK(lm_string_prob(net, fs, a.parse_word("ba")) == Rational(0));
  CHECK(lm_string_prob(net, fl, a.parse_word("ba")) == Rational(0));
  // The table agrees with per-string evaluation.
  const auto table = lm_table(net, fs, 5);
  for (std::size_t i = 0; i < table.words.size(); ++i) CHECK(table.probs[i] == lm_string_prob(net, fs, table.words[i]));
}

TEST_CASE("restricted TVD and the three-term bound") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Rational> p, q;
    for (int i = 0; i < 6; ++i) {
      p.emplace_back(static_cast<long>(rng() % 10), 37);
      q.emplace_back(static_cast<long>(rng() % 10), 41);
    }
    CHECK(restricted_tvd(p, q) == restricted_tvd(q, p));
    CHECK(restricted_tvd(p, q) >= Rational(0));
    CHECK(restricted_tvd(p, p) == Rational(0));
    if (p != q) CHECK(restricted_tvd(p, q) > Rational(0));
  }
  const std::vector<Rational> left{1, 0}, right{0, 1};
  CHECK(restricted_tvd(left, right) == Rational(1));
  CHECK(tvd_upper_bound(Rational(1, 5), Rational(0), Rational(0)) == Rational(1, 5));
  CHECK(tvd_upper_bound(Rational(0), Rational(1, 10), Rational(1, 5)) == Rational(3, 20));
}

TEST_CASE("restricted TVD at delta 1e-2 over length <= 3 matches the path oracle") {
  const auto a = fixture("fig2b");
  const auto d = perturb(a, Rational(1, 100));
  const auto pa = pfsa_table<Rational>(a, 3), pd = pfsa_table<Rational>(d, 3);
  CHECK(pa.words.size() == 15);
  const auto expected = oracle::brute_restricted_tvd(oracle::raw(a), oracle::perturbed(oracle::raw(a), Rational(1, 100)), 3);
  CHECK(restricted_tvd(pa.probs, pd.probs) == expected);
  CHECK(expected > Rational(0));
}

TEST_CASE("three-term bound exceeds the true restricted TVD at delta 1e-4") {
  const auto a = fixture("fig2b");
  const auto d = perturb(a, Rational(1, 10000));
  const auto pa = pfsa_table<Rational>(a, 8), pd = pfsa_table<Rational>(d, 8);
  const auto rtvd = restricted_tvd(pa.probs, pd.probs);
  const auto bound = tvd_upper_bound(rtvd, tail_mass(a, 8), tail_mass(d, 8));
  const auto longer_a = pfsa_table<Rational>(a, 9), longer_d = pfsa_table<Rational>(d, 9);
  CHECK(bound >= restricted_tvd(longer_a.probs, longer_d.probs));
  CHECK(bound > rtvd);
}

TEST_CASE("verify_exact passes on the fixtures") {
  for (const char* name : {"fig2a_top", "fig2a_bottom", "fig2b"}) {
    for (auto head : {HeadKind::sparsemax, HeadKind::softmax}) {
      CAPTURE(name);
      const auto report = verify_exact(fixture(name), ExactOptions{head, 6, ScalarMode::exact, Rational(1)});
      CHECK(report.pass);
      CHECK(report.restricted_tvd == Number(Rational(0)));
      CHECK(report.conservation == std::optional<Number>(Rational(1)));
      for (const auto& row : report.rows) CHECK(row.diff == Number(Rational(0)));
      const auto floats = verify_exact(fixture(name), ExactOptions{head, 6, ScalarMode::float64, Rational(1)});
      CHECK(floats.pass);
    }
  }
}

TEST_CASE("verify_exact names a counterexample after corrupting E") {
  const auto a = fixture("fig2b");
  CompiledModel model{compile(a), output_matrix(a)};
  model.output.E(2, model.params.index_of("q1", "a")) += Rational(1, 10);
  const auto report = verify_exact(a, model, ExactOptions{HeadKind::sparsemax, 3, ScalarMode::exact, Rational(1)});
  CHECK_FALSE(report.pass);
  REQUIRE(report.counterexample);
  CHECK(*report.counterexample == "a");
}

TEST_CASE("verify_exact rejects untrimmed and invalid input") {
  const auto b = fixture("fig2b");
  auto states = b.states();
  states.push_back("q3");
  auto init = b.initial();
  init.push_back(0);
  auto fin = b.final_weights();
  fin.push_back(1);
  const Pfsa untrimmed(b.alphabet(), states, b.transitions(), init, fin);
  CHECK_THROWS_AS(verify_exact(untrimmed, ExactOptions{}), std::invalid_argument);
  CHECK_THROWS_AS(verify_exact(b, ExactOptions{HeadKind::sparsemax, 40, ScalarMode::exact, Rational(1)}),
                  EnumerationTooLarge);
}

TEST_CASE("verify_approx with the exact softmax head") {
  const auto a = fixture("fig2b");
  ApproxOptions options;
  options.head = HeadKind::softmax;
  options.max_len = 4;
  options.delta = Rational(1, 100);
  const auto report = verify_approx(a, options);
  const auto expected = oracle::brute_restricted_tvd(oracle::raw(a), oracle::perturbed(oracle::raw(a), Rational(1, 100)), 4);
  CHECK(report.restricted_tvd == Number(expected));
  CHECK(report.rtvd_adelta_r == std::optional<Number>(Rational(0)));
  CHECK(to_double(report.tvd_bound) >= to_double(*report.rtvd_next));

  options.delta = Rational(0);
  const auto degenerate = verify_approx(a, options);
  CHECK(degenerate.restricted_tvd == Number(Rational(0)));
  options.head = HeadKind::mlp;
  CHECK_THROWS_AS(verify_approx(a, options), std::invalid_argument);
}

TEST_CASE("report renderings") {
  const auto report = verify_exact(fixture("fig2b"), ExactOptions{HeadKind::sparsemax, 2, ScalarMode::exact, Rational(1)});
  const auto tsv = report_to_tsv(report);
  CHECK(tsv.rfind("string\tp_A\tp_R\tdiff\n<eps>\t0\t0\t0\na\t29/50\t29/50\t0\n", 0) == 0);
  CHECK(report_to_json(report).find("\"verdict\": \"PASS\"") != std::string::npos);
  CHECK(report_summary(report).rfind("verdict: PASS\n", 0) == 0);
}
