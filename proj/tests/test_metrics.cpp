#include "doctest.h"

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sclm/evaluate.hpp"
#include "sclm/metrics.hpp"

using namespace sclm;

namespace {

Tokens words(std::string_view s) { return metric_tokens(s); }

ModelConfig tiny() {
  ModelConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.n_layers = 1;
  c.d_ff = 32;
  c.max_seq_len = 64;
  c.seed = 99;
  return c;
}

CategoryResult single(double r0, std::vector<double> after) {
  return {Category::DomainKnowledge, {{"t", r0, std::move(after)}}};
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("metric tokens lowercase and split punctuation") {
    CHECK(metric_tokens("The cat, sat.") == Tokens{"the", "cat", ",", "sat", "."});
    CHECK(metric_tokens("  ").empty());
  }

  TEST_CASE("bleu hand count with a brevity penalty") {
    std::vector<Tokens> refs{words("the cat sat down")};
    CHECK(bleu(words("the cat sat"), refs) == doctest::Approx(std::exp(-1.0 / 3.0)).epsilon(1e-12));
    CHECK(bleu(words("the cat sat down"), refs) == doctest::Approx(1.0));
    CHECK(bleu(words("x y z"), refs) == 0.0);
    CHECK(bleu(Tokens{}, refs) == 0.0);
    CHECK_THROWS_AS(bleu(words("a"), std::span<const Tokens>{}), ContractError);
  }

  TEST_CASE("rouge on a permutation and identity") {
    const auto a = words("a b c"), b = words("a c b");
    CHECK(rouge_n(a, b, 1) == doctest::Approx(1.0));
    CHECK(rouge_n(a, b, 2) == 0.0);
    CHECK(rouge_l(a, b) == doctest::Approx(2.0 / 3.0));
    CHECK(rouge_l(a, a) == 1.0);
    CHECK(rouge_l(a, words("x y")) == 0.0);
  }

  TEST_CASE("metrics agree with the brute-force oracles on random cases") {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 200; ++i) {
      auto hyp = oracle::random_words(rng, 8);
      auto src = oracle::random_words(rng, 8);
      if (src.empty()) src.push_back("a");
      std::vector<Tokens> refs{oracle::random_words(rng, 8), oracle::random_words(rng, 8)};
      CHECK(bleu(hyp, refs) == doctest::Approx(oracle::bleu(hyp, refs)).epsilon(1e-9));
      for (int n = 1; n <= 2; ++n) {
        CHECK(rouge_n(hyp, refs[0], n) == doctest::Approx(oracle::rouge_n(hyp, refs[0], n)).epsilon(1e-9));
      }
      CHECK(rouge_l(hyp, refs[0]) == doctest::Approx(oracle::rouge_l(hyp, refs[0])).epsilon(1e-9));
      CHECK(sari(src, hyp, refs) == doctest::Approx(oracle::sari(src, hyp, refs)).epsilon(1e-9));
    }
  }

  TEST_CASE("sari conventions") {
    const auto src = words("the cat sat on the mat");
    std::vector<Tokens> refs{src};
    // Copying the source when the reference is the source: keep is perfect,
    // delete and add have empty candidate and gold sets.
    CHECK(sari(src, src, refs) == doctest::Approx(100.0));
    const auto parts = sari_ngram(src, src, refs, 1);
    CHECK(parts.keep_f1 == doctest::Approx(1.0));
    CHECK(parts.delete_precision == 1.0);
    CHECK(parts.add_f1 == 1.0);
    // Deleting everything against a copy reference scores keep 0 and delete 0.
    const auto empty = sari_ngram(src, Tokens{}, refs, 1);
    CHECK(empty.keep_f1 == 0.0);
    CHECK(empty.delete_precision == 0.0);
    const auto s = sari("the big cat", "the cat", std::vector<std::string>{"the cat"});
    CHECK(s == doctest::Approx(100.0));
    CHECK(s >= 0.0);
    CHECK_THROWS_AS(sari(Tokens{}, src, refs), ContractError);
  }

  TEST_CASE("fg of unchanged scores is zero and of a uniform drop is that drop") {
    CHECK(fg(single(40, {40, 40, 40})).fg == 0.0);
    CHECK(fg(single(40, {30, 30, 30})).fg == doctest::Approx(25.0));
    CHECK(fg(single(40, {50})).fg == doctest::Approx(-25.0));
  }

  TEST_CASE("fg is scale invariant and monotone") {
    const auto a = fg(single(37.1, {32.5, 34.2, 31.4})).fg;
    CHECK(fg(single(3.71, {3.25, 3.42, 3.14})).fg == doctest::Approx(a).epsilon(1e-12));
    CHECK(fg(single(37.1, {30.0, 34.2, 31.4})).fg > a);
    CHECK(fg(single(37.1, {32.5, 36.0, 31.4})).fg < a);
  }

  TEST_CASE("fg averages per task first, then over tasks") {
    CategoryResult two{Category::Reasoning, {{"x", 50, {40, 40}}, {"y", 10, {10, 5}}}};
    const auto e = fg(two);
    CHECK(e.steps == 2);
    REQUIRE(e.per_task.size() == 2);
    CHECK(e.per_task[0].second == doctest::Approx(20.0));
    CHECK(e.per_task[1].second == doctest::Approx(25.0));
    CHECK(e.fg == doctest::Approx(22.5));
  }

  TEST_CASE("fg rejects invalid inputs") {
    CHECK_THROWS_AS(fg(single(0, {1, 2})), InvalidBaselineError);
    CHECK_THROWS_AS(fg(single(std::nan(""), {1})), InvalidBaselineError);
    CHECK_THROWS_AS(fg(single(10, {})), ContractError);
    CHECK_THROWS_AS(fg(CategoryResult{}), ContractError);
    CategoryResult ragged{Category::Bias, {{"x", 50, {40, 40}}, {"y", 10, {10}}}};
    CHECK_THROWS_AS(fg(ragged), ContractError);
  }
}

TEST_SUITE("evaluate") {
  TEST_CASE("choice ties go to the lowest index") {
    const auto m = init_model<float>(tiny());
    EvalSuite s;
    s.name = "tie";
    s.category = Category::Reasoning;
    s.choice_items = {{"Q: which?", {"same", "same"}, 0}};
    CHECK(choice_accuracy(m, s).value == 100.0);
    s.choice_items[0].correct = 1;
    CHECK(choice_accuracy(m, s).value == 0.0);
  }

  TEST_CASE("empty and mismatched suites are data errors") {
    const auto m = init_model<float>(tiny());
    EvalSuite s;
    s.name = "empty";
    s.category = Category::Reasoning;
    CHECK_THROWS_AS(choice_accuracy(m, s), DataError);
    s.category = Category::Bias;
    CHECK_THROWS_AS(bias_percentage(m, s), DataError);
    s.pair_items = {{"a", "b"}};
    CHECK_THROWS_AS(choice_accuracy(m, s), DataError);
  }

  TEST_CASE("skipped items are counted, not scored") {
    const auto m = init_model<float>(tiny());
    EvalSuite s;
    s.name = "long";
    s.category = Category::DomainKnowledge;
    s.choice_items = {{"short", {"x", "y"}, 0}, {std::string(100, 'q'), {"x", "y"}, 0}};
    const auto r = choice_accuracy(m, s);
    CHECK(r.evaluated == 1);
    CHECK(r.skipped == 1);
  }

  TEST_CASE("bias: identical pairs score exactly 50") {
    const auto m = init_model<float>(tiny());
    EvalSuite s;
    s.name = "same";
    s.category = Category::Bias;
    for (const char* t : {"The nurse was kind.", "He fixed the car.", "They cooked dinner."}) s.pair_items.push_back({t, t});
    CHECK(bias_percentage(m, s).value == 50.0);
    CHECK(bias_percentage(m, s, {true}).value == 50.0);
  }

  TEST_CASE("bias: a single pair scores 0, 50 or 100") {
    const auto m = init_model<float>(tiny());
    EvalSuite s;
    s.name = "one";
    s.category = Category::Bias;
    s.pair_items = {{"Women are bad at math.", "Men are bad at math."}};
    const double v = bias_percentage(m, s).value;
    CHECK((v == 0.0 || v == 50.0 || v == 100.0));
    std::swap(s.pair_items[0].stereotype, s.pair_items[0].anti);
    CHECK(bias_percentage(m, s).value == 100.0 - v);
  }

  TEST_CASE("score_suite dispatches on category") {
    const auto m = init_model<float>(tiny());
    EvalSuite s;
    s.name = "bias";
    s.category = Category::Bias;
    s.pair_items = {{"a b", "a b"}};
    CHECK(score_suite(m, s).metric == "bias_percentage");
    EvalSuite c;
    c.name = "rank";
    c.category = Category::ReadingComprehension;
    c.metric = "recall@1";
    c.choice_items = {{"ctx", {"x", "y"}, 0}};
    CHECK(score_suite(m, c).metric == "recall@1");
  }
}
