#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "sclm/corpus.hpp"
#include "sclm/synthetic.hpp"

using namespace sclm;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& content) {
  const auto p = fs::temp_directory_path() / name;
  std::ofstream(p) << content;
  return p;
}

std::size_t count_words(const std::string& s) {
  std::size_t n = 0;
  bool in = false;
  for (char c : s) {
    const bool space = c == ' ';
    if (!space && !in) ++n;
    in = !space;
  }
  return n;
}

}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("byte tokenizer round trips") {
    CHECK(decode(encode("hello")) == "hello");
    CHECK(encode("").empty());
    std::string all;
    for (int b = 0; b < 256; ++b) all.push_back(static_cast<char>(b));
    const auto ids = encode(all);
    for (int id : ids) CHECK(id < 256);
    CHECK(decode(ids) == all);
    std::vector<int> with_specials{kBos, 'h', 'i', kEos, kPad};
    CHECK(decode(with_specials) == "hi");
    std::vector<int> unknown{300};
    CHECK_THROWS_AS(decode(unknown), InputError);
  }

  TEST_CASE("template starts with the preamble and masks only the response") {
    InstructionSample s{"Rewrite this sentence in simpler words:", "The cat sat.", "A cat sat."};
    const auto text = render_prompt(s);
    CHECK(text.rfind("Below is an instruction that describes a task", 0) == 0);
    CHECK(text.find("###Response:") != std::string::npos);
    CHECK(text.find("Input: The cat sat.") != std::string::npos);
    const auto ex = apply_template(s, 384);
    CHECK(ex.tokens.front() == kBos);
    CHECK(ex.tokens.back() == kEos);
    std::size_t masked = 0;
    for (auto m : ex.mask) masked += m;
    CHECK(masked == encode(s.output).size() + 1);
    // The masked tail is exactly output + EOS.
    const auto first = std::find(ex.mask.begin(), ex.mask.end(), 1) - ex.mask.begin();
    std::vector<int> tail(ex.tokens.begin() + first, ex.tokens.end() - 1);
    CHECK(decode(tail) == s.output);
    CHECK(prompt_tokens(s) == std::vector<int>(ex.tokens.begin(), ex.tokens.begin() + first));

    InstructionSample no_input{"Say hi:", "", "hi"};
    CHECK(render_prompt(no_input).find("Input:") == std::string::npos);
    CHECK(render_prompt(no_input).find("Say hi:") != std::string::npos);
  }

  TEST_CASE("over-long samples are skipped and counted") {
    std::vector<InstructionSample> samples{{"a", "", "short"}, {"a", std::string(400, 'x'), "long"}};
    CHECK_THROWS_AS(apply_template(samples[1], 384), SampleTooLongError);
    const auto set = template_all(samples, 384);
    CHECK(set.examples.size() == 1);
    CHECK(set.skipped == 1);
  }

  TEST_CASE("templating is injective on triples") {
    const auto task = gen_synthetic_task(TaskKind::dialogue, 60, 10, 3);
    std::set<std::vector<int>> seen;
    for (const auto& s : task.train) CHECK(seen.insert(apply_template(s, 384).tokens).second);
    InstructionSample a{"x", "y", "z"}, b{"x", "", "y\nz"};
    CHECK(apply_template(a, 384).tokens != apply_template(b, 384).tokens);
  }

  TEST_CASE("synthetic tasks are deterministic and disjoint") {
    for (auto kind : {TaskKind::simplify, TaskKind::dialogue, TaskKind::question}) {
      const auto a = gen_synthetic_task(kind, 50, 10, 42);
      const auto b = gen_synthetic_task(kind, 50, 10, 42);
      CHECK(a.train == b.train);
      CHECK(a.test == b.test);
      CHECK(a.train.size() == 50);
      CHECK(a.test.size() == 10);
      for (const auto& t : a.test) CHECK(std::find(a.train.begin(), a.train.end(), t) == a.train.end());
      for (const auto& s : a.train) CHECK_FALSE(s.output.empty());
      const auto c = gen_synthetic_task(kind, 50, 10, 43);
      CHECK_FALSE(a.train == c.train);
    }
  }

  TEST_CASE("simplify targets are never longer than sources") {
    const auto t = gen_synthetic_task(TaskKind::simplify, 200, 20, 9);
    for (const auto& s : t.train) {
      CHECK(encode(s.output).size() <= encode(s.input).size());
      CHECK(count_words(s.output) <= count_words(s.input));
    }
  }

  TEST_CASE("a trigram count model beats uniform on held-out targets") {
    for (auto kind : {TaskKind::simplify, TaskKind::dialogue, TaskKind::question}) {
      const auto t = gen_synthetic_task(kind, 300, 40, 5);
      std::map<std::array<int, 3>, double> tri;
      std::map<std::array<int, 2>, double> bi;
      auto seq = [](const InstructionSample& s) {
        std::vector<int> ids{kBos, kBos};
        const auto o = encode(s.output);
        ids.insert(ids.end(), o.begin(), o.end());
        ids.push_back(kEos);
        return ids;
      };
      for (const auto& s : t.train) {
        const auto ids = seq(s);
        for (std::size_t i = 2; i < ids.size(); ++i) {
          tri[{ids[i - 2], ids[i - 1], ids[i]}] += 1;
          bi[{ids[i - 2], ids[i - 1]}] += 1;
        }
      }
      // Add-one smoothed trigram cross-entropy vs. ln(259) for a uniform model.
      double nll = 0;
      double n = 0;
      for (const auto& s : t.test) {
        const auto ids = seq(s);
        for (std::size_t i = 2; i < ids.size(); ++i) {
          const double c3 = tri.count({ids[i - 2], ids[i - 1], ids[i]}) ? tri[{ids[i - 2], ids[i - 1], ids[i]}] : 0;
          const double c2 = bi.count({ids[i - 2], ids[i - 1]}) ? bi[{ids[i - 2], ids[i - 1]}] : 0;
          nll -= std::log((c3 + 1) / (c2 + kTokenizerVocab));
          n += 1;
        }
      }
      CHECK(nll / n < std::log(static_cast<double>(kTokenizerVocab)));
    }
  }

  TEST_CASE("pretrain corpus: exact budget, deterministic, compressible") {
    const auto a = make_pretrain_corpus(7, 50000);
    CHECK(a.tokens.size() == 50000);
    CHECK(make_pretrain_corpus(7, 50000).tokens == a.tokens);
    CHECK_FALSE(make_pretrain_corpus(8, 50000).tokens == a.tokens);
    CHECK(make_pretrain_corpus(7, 1).tokens.size() == 1);
    std::map<int, double> freq;
    for (int t : a.tokens) freq[t] += 1;
    double h = 0;
    for (const auto& [_, c] : freq) {
      const double p = c / static_cast<double>(a.tokens.size());
      h -= p * std::log2(p);
    }
    CHECK(h < 8.0);
  }

  TEST_CASE("max_samples caps the training set") {
    auto t = gen_synthetic_task(TaskKind::question, 40, 5, 1);
    t.max_samples = 10;
    t.apply_cap();
    CHECK(t.train.size() == 10);
  }

  TEST_CASE("task JSONL: valid lines, line-numbered errors, round trip") {
    const auto ok = temp_file("sclm_task_ok.jsonl",
                              "{\"instruction\":\"i\",\"input\":\"a\",\"output\":\"b\"}\n"
                              "{\"instruction\":\"i\",\"input\":\"\",\"output\":\"c\"}\n"
                              "{\"instruction\":\"i\",\"output\":\"d\",\"split\":\"test\"}\n");
    auto loaded = load_task_jsonl(ok, "demo");
    CHECK(loaded.errors.empty());
    CHECK(loaded.task.train.size() == 2);
    CHECK(loaded.task.test.size() == 1);

    const auto bad = temp_file("sclm_task_bad.jsonl",
                               "{\"instruction\":\"i\",\"input\":\"a\",\"output\":\"b\"}\n"
                               "{\"instruction\":\"i\",\"input\":\"a\"}\n"
                               "not json\n");
    loaded = load_task_jsonl(bad, "demo");
    REQUIRE(loaded.errors.size() == 2);
    CHECK(loaded.errors[0].line == 2);
    CHECK(loaded.errors[0].message.find("output") != std::string::npos);
    CHECK(loaded.errors[1].line == 3);
    CHECK(loaded.task.train.size() == 1);

    const auto task = gen_synthetic_task(TaskKind::simplify, 20, 5, 2);
    const auto out = fs::temp_directory_path() / "sclm_task_rt.jsonl";
    write_task_jsonl(task, out);
    const auto back = load_task_jsonl(out, task.name);
    CHECK(back.task.train == task.train);
    CHECK(back.task.test == task.test);
    CHECK_THROWS_AS(load_task_jsonl("/nonexistent/file.jsonl"), DataError);
    const auto empty = temp_file("sclm_task_empty.jsonl", "\n");
    CHECK_THROWS_AS(load_task_jsonl(empty), DataError);
  }

  TEST_CASE("suite JSONL round trip and category contracts") {
    for (const auto& s : make_eval_suites()) {
      const auto p = fs::temp_directory_path() / ("sclm_suite_" + s.name + ".jsonl");
      write_suite_jsonl(s, p);
      const auto back = load_suite_jsonl(p, s.category, s.name);
      CHECK(back.errors.empty());
      CHECK(back.suite.size() == s.size());
      if (s.category == Category::Bias) {
        CHECK(back.suite.choice_items.empty());
      } else {
        CHECK(back.suite.pair_items.empty());
      }
    }
    const auto wrong = temp_file("sclm_suite_wrong.jsonl",
                                   "{\"context\":\"q\",\"choices\":[\"a\",\"b\"],\"correct\":1}\n"
                                   "{\"stereotype\":\"a\",\"anti\":\"b\"}\n");
    const auto mixed = load_suite_jsonl(wrong, Category::Reasoning);
    CHECK(mixed.suite.size() == 1);
    REQUIRE(mixed.errors.size() == 1);
    CHECK(mixed.errors[0].line == 2);
  }

  TEST_CASE("bundled suites follow the category cardinalities") {
    std::map<Category, int> per;
    for (const auto& s : make_eval_suites()) ++per[s.category];
    CHECK(per[Category::DomainKnowledge] == 4);
    CHECK(per[Category::Reasoning] == 6);
    CHECK(per[Category::ReadingComprehension] == 1);
    CHECK(per[Category::Bias] == 9);
  }
}
