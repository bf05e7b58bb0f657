#include "sclm/evaluate.hpp"

namespace sclm {

namespace {

std::vector<int> with_bos(std::string_view text) {
  std::vector<int> ids{kBos};
  const auto body = encode(text);
  ids.insert(ids.end(), body.begin(), body.end());
  return ids;
}

bool fits(const TransformerModel& model, std::size_t tokens) {
  return static_cast<int>(tokens) <= model.config.max_seq_len;
}

}  // namespace

SuiteScore choice_accuracy(const TransformerModel& model, const EvalSuite& suite) {
  if (suite.category == Category::Bias || !suite.pair_items.empty()) {
    throw DataError("choice_accuracy: suite '" + suite.name + "' holds pair items");
  }
  if (suite.choice_items.empty()) throw DataError("choice_accuracy: suite '" + suite.name + "' is empty");
  SuiteScore score{suite.name, suite.category, suite.metric, 0.0, 0, 0};
  std::size_t correct = 0;
  for (const auto& item : suite.choice_items) {
    const auto context = with_bos(item.context);
    std::vector<std::vector<int>> options;
    bool too_long = false;
    for (const auto& c : item.choices) {
      options.push_back(encode(c));
      if (options.back().empty()) throw DataError("choice_accuracy: empty choice in suite '" + suite.name + "'");
      too_long = too_long || !fits(model, context.size() + options.back().size());
    }
    if (too_long) {
      ++score.skipped;
      continue;
    }
    int best = 0;
    double best_lp = 0.0;
    for (std::size_t i = 0; i < options.size(); ++i) {
      const double lp = sequence_logprob(model, context, options[i]);
      if (i == 0 || lp > best_lp) {
        best_lp = lp;
        best = static_cast<int>(i);
      }
    }
    ++score.evaluated;
    if (best == item.correct) ++correct;
  }
  if (score.evaluated == 0) {
    throw DataError("choice_accuracy: every item of suite '" + suite.name + "' exceeds the context window");
  }
  score.value = 100.0 * static_cast<double>(correct) / static_cast<double>(score.evaluated);
  return score;
}

SuiteScore bias_percentage(const TransformerModel& model, const EvalSuite& suite, const BiasOptions& options) {
  if (suite.category != Category::Bias || !suite.choice_items.empty()) {
    throw DataError("bias_percentage: suite '" + suite.name + "' is not a pair suite");
  }
  if (suite.pair_items.empty()) throw DataError("bias_percentage: suite '" + suite.name + "' is empty");
  SuiteScore score{suite.name, suite.category, "bias_percentage", 0.0, 0, 0};
  const std::vector<int> bos{kBos};
  double hits = 0.0;
  for (const auto& pair : suite.pair_items) {
    const auto stereo = encode(pair.stereotype);
    const auto anti = encode(pair.anti);
    if (stereo.empty() || anti.empty()) throw DataError("bias_percentage: empty sentence in suite '" + suite.name + "'");
    if (!fits(model, stereo.size() + 1) || !fits(model, anti.size() + 1)) {
      ++score.skipped;
      continue;
    }
    double a = sequence_logprob(model, bos, stereo);
    double b = sequence_logprob(model, bos, anti);
    if (options.length_normalize) {
      a /= static_cast<double>(stereo.size());
      b /= static_cast<double>(anti.size());
    }
    hits += a > b ? 1.0 : (a < b ? 0.0 : 0.5);
    ++score.evaluated;
  }
  if (score.evaluated == 0) {
    throw DataError("bias_percentage: every pair of suite '" + suite.name + "' exceeds the context window");
  }
  score.value = 100.0 * hits / static_cast<double>(score.evaluated);
  return score;
}

SuiteScore score_suite(const TransformerModel& model, const EvalSuite& suite, const BiasOptions& options) {
  return suite.category == Category::Bias ? bias_percentage(model, suite, options)
                                          : choice_accuracy(model, suite);
}

}  // namespace sclm
