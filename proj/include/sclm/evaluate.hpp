#pragma once

#include <string>

#include "sclm/corpus.hpp"
#include "sclm/model.hpp"

namespace sclm {

struct SuiteScore {
  std::string suite;
  Category category = Category::DomainKnowledge;
  std::string metric;  // "accuracy", "recall@1" or "bias_percentage"
  double value = 0;  // percent
  std::size_t evaluated = 0;
  std::size_t skipped = 0;  // items longer than the context window
};

/// Scores each choice by its log-likelihood after BOS + context and predicts
/// the argmax (ties go to the lowest index). Returns 100 * correct / evaluated.
SuiteScore choice_accuracy(const TransformerModel& model, const EvalSuite& suite);

struct BiasOptions {
  /// Divide each sentence log-likelihood by its token count. Off by default.
  bool length_normalize = false;
};

/// Percentage of pairs whose stereotype sentence is more likely than the
/// anti-stereotype one; exact ties count one half.
SuiteScore bias_percentage(const TransformerModel& model, const EvalSuite& suite,
                           const BiasOptions& options = {});

/// Dispatches on the suite category.
SuiteScore score_suite(const TransformerModel& model, const EvalSuite& suite,
                       const BiasOptions& options = {});

}  // namespace sclm
