#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sclm/corpus.hpp"

namespace sclm {

using Tokens = std::vector<std::string>;

/// Lowercases, detaches ASCII punctuation into separate tokens, splits on
/// whitespace.
Tokens metric_tokens(std::string_view text);

/// Sentence BLEU in [0, 1]: geometric mean of clipped n-gram precisions
/// (add-one smoothing for n >= 2) times the brevity penalty against the
/// closest reference length.
double bleu(const Tokens& hypothesis, std::span<const Tokens> references, int max_n = 4);
double bleu(std::string_view hypothesis, std::span<const std::string> references, int max_n = 4);

/// ROUGE-N F1 in [0, 1].
double rouge_n(const Tokens& hypothesis, const Tokens& reference, int n);
double rouge_n(std::string_view hypothesis, std::string_view reference, int n);

/// ROUGE-L F1 from the longest common subsequence.
double rouge_l(const Tokens& hypothesis, const Tokens& reference);
double rouge_l(std::string_view hypothesis, std::string_view reference);

/// SARI in [0, 100]: mean over n = 1..4 of (F1_add + F1_keep + P_del) / 3.
/// An operation whose candidate and gold sets are both empty scores 1.
double sari(const Tokens& source, const Tokens& hypothesis, std::span<const Tokens> references);
double sari(std::string_view source, std::string_view hypothesis, std::span<const std::string> references);

/// Per-n operation scores behind `sari`.
struct SariComponents {
  double keep_f1 = 0;
  double delete_precision = 0;
  double add_f1 = 0;
};
SariComponents sari_ngram(const Tokens& source, const Tokens& hypothesis,
                          std::span<const Tokens> references, int n);

// ---------------------------------------------------------------------------
// Forgetting

/// Baseline R_o and post-task scores R_1..R_N (percent) for one evaluation task.
struct TaskScores {
  std::string name;
  double baseline = 0;
  std::vector<double> after;
};

struct CategoryResult {
  Category category = Category::DomainKnowledge;
  std::vector<TaskScores> tasks;
};

struct ForgettingEntry {
  Category category = Category::DomainKnowledge;
  double fg = 0;
  int steps = 0;  // N
  std::vector<std::pair<std::string, double>> per_task;
};

class InvalidBaselineError : public DataError {
 public:
  using DataError::DataError;
};

/// Mean relative drop from baseline, in percent, averaged over fine-tuning
/// steps and then over the category's evaluation tasks. Negative values mean
/// the scores improved.
ForgettingEntry fg(const CategoryResult& category);

}  // namespace sclm
