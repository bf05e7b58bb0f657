#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sclm/corpus.hpp"

namespace sclm {

enum class TaskKind { simplify, dialogue, question };

std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& name);

/// Seeded instruction task with the structure of the named kind:
///
/// - simplify: drop the parenthetical clause and replace hard words from a
///   fixed hard-to-easy table.
/// - dialogue: an emotion-dependent opener followed by a follow-up about the
///   event the speaker mentions.
/// - question: turn "X do Y because Z." into "Why do X do Y?".
///
/// Train and test samples are distinct.
TaskSpec gen_synthetic_task(TaskKind kind, std::size_t n_train, std::size_t n_test,
                            std::uint64_t seed);

/// Hard -> easy replacements used by the simplify task.
const std::vector<std::pair<std::string, std::string>>& simplification_table();

struct PretrainCorpus {
  std::uint64_t seed = 0;
  std::vector<int> tokens;
};

/// Token stream of exactly `budget_tokens` ids drawn from a seeded grammar
/// over a fixed fact world. Documents start with BOS and end with EOS.
PretrainCorpus make_pretrain_corpus(std::uint64_t seed, std::size_t budget_tokens);

/// Bundled miniature suites: 4 domain-knowledge, 6 reasoning, 1 reading
/// comprehension and 9 bias sub-suites, answerable from the same fact world
/// the pretraining stream describes.
std::vector<EvalSuite> make_eval_suites();

}  // namespace sclm
