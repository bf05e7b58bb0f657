#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sclm/model.hpp"

namespace sclm {

// ---------------------------------------------------------------------------
// Byte tokenizer: ids 0-255 are raw bytes, followed by three specials.

inline constexpr int kBos = 256;
inline constexpr int kEos = 257;
inline constexpr int kPad = 258;
inline constexpr int kTokenizerVocab = 259;

std::vector<int> encode(std::string_view text);
/// Specials are dropped; ids outside [0, 259) raise InputError.
std::string decode(std::span<const int> ids);

// ---------------------------------------------------------------------------
// Instruction data

struct InstructionSample {
  std::string instruction;
  std::string input;
  std::string output;

  bool operator==(const InstructionSample&) const = default;
};

struct TaskSpec {
  std::string name;
  std::vector<InstructionSample> train;
  std::vector<InstructionSample> test;
  std::size_t max_samples = 100000;
  std::string template_id = "general";

  /// Truncates `train` to `max_samples`.
  void apply_cap();
};

/// Fixed preamble placed before every instruction.
extern const std::string_view kPreamble;
extern const std::string_view kResponseMarker;

/// Rendered prompt text (everything up to and including the response marker).
std::string render_prompt(const InstructionSample& sample);

class SampleTooLongError : public InputError {
 public:
  using InputError::InputError;
};

/// BOS + prompt + output + EOS, with the loss mask set exactly on the output
/// bytes and the EOS.
TrainingExample apply_template(const InstructionSample& sample, int max_seq_len);

/// BOS + prompt, the generation context for a sample.
std::vector<int> prompt_tokens(const InstructionSample& sample);

/// Templates every sample, skipping over-long ones.
struct TemplatedSet {
  std::vector<TrainingExample> examples;
  std::size_t skipped = 0;
};
TemplatedSet template_all(std::span<const InstructionSample> samples, int max_seq_len);

// ---------------------------------------------------------------------------
// Evaluation suites

enum class Category { DomainKnowledge, Reasoning, ReadingComprehension, Bias };

inline constexpr Category kAllCategories[] = {Category::DomainKnowledge, Category::Reasoning,
                                              Category::ReadingComprehension, Category::Bias};

std::string to_string(Category c);
std::string short_name(Category c);  // DK, Rs, RC, Bias
Category category_from_string(const std::string& name);

struct ChoiceItem {
  std::string context;
  std::vector<std::string> choices;
  int correct = 0;
};

struct PairItem {
  std::string stereotype;
  std::string anti;
};

struct EvalSuite {
  std::string name;
  Category category = Category::DomainKnowledge;
  std::string metric = "accuracy";  // "recall@1" for ranking suites; same computation
  std::vector<ChoiceItem> choice_items;  // non-bias categories
  std::vector<PairItem> pair_items;  // bias category

  std::size_t size() const { return choice_items.size() + pair_items.size(); }
};

// ---------------------------------------------------------------------------
// JSONL files

struct LineError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct TaskLoad {
  TaskSpec task;
  std::vector<LineError> errors;
};

struct SuiteLoad {
  EvalSuite suite;
  std::vector<LineError> errors;
};

/// One `{instruction, input, output}` object per line; an optional
/// `"split": "test"` routes a record to the test set.
TaskLoad load_task_jsonl(const std::filesystem::path& path, const std::string& name = {});

/// Choice records `{context, choices, correct}` for non-bias categories, pair
/// records `{stereotype, anti}` for bias.
SuiteLoad load_suite_jsonl(const std::filesystem::path& path, Category category,
                           const std::string& name = {});

void write_task_jsonl(const TaskSpec& task, const std::filesystem::path& path);
void write_suite_jsonl(const EvalSuite& suite, const std::filesystem::path& path);

}  // namespace sclm
