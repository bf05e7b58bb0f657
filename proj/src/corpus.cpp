#include "sclm/corpus.hpp"

#include <fstream>

namespace sclm {

std::vector<int> encode(std::string_view text) {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (char ch : text) ids.push_back(static_cast<int>(static_cast<unsigned char>(ch)));
  return ids;
}

std::string decode(std::span<const int> ids) {
  std::string out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id < 0 || id >= kTokenizerVocab) {
      throw InputError("decode: unknown token id " + std::to_string(id));
    }
    if (id < 256) out.push_back(static_cast<char>(static_cast<unsigned char>(id)));
  }
  return out;
}

void TaskSpec::apply_cap() {
  if (train.size() > max_samples) train.resize(max_samples);
}

const std::string_view kPreamble =
    "Below is an instruction that describes a task, paired with an input that provides further "
    "context. Write a response that appropriately completes the request.";
const std::string_view kResponseMarker = "###Response:";

std::string render_prompt(const InstructionSample& sample) {
  std::string text(kPreamble);
  text += '\n';
  text += sample.instruction;
  if (!sample.input.empty()) {
    text += "\nInput: ";
    text += sample.input;
  }
  text += '\n';
  text += kResponseMarker;
  text += '\n';
  return text;
}

std::vector<int> prompt_tokens(const InstructionSample& sample) {
  std::vector<int> ids{kBos};
  const auto body = encode(render_prompt(sample));
  ids.insert(ids.end(), body.begin(), body.end());
  return ids;
}

TrainingExample apply_template(const InstructionSample& sample, int max_seq_len) {
  TrainingExample ex;
  ex.tokens = prompt_tokens(sample);
  ex.mask.assign(ex.tokens.size(), 0);
  const auto out = encode(sample.output);
  ex.tokens.insert(ex.tokens.end(), out.begin(), out.end());
  ex.tokens.push_back(kEos);
  ex.mask.resize(ex.tokens.size(), 1);
  if (static_cast<int>(ex.tokens.size()) > max_seq_len) {
    throw SampleTooLongError("apply_template: rendered sample has " + std::to_string(ex.tokens.size()) +
                             " tokens, max_seq_len is " + std::to_string(max_seq_len));
  }
  return ex;
}

TemplatedSet template_all(std::span<const InstructionSample> samples, int max_seq_len) {
  TemplatedSet set;
  for (const auto& s : samples) {
    try {
      set.examples.push_back(apply_template(s, max_seq_len));
    } catch (const SampleTooLongError&) {
      ++set.skipped;
    }
  }
  return set;
}

// ---------------------------------------------------------------------------

std::string to_string(Category c) {
  switch (c) {
    case Category::DomainKnowledge: return "DomainKnowledge";
    case Category::Reasoning: return "Reasoning";
    case Category::ReadingComprehension: return "ReadingComprehension";
    case Category::Bias: return "Bias";
  }
  return "?";
}

std::string short_name(Category c) {
  switch (c) {
    case Category::DomainKnowledge: return "DK";
    case Category::Reasoning: return "Rs";
    case Category::ReadingComprehension: return "RC";
    case Category::Bias: return "Bias";
  }
  return "?";
}

Category category_from_string(const std::string& name) {
  for (Category c : kAllCategories) {
    if (name == to_string(c) || name == short_name(c)) return c;
  }
  throw ConfigError("unknown evaluation category '" + name + "'");
}

// ---------------------------------------------------------------------------

namespace {

template <typename Fn>
std::vector<LineError> for_each_record(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<LineError> errors;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (!j.is_object()) throw DataError("record is not a JSON object");
      fn(j);
    } catch (const nlohmann::json::exception& e) {
      errors.push_back({lineno, e.what()});
    } catch (const DataError& e) {
      errors.push_back({lineno, e.what()});
    }
  }
  return errors;
}

std::string require_string(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw DataError(std::string("missing field \"") + key + "\"");
  if (!j.at(key).is_string()) throw DataError(std::string("field \"") + key + "\" is not a string");
  return j.at(key).get<std::string>();
}

std::string default_name(const std::filesystem::path& path, const std::string& name) {
  return name.empty() ? path.stem().string() : name;
}

void write_lines(const std::filesystem::path& path, const std::vector<nlohmann::json>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : records) out << r.dump() << '\n';
}

}  // namespace

TaskLoad load_task_jsonl(const std::filesystem::path& path, const std::string& name) {
  TaskLoad result;
  result.task.name = default_name(path, name);
  result.errors = for_each_record(path, [&](const nlohmann::json& j) {
    InstructionSample s{require_string(j, "instruction"),
                        j.contains("input") ? require_string(j, "input") : std::string{},
                        require_string(j, "output")};
    if (s.output.empty()) throw DataError("field \"output\" is empty");
    const std::string split = j.contains("split") ? require_string(j, "split") : "train";
    if (split == "train") {
      result.task.train.push_back(std::move(s));
    } else if (split == "test") {
      result.task.test.push_back(std::move(s));
    } else {
      throw DataError("unknown split \"" + split + "\"");
    }
  });
  if (result.task.train.empty() && result.task.test.empty()) {
    throw DataError("task file " + path.string() + " has no usable records");
  }
  return result;
}

SuiteLoad load_suite_jsonl(const std::filesystem::path& path, Category category,
                           const std::string& name) {
  SuiteLoad result;
  result.suite.name = default_name(path, name);
  result.suite.category = category;
  result.errors = for_each_record(path, [&](const nlohmann::json& j) {
    if (category == Category::Bias) {
      result.suite.pair_items.push_back({require_string(j, "stereotype"), require_string(j, "anti")});
      return;
    }
    ChoiceItem item;
    item.context = require_string(j, "context");
    if (!j.contains("choices") || !j.at("choices").is_array()) throw DataError("missing array \"choices\"");
    for (const auto& c : j.at("choices")) {
      if (!c.is_string()) throw DataError("choice is not a string");
      item.choices.push_back(c.get<std::string>());
    }
    if (item.choices.size() < 2) throw DataError("fewer than two choices");
    if (!j.contains("correct") || !j.at("correct").is_number_integer()) {
      throw DataError("missing integer \"correct\"");
    }
    item.correct = j.at("correct").get<int>();
    if (item.correct < 0 || item.correct >= static_cast<int>(item.choices.size())) {
      throw DataError("\"correct\" index out of range");
    }
    result.suite.choice_items.push_back(std::move(item));
  });
  if (result.suite.size() == 0) throw DataError("suite file " + path.string() + " has no usable records");
  return result;
}

void write_task_jsonl(const TaskSpec& task, const std::filesystem::path& path) {
  std::vector<nlohmann::json> records;
  for (const auto& s : task.train) {
    records.push_back({{"instruction", s.instruction}, {"input", s.input}, {"output", s.output}});
  }
  for (const auto& s : task.test) {
    records.push_back(
        {{"instruction", s.instruction}, {"input", s.input}, {"output", s.output}, {"split", "test"}});
  }
  write_lines(path, records);
}

void write_suite_jsonl(const EvalSuite& suite, const std::filesystem::path& path) {
  std::vector<nlohmann::json> records;
  for (const auto& it : suite.choice_items) {
    records.push_back({{"context", it.context}, {"choices", it.choices}, {"correct", it.correct}});
  }
  for (const auto& it : suite.pair_items) {
    records.push_back({{"stereotype", it.stereotype}, {"anti", it.anti}});
  }
  write_lines(path, records);
}

}  // namespace sclm
