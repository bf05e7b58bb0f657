#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sclm/evaluate.hpp"
#include "sclm/metrics.hpp"

namespace sclm {

/// One logged loss value. `split` is "train", "validation" or "epoch_border"
/// (a marker row whose loss is the validation loss at that border).
struct LossPoint {
  std::string stage;  // "pretrain", "continue" or the fine-tuning task name
  long step = 0;
  std::string split;
  double loss = 0;
  int epoch = 0;
};

struct RegistryEntry {
  std::string label;  // "M0", "M1", "M1/E2", ...
  std::string path;  // relative to the run directory
  std::string task;
  int epoch = 0;  // 0 for task-final and M0 entries
};

/// Rows are suites, columns are the labelled checkpoints M0 ... MN.
struct EvalMatrix {
  struct Row {
    std::string suite;
    Category category = Category::DomainKnowledge;
    std::string metric;
    std::vector<double> values;
    std::vector<std::size_t> skipped;
  };
  std::vector<std::string> checkpoints;
  std::vector<Row> rows;

  /// Appends one checkpoint column; the suite order must match existing rows.
  void append(const std::string& label, const std::vector<SuiteScore>& column);
  /// Per-category R matrix in the shape `fg` consumes.
  CategoryResult category_result(Category category) const;
};

struct InferenceRow {
  std::string task;
  std::string checkpoint;
  std::size_t samples = 0;
  double bleu = 0;
  double rouge1 = 0;
  double rouge2 = 0;
  double rougeL = 0;
  double sari = 0;
};

struct FgValue {
  Category category = Category::DomainKnowledge;
  bool valid = false;
  ForgettingEntry entry;
  std::string error;  // set when the baseline made FG undefined
};

struct TaskDataStats {
  std::string task;
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
  std::size_t skipped = 0;  // over-long samples
};

struct ArmReport {
  std::string arm;  // "scratch" or "stack"
  std::vector<RegistryEntry> registry;
  EvalMatrix evaluation;
  std::vector<FgValue> fg;
  std::vector<LossPoint> losses;
  std::vector<InferenceRow> inference;
  std::vector<TaskDataStats> data;
};

struct RunReport {
  nlohmann::json config;  // snapshot, excluding the output directory
  std::uint64_t seed = 0;
  std::vector<ArmReport> arms;
};

/// FG for every category present in the matrix, in canonical category order.
std::vector<FgValue> compute_fg(const EvalMatrix& matrix);

nlohmann::json losses_to_json(const std::vector<LossPoint>& losses);
std::vector<LossPoint> losses_from_json(const nlohmann::json& j);
nlohmann::json registry_to_json(const std::vector<RegistryEntry>& registry);
std::vector<RegistryEntry> registry_from_json(const nlohmann::json& j);
nlohmann::json data_stats_to_json(const std::vector<TaskDataStats>& data);
std::vector<TaskDataStats> data_stats_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ArmReport& arm);
ArmReport arm_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunReport& report);
RunReport run_report_from_json(const nlohmann::json& j);

RunReport load_report(const std::filesystem::path& path);

/// Writes report.json, metrics.csv, loss_curves.csv and fg_summary.csv.
void emit_report(const RunReport& report, const std::filesystem::path& dir);

void write_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace sclm
