#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sclm/corpus.hpp"
#include "sclm/evaluate.hpp"
#include "sclm/growth.hpp"
#include "sclm/model.hpp"
#include "sclm/optim.hpp"
#include "sclm/report.hpp"
#include "sclm/synthetic.hpp"

namespace sclm {

/// Fine-tuning hyperparameters for one task.
struct TrainingConfig {
  std::string preset = "constant";
  int epochs = 3;
  int batch_size = 8;
  int grad_accum = 1;
  ScheduleKind schedule = ScheduleKind::constant;
  double lr = 2e-5;
  double min_lr = -1;  // negative: 0.1 x lr
  long warmup_steps = 0;
  double warmup_fraction = -1;  // when >= 0, overrides warmup_steps
  double weight_decay = 0.0;
  int log_interval = 10;  // optimizer steps between train-loss points

  /// "constant": LR 2e-5, no warmup, no decay, batch 8.
  /// "regularized": cosine, LR 2e-5, weight decay 0.01, 100 warmup steps, batch 16 x 2.
  static TrainingConfig preset_named(const std::string& name);

  void validate(const std::string& where) const;
  ScheduleSpec schedule_for(long total_steps) const;
};

struct TaskConfig {
  std::string name;
  std::optional<TaskKind> kind;  // synthetic generator, or
  std::filesystem::path file;  // a JSONL task file
  std::size_t n_train = 300;
  std::size_t n_test = 30;
  std::size_t max_samples = 100000;
  std::optional<std::uint64_t> seed;
  TrainingConfig training;
};

struct SuiteConfig {
  std::string name;
  Category category = Category::DomainKnowledge;
  std::filesystem::path path;
  std::string metric = "accuracy";
};

struct PretrainConfig {
  long small_tokens = 500000;  // budget d for the small model
  long post_growth_tokens = 1500000;  // continuation budget; also the scratch arm's budget
  int seq_len = 128;
  int batch_size = 8;
  ScheduleKind schedule = ScheduleKind::cosine;
  double lr = 3e-3;
  double min_lr = -1;
  long warmup_steps = 50;
  double weight_decay = 0.01;
  int log_interval = 25;

  void validate(int max_seq_len) const;
  long tokens_per_step() const { return static_cast<long>(seq_len) * batch_size; }
  long steps_for(long budget) const { return budget / tokens_per_step(); }
};

struct InferenceConfig {
  std::size_t samples = 8;  // leading test samples per task
  int max_new = 48;
};

struct ExperimentConfig {
  ModelConfig model;  // n_layers is the small (pre-growth) depth
  GrowthSpec growth;
  PretrainConfig pretrain;
  std::vector<TaskConfig> tasks;
  std::vector<SuiteConfig> suites;
  InferenceConfig inference;
  BiasOptions bias;
  std::uint64_t seed = 1234;
  std::filesystem::path output_dir = "runs/default";
  std::filesystem::path base_dir;  // relative paths resolve against this

  /// Parses and validates; relative paths resolve against the file's directory.
  static ExperimentConfig load(const std::filesystem::path& path);
  static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  void validate() const;

  /// Normalized configuration without the output directory.
  nlohmann::json snapshot() const;

  ModelConfig small_model() const;
  ModelConfig target_model() const;
  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

/// Stable per-purpose seed derived from the experiment seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose);

enum class Arm { scratch, stack };
std::string to_string(Arm arm);
std::vector<Arm> arms_from_string(const std::string& name);  // scratch | stack | both

// ---------------------------------------------------------------------------

struct StageResult {
  TransformerModel model;
  std::vector<LossPoint> curve;
};

/// Trains `model` on a fresh corpus of `budget` tokens. Non-finite loss writes
/// a diagnostic snapshot into `diagnostics_dir` (when set) and throws NumericError.
StageResult pretrain_model(TransformerModel model, const PretrainConfig& config, long budget,
                           std::uint64_t corpus_seed, const std::string& stage,
                           const std::filesystem::path& diagnostics_dir = {});

/// Grows, resets optimizer state and continues pretraining for `budget` tokens.
StageResult grow_and_continue(const TransformerModel& small, const GrowthSpec& growth,
                              const PretrainConfig& config, long budget, std::uint64_t corpus_seed,
                              const std::filesystem::path& diagnostics_dir = {});

struct PreparedTask {
  std::string name;
  std::vector<TrainingExample> train;
  std::vector<TrainingExample> validation;
  std::vector<InstructionSample> test;
  TaskDataStats stats;
};

/// Loads or generates the task, templates it and holds out 10% for validation.
PreparedTask prepare_task(const ExperimentConfig& config, const TaskConfig& task);

/// Token-weighted mean masked loss, no graph.
double evaluate_loss(const TransformerModel& model, std::span<const TrainingExample> examples,
                     int batch_size = 16);

struct FinetuneResult {
  std::vector<TransformerModel> finals;  // M_1 ... M_N
  std::vector<RegistryEntry> registry;  // M_0, then per task: E1 ... Ek, M_m
  std::vector<LossPoint> curve;
  std::vector<TaskDataStats> data;
};

/// Observes every micro-batch; used to audit that batches only hold the current task.
using BatchHook = std::function<void(const std::string& task, std::span<const TrainingExample> batch)>;

/// Sequential fine-tuning without rehearsal. Checkpoints go to `arm_dir`,
/// registry paths are relative to `run_dir`.
FinetuneResult finetune_sequential(const TransformerModel& m0, const ExperimentConfig& config,
                                   const std::filesystem::path& run_dir, const std::string& arm,
                                   const BatchHook& on_batch = {});

std::vector<SuiteScore> evaluate_all(const TransformerModel& model, std::span<const EvalSuite> suites,
                                     const BiasOptions& bias = {});

std::vector<EvalSuite> load_suites(const ExperimentConfig& config);

InferenceRow inference_scores(const TransformerModel& model, const std::string& label,
                              const PreparedTask& task, const InferenceConfig& config);

// Staged pipeline. Each stage reads and writes artifacts under <out>/<arm>/.

void stage_pretrain(const ExperimentConfig& config, Arm arm);
void stage_grow(const ExperimentConfig& config);
void stage_finetune(const ExperimentConfig& config, Arm arm, const BatchHook& on_batch = {});
ArmReport stage_eval(const ExperimentConfig& config, Arm arm);
RunReport stage_report(const ExperimentConfig& config, std::span<const Arm> arms);

/// Every stage for the requested arms, then emit_report into the output directory.
RunReport run_experiment(const ExperimentConfig& config, std::span<const Arm> arms);

}  // namespace sclm
