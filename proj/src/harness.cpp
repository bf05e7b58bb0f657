#include "sclm/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "sclm/checkpoint.hpp"
#include "sclm/metrics.hpp"

namespace sclm {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

TrainingConfig TrainingConfig::preset_named(const std::string& name) {
  TrainingConfig t;
  t.preset = name;
  if (name == "constant") {
    t.batch_size = 8;
    t.grad_accum = 1;
    t.schedule = ScheduleKind::constant;
    t.lr = 2e-5;
    t.weight_decay = 0.0;
    t.warmup_steps = 0;
  } else if (name == "regularized") {
    t.batch_size = 16;
    t.grad_accum = 2;
    t.schedule = ScheduleKind::cosine;
    t.lr = 2e-5;
    t.weight_decay = 0.01;
    t.warmup_steps = 100;
  } else {
    throw ConfigError("unknown training preset '" + name + "' (expected constant or regularized)");
  }
  return t;
}

void TrainingConfig::validate(const std::string& where) const {
  auto fail = [&](const std::string& m) { throw ConfigError(where + ": " + m); };
  if (epochs < 1) fail("epochs must be at least 1");
  if (batch_size < 1) fail("batch_size must be at least 1");
  if (grad_accum < 1) fail("grad_accum must be at least 1");
  if (!(lr > 0.0)) fail("lr must be positive");
  if (min_lr > lr) fail("min_lr must not exceed lr");
  if (warmup_steps < 0) fail("warmup_steps must be non-negative");
  if (warmup_fraction > 1.0) fail("warmup_fraction must lie in [0, 1]");
  if (weight_decay < 0.0) fail("weight_decay must be non-negative");
  if (log_interval < 1) fail("log_interval must be at least 1");
}

ScheduleSpec TrainingConfig::schedule_for(long total_steps) const {
  ScheduleSpec s;
  s.kind = schedule;
  s.base_lr = lr;
  s.min_lr = min_lr >= 0 ? min_lr : 0.1 * lr;
  s.total_steps = total_steps;
  s.warmup_steps = warmup_fraction >= 0 ? std::lround(warmup_fraction * static_cast<double>(total_steps))
                                        : warmup_steps;
  if (s.warmup_steps > total_steps) {
    throw ConfigError("warmup of " + std::to_string(s.warmup_steps) + " steps exceeds the " +
                      std::to_string(total_steps) + " optimizer steps of the task");
  }
  s.validate();
  return s;
}

void PretrainConfig::validate(int max_seq_len) const {
  auto fail = [](const std::string& m) { throw ConfigError("pretrain: " + m); };
  if (seq_len < 2) fail("seq_len must be at least 2");
  if (seq_len > max_seq_len) fail("seq_len exceeds the model's max_seq_len");
  if (batch_size < 1) fail("batch_size must be at least 1");
  if (!(lr > 0.0)) fail("lr must be positive");
  if (min_lr > lr) fail("min_lr must not exceed lr");
  if (warmup_steps < 0) fail("warmup_steps must be non-negative");
  if (weight_decay < 0.0) fail("weight_decay must be non-negative");
  if (log_interval < 1) fail("log_interval must be at least 1");
  if (steps_for(small_tokens) < 1) {
    fail("small_tokens budget of " + std::to_string(small_tokens) + " gives zero optimizer steps (one step is " +
         std::to_string(tokens_per_step()) + " tokens)");
  }
  if (steps_for(post_growth_tokens) < 1) {
    fail("post_growth_tokens budget of " + std::to_string(post_growth_tokens) + " gives zero optimizer steps");
  }
  if (warmup_steps > steps_for(small_tokens)) fail("warmup_steps exceed the small-model step count");
}

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

TrainingConfig training_from_json(const json& j, const std::string& where) {
  check_keys(j, where, {"preset", "epochs", "batch_size", "grad_accum", "schedule", "lr", "min_lr",
                        "warmup_steps", "warmup_fraction", "weight_decay", "log_interval"});
  auto t = TrainingConfig::preset_named(j.value("preset", std::string("constant")));
  t.epochs = j.value("epochs", t.epochs);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.grad_accum = j.value("grad_accum", t.grad_accum);
  if (j.contains("schedule")) t.schedule = schedule_kind_from_string(j.at("schedule").get<std::string>());
  t.lr = j.value("lr", t.lr);
  t.min_lr = j.value("min_lr", t.min_lr);
  t.warmup_steps = j.value("warmup_steps", t.warmup_steps);
  t.warmup_fraction = j.value("warmup_fraction", t.warmup_fraction);
  t.weight_decay = j.value("weight_decay", t.weight_decay);
  t.log_interval = j.value("log_interval", t.log_interval);
  return t;
}

json training_to_json(const TrainingConfig& t) {
  return {{"preset", t.preset},         {"epochs", t.epochs},
          {"batch_size", t.batch_size}, {"grad_accum", t.grad_accum},
          {"schedule", to_string(t.schedule)},
          {"lr", t.lr},                 {"min_lr", t.min_lr},
          {"warmup_steps", t.warmup_steps},
          {"warmup_fraction", t.warmup_fraction},
          {"weight_decay", t.weight_decay},
          {"log_interval", t.log_interval}};
}

}  // namespace

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed JSON in config " + path.string() + ": " + e.what());
  }
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return from_json(j, base);
}

ExperimentConfig ExperimentConfig::from_json(const json& j, const fs::path& base_dir) {
  ExperimentConfig c;
  c.base_dir = base_dir;
  try {
    check_keys(j, "config",
               {"seed", "output_dir", "model", "growth", "pretrain", "tasks", "suites", "inference", "bias"});
    c.seed = j.value("seed", c.seed);
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("model")) {
      check_keys(j.at("model"), "model",
                 {"vocab_size", "d_model", "n_heads", "n_layers", "d_ff", "max_seq_len", "norm_eps", "rope_theta",
                  "seed"});
      c.model = j.at("model").get<ModelConfig>();
    }
    if (j.contains("growth")) {
      check_keys(j.at("growth"), "growth", {"factor", "mode", "span"});
      c.growth = j.at("growth").get<GrowthSpec>();
    }
    if (j.contains("pretrain")) {
      const auto& p = j.at("pretrain");
      check_keys(p, "pretrain",
                 {"small_tokens", "post_growth_tokens", "seq_len", "batch_size", "schedule", "lr", "min_lr",
                  "warmup_steps", "weight_decay", "log_interval"});
      auto& d = c.pretrain;
      d.small_tokens = p.value("small_tokens", d.small_tokens);
      d.post_growth_tokens = p.value("post_growth_tokens", d.post_growth_tokens);
      d.seq_len = p.value("seq_len", d.seq_len);
      d.batch_size = p.value("batch_size", d.batch_size);
      if (p.contains("schedule")) d.schedule = schedule_kind_from_string(p.at("schedule").get<std::string>());
      d.lr = p.value("lr", d.lr);
      d.min_lr = p.value("min_lr", d.min_lr);
      d.warmup_steps = p.value("warmup_steps", d.warmup_steps);
      d.weight_decay = p.value("weight_decay", d.weight_decay);
      d.log_interval = p.value("log_interval", d.log_interval);
    }
    for (const auto& t : j.value("tasks", json::array())) {
      check_keys(t, "task", {"name", "kind", "file", "n_train", "n_test", "max_samples", "seed", "training"});
      TaskConfig tc;
      tc.name = t.value("name", std::string());
      if (t.contains("kind")) tc.kind = task_kind_from_string(t.at("kind").get<std::string>());
      if (t.contains("file")) tc.file = t.at("file").get<std::string>();
      tc.n_train = t.value("n_train", tc.n_train);
      tc.n_test = t.value("n_test", tc.n_test);
      tc.max_samples = t.value("max_samples", tc.max_samples);
      if (t.contains("seed")) tc.seed = t.at("seed").get<std::uint64_t>();
      tc.training = training_from_json(t.value("training", json::object()), "task '" + tc.name + "' training");
      c.tasks.push_back(std::move(tc));
    }
    for (const auto& s : j.value("suites", json::array())) {
      check_keys(s, "suite", {"name", "category", "path", "metric"});
      SuiteConfig sc;
      sc.path = s.at("path").get<std::string>();
      sc.name = s.value("name", sc.path.stem().string());
      sc.category = category_from_string(s.at("category").get<std::string>());
      sc.metric = s.value("metric", sc.category == Category::Bias ? "bias_percentage" : "accuracy");
      c.suites.push_back(std::move(sc));
    }
    if (j.contains("inference")) {
      check_keys(j.at("inference"), "inference", {"samples", "max_new"});
      c.inference.samples = j.at("inference").value("samples", c.inference.samples);
      c.inference.max_new = j.at("inference").value("max_new", c.inference.max_new);
    }
    if (j.contains("bias")) {
      check_keys(j.at("bias"), "bias", {"length_normalize"});
      c.bias.length_normalize = j.at("bias").value("length_normalize", false);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

fs::path ExperimentConfig::resolve(const fs::path& p) const {
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

ModelConfig ExperimentConfig::small_model() const {
  auto m = model;
  m.seed = derive_seed(seed, "init/stack");
  return m;
}

ModelConfig ExperimentConfig::target_model() const {
  auto m = model;
  m.n_layers = growth.grown_depth(model.n_layers);
  m.seed = derive_seed(seed, "init/scratch");
  return m;
}

void ExperimentConfig::validate() const {
  try {
    model.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  if (model.vocab_size != kTokenizerVocab) {
    throw ConfigError("model: vocab_size must be " + std::to_string(kTokenizerVocab) + " for the byte tokenizer");
  }
  try {
    growth.validate(model.n_layers);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("growth: ") + e.what());
  }
  pretrain.validate(model.max_seq_len);
  if (tasks.empty()) throw ConfigError("config: at least one task is required");
  std::set<std::string> names;
  for (const auto& t : tasks) {
    if (t.name.empty()) throw ConfigError("task: name is required");
    if (t.name.find_first_of("/\\,") != std::string::npos || t.name.rfind('M', 0) == 0 || t.name == "." ||
        t.name == "..") {
      throw ConfigError("task '" + t.name + "': names must not contain separators or start with 'M'");
    }
    if (!names.insert(t.name).second) throw ConfigError("task '" + t.name + "' listed twice");
    if (t.kind.has_value() == !t.file.empty()) {
      throw ConfigError("task '" + t.name + "': exactly one of kind or file is required");
    }
    if (!t.file.empty() && !fs::exists(resolve(t.file))) {
      throw ConfigError("task '" + t.name + "': file " + resolve(t.file).string() + " does not exist");
    }
    if (t.kind && t.n_train < 2) throw ConfigError("task '" + t.name + "': n_train must be at least 2");
    if (t.max_samples < 2) throw ConfigError("task '" + t.name + "': max_samples must be at least 2");
    t.training.validate("task '" + t.name + "' training");
  }
  std::set<std::string> suite_names;
  std::set<Category> categories;
  for (const auto& s : suites) {
    if (!suite_names.insert(s.name).second) throw ConfigError("suite '" + s.name + "' listed twice");
    if (!fs::exists(resolve(s.path))) {
      throw ConfigError("suite '" + s.name + "': file " + resolve(s.path).string() + " does not exist");
    }
    categories.insert(s.category);
  }
  if (suites.empty()) throw ConfigError("config: at least one evaluation suite is required");
  if (inference.max_new < 1) throw ConfigError("inference: max_new must be at least 1");
}

json ExperimentConfig::snapshot() const {
  json j;
  j["seed"] = seed;
  j["model"] = model;
  j["growth"] = growth;
  j["pretrain"] = {{"small_tokens", pretrain.small_tokens},
                   {"post_growth_tokens", pretrain.post_growth_tokens},
                   {"seq_len", pretrain.seq_len},
                   {"batch_size", pretrain.batch_size},
                   {"schedule", to_string(pretrain.schedule)},
                   {"lr", pretrain.lr},
                   {"min_lr", pretrain.min_lr},
                   {"warmup_steps", pretrain.warmup_steps},
                   {"weight_decay", pretrain.weight_decay},
                   {"log_interval", pretrain.log_interval}};
  j["tasks"] = json::array();
  for (const auto& t : tasks) {
    json tj{{"name", t.name},
            {"n_train", t.n_train},
            {"n_test", t.n_test},
            {"max_samples", t.max_samples},
            {"training", training_to_json(t.training)}};
    if (t.kind) tj["kind"] = to_string(*t.kind);
    if (!t.file.empty()) tj["file"] = t.file.generic_string();
    if (t.seed) tj["seed"] = *t.seed;
    j["tasks"].push_back(std::move(tj));
  }
  j["suites"] = json::array();
  for (const auto& s : suites) {
    j["suites"].push_back({{"name", s.name},
                           {"category", to_string(s.category)},
                           {"path", s.path.generic_string()},
                           {"metric", s.metric}});
  }
  j["inference"] = {{"samples", inference.samples}, {"max_new", inference.max_new}};
  j["bias"] = {{"length_normalize", bias.length_normalize}};
  return j;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : purpose) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::uint64_t z = seed ^ h;
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::string to_string(Arm arm) { return arm == Arm::scratch ? "scratch" : "stack"; }

std::vector<Arm> arms_from_string(const std::string& name) {
  if (name == "scratch") return {Arm::scratch};
  if (name == "stack") return {Arm::stack};
  if (name == "both") return {Arm::scratch, Arm::stack};
  throw ConfigError("unknown arm '" + name + "' (expected scratch, stack or both)");
}

// ---------------------------------------------------------------------------
// Training

namespace {

void write_diagnostic(const fs::path& dir, const TransformerModel& model, const std::string& stage, long step,
                      double loss, double lr, const std::string& what) {
  if (dir.empty()) return;
  try {
    fs::create_directories(dir);
    save_checkpoint(model, dir / ("diagnostic_" + stage + ".sclm"));
    json j{{"stage", stage}, {"step", step}, {"lr", lr}, {"error", what}};
    j["loss"] = std::isfinite(loss) ? json(loss) : json(std::to_string(loss));
    write_json(j, dir / ("diagnostic_" + stage + ".json"));
  } catch (const Error&) {
    // The numeric failure is the error worth reporting.
  }
}

double finite_loss_or_throw(double loss, const std::string& stage, long step) {
  if (!std::isfinite(loss)) {
    throw NumericError(stage + ": non-finite loss " + std::to_string(loss) + " at step " + std::to_string(step));
  }
  return loss;
}

std::size_t target_count(const TrainingExample& ex) {
  std::size_t n = 0;
  for (std::size_t t = 1; t < ex.mask.size(); ++t) n += ex.mask[t] ? 1 : 0;
  return n;
}

// Fisher-Yates with raw engine draws so the order does not depend on the
// standard library's distribution implementations.
std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
  return idx;
}

}  // namespace

StageResult pretrain_model(TransformerModel model, const PretrainConfig& config, long budget,
                           std::uint64_t corpus_seed, const std::string& stage, const fs::path& diagnostics_dir) {
  if (budget < 0) throw ConfigError(stage + ": negative token budget");
  StageResult result{std::move(model), {}};
  const long steps = config.steps_for(budget);
  if (steps == 0) {
    if (budget > 0) throw ConfigError(stage + ": budget of " + std::to_string(budget) + " tokens is below one step");
    return result;
  }
  const long tokens = steps * config.tokens_per_step();
  const auto corpus = make_pretrain_corpus(corpus_seed, static_cast<std::size_t>(tokens + 1));

  ScheduleSpec schedule;
  schedule.kind = config.schedule;
  schedule.base_lr = config.lr;
  schedule.min_lr = config.min_lr >= 0 ? config.min_lr : 0.1 * config.lr;
  schedule.warmup_steps = std::min(config.warmup_steps, steps);
  schedule.total_steps = steps;
  schedule.validate();

  auto& m = result.model;
  const auto params = m.parameters();
  AdamState<float> adam(params, AdamConfig{0.9, 0.999, 1e-8, config.weight_decay});
  std::vector<TrainingExample> batch(static_cast<std::size_t>(config.batch_size));
  for (auto& ex : batch) ex.mask.assign(static_cast<std::size_t>(config.seq_len) + 1, 1);

  double acc = 0;
  long acc_n = 0;
  for (long step = 1; step <= steps; ++step) {
    for (int b = 0; b < config.batch_size; ++b) {
      const auto start = static_cast<std::size_t>(((step - 1) * config.batch_size + b) * config.seq_len);
      batch[static_cast<std::size_t>(b)].tokens.assign(corpus.tokens.begin() + static_cast<long>(start),
                                                       corpus.tokens.begin() + static_cast<long>(start) +
                                                           config.seq_len + 1);
    }
    const double lr = lr_at(step, schedule);
    double loss_value = 0;
    try {
      auto loss = masked_loss(m, std::span<const TrainingExample>(batch));
      loss_value = finite_loss_or_throw(loss.item(), stage, step);
      loss.backward();
      adam.step(params, lr);
    } catch (const NumericError& e) {
      write_diagnostic(diagnostics_dir, m, stage, step, loss_value, lr, e.what());
      throw;
    }
    zero_grad(params);
    acc += loss_value;
    ++acc_n;
    if (step == 1 || step % config.log_interval == 0 || step == steps) {
      result.curve.push_back({stage, step, "train", acc / static_cast<double>(acc_n), 0});
      acc = 0;
      acc_n = 0;
    }
  }
  m.provenance.training.push_back({stage, stage, steps, tokens});
  return result;
}

StageResult grow_and_continue(const TransformerModel& small, const GrowthSpec& growth, const PretrainConfig& config,
                              long budget, std::uint64_t corpus_seed, const fs::path& diagnostics_dir) {
  // A fresh optimizer is built inside pretrain_model, so no moment estimates carry over.
  return pretrain_model(stack_grow(small, growth), config, budget, corpus_seed, "continue", diagnostics_dir);
}

PreparedTask prepare_task(const ExperimentConfig& config, const TaskConfig& task) {
  TaskSpec spec;
  if (task.kind) {
    spec = gen_synthetic_task(*task.kind, task.n_train, task.n_test,
                              task.seed.value_or(derive_seed(config.seed, "task/" + task.name)));
  } else {
    auto loaded = load_task_jsonl(config.resolve(task.file), task.name);
    if (!loaded.errors.empty()) {
      std::string msg = "task '" + task.name + "': " + std::to_string(loaded.errors.size()) + " malformed line(s)";
      for (std::size_t i = 0; i < std::min<std::size_t>(3, loaded.errors.size()); ++i) {
        msg += "; line " + std::to_string(loaded.errors[i].line) + ": " + loaded.errors[i].message;
      }
      throw DataError(msg);
    }
    spec = std::move(loaded.task);
  }
  spec.name = task.name;
  spec.max_samples = task.max_samples;
  spec.apply_cap();

  auto templated = template_all(spec.train, config.model.max_seq_len);
  const std::size_t usable = templated.examples.size();
  if (usable == 0) {
    throw DataError("task '" + task.name + "' has no usable training samples (all " +
                    std::to_string(templated.skipped) + " exceed max_seq_len)");
  }
  if (usable < 2) throw DataError("task '" + task.name + "' needs at least two usable samples for a validation split");

  // Held-out 10%: rank samples by a seeded hash of their token content.
  const std::uint64_t split_seed = derive_seed(config.seed, "split/" + task.name);
  std::vector<std::pair<std::uint64_t, std::size_t>> ranked;
  for (std::size_t i = 0; i < usable; ++i) {
    std::uint64_t h = split_seed;
    for (int t : templated.examples[i].tokens) h = derive_seed(h, std::string_view(reinterpret_cast<const char*>(&t), sizeof t));
    ranked.emplace_back(h, i);
  }
  std::sort(ranked.begin(), ranked.end());
  const std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(usable))));
  std::vector<bool> held(usable, false);
  for (std::size_t k = 0; k < n_val; ++k) held[ranked[k].second] = true;

  PreparedTask out;
  out.name = task.name;
  for (std::size_t i = 0; i < usable; ++i) {
    (held[i] ? out.validation : out.train).push_back(std::move(templated.examples[i]));
  }
  out.test = std::move(spec.test);
  out.stats = {task.name, out.train.size(), out.validation.size(), out.test.size(), templated.skipped};
  return out;
}

double evaluate_loss(const TransformerModel& model, std::span<const TrainingExample> examples, int batch_size) {
  NoGradGuard no_grad;
  double sum = 0;
  double count = 0;
  for (std::size_t i = 0; i < examples.size(); i += static_cast<std::size_t>(batch_size)) {
    const auto chunk = examples.subspan(i, std::min<std::size_t>(static_cast<std::size_t>(batch_size), examples.size() - i));
    std::size_t n = 0;
    for (const auto& ex : chunk) n += target_count(ex);
    if (n == 0) continue;
    sum += masked_loss(model, chunk).item() * static_cast<double>(n);
    count += static_cast<double>(n);
  }
  if (count == 0) throw DataError("evaluate_loss: no target tokens");
  return sum / count;
}

FinetuneResult finetune_sequential(const TransformerModel& m0, const ExperimentConfig& config, const fs::path& run_dir,
                                   const std::string& arm, const BatchHook& on_batch) {
  if (config.tasks.empty()) throw ConfigError("finetune: no tasks configured");
  const fs::path arm_dir = run_dir / arm;
  fs::create_directories(arm_dir);
  FinetuneResult result;

  auto model = m0.clone();
  save_checkpoint(model, arm_dir / "M0.sclm");
  result.registry.push_back({"M0", arm + "/M0.sclm", "", 0});
  std::string previous = "M0";

  for (std::size_t m = 0; m < config.tasks.size(); ++m) {
    const auto& task = config.tasks[m];
    const std::string label = "M" + std::to_string(m + 1);
    const auto prepared = prepare_task(config, task);
    result.data.push_back(prepared.stats);
    const auto& tc = task.training;

    const std::size_t micro_per_epoch =
        (prepared.train.size() + static_cast<std::size_t>(tc.batch_size) - 1) / static_cast<std::size_t>(tc.batch_size);
    const long steps_per_epoch =
        static_cast<long>((micro_per_epoch + static_cast<std::size_t>(tc.grad_accum) - 1) / static_cast<std::size_t>(tc.grad_accum));
    ScheduleSpec schedule;
    try {
      schedule = tc.schedule_for(steps_per_epoch * tc.epochs);
    } catch (const ConfigError& e) {
      throw ConfigError("task '" + task.name + "': " + e.what());
    }

    model.provenance.lineage.push_back(previous);
    const auto params = model.parameters();
    AdamState<float> adam(params, AdamConfig{0.9, 0.999, 1e-8, tc.weight_decay});
    const fs::path task_dir = arm_dir / task.name;
    fs::create_directories(task_dir);

    result.curve.push_back({task.name, 0, "validation", evaluate_loss(model, prepared.validation), 0});
    long step = 0;
    long tokens = 0;
    double acc = 0;
    long acc_n = 0;
    for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
      const auto order = permutation(prepared.train.size(),
                                     derive_seed(config.seed, "shuffle/" + task.name + "/" + std::to_string(epoch)));
      std::size_t micro = 0;
      while (micro < micro_per_epoch) {
        const std::size_t group = std::min<std::size_t>(static_cast<std::size_t>(tc.grad_accum), micro_per_epoch - micro);
        ++step;
        const double lr = lr_at(step, schedule);
        double step_loss = 0;
        try {
          for (std::size_t g = 0; g < group; ++g, ++micro) {
            std::vector<TrainingExample> batch;
            const std::size_t begin = micro * static_cast<std::size_t>(tc.batch_size);
            const std::size_t end = std::min(prepared.train.size(), begin + static_cast<std::size_t>(tc.batch_size));
            for (std::size_t i = begin; i < end; ++i) {
              batch.push_back(prepared.train[order[i]]);
              tokens += static_cast<long>(batch.back().tokens.size());
            }
            if (on_batch) on_batch(task.name, batch);
            auto loss = masked_loss(model, std::span<const TrainingExample>(batch));
            const double v = finite_loss_or_throw(loss.item(), task.name, step);
            step_loss += v / static_cast<double>(group);
            (group == 1 ? loss : scale(loss, 1.0f / static_cast<float>(group))).backward();
          }
          adam.step(params, lr);
        } catch (const NumericError& e) {
          write_diagnostic(arm_dir, model, task.name, step, step_loss, lr, e.what());
          throw;
        }
        zero_grad(params);
        acc += step_loss;
        ++acc_n;
        if (step % tc.log_interval == 0) {
          result.curve.push_back({task.name, step, "train", acc / static_cast<double>(acc_n), epoch});
          acc = 0;
          acc_n = 0;
        }
      }
      if (acc_n > 0) {
        result.curve.push_back({task.name, step, "train", acc / static_cast<double>(acc_n), epoch});
        acc = 0;
        acc_n = 0;
      }
      const double val = evaluate_loss(model, prepared.validation);
      result.curve.push_back({task.name, step, "validation", val, epoch});
      result.curve.push_back({task.name, step, "epoch_border", val, epoch});

      const std::string epoch_label = label + "/E" + std::to_string(epoch);
      const auto rel = arm + "/" + task.name + "/E" + std::to_string(epoch) + ".sclm";
      auto snapshot = model.clone();
      snapshot.provenance.training.push_back({"finetune", epoch_label, step, tokens});
      save_checkpoint(snapshot, run_dir / rel);
      result.registry.push_back({epoch_label, rel, task.name, epoch});
    }
    model.provenance.training.push_back({"finetune", label, step, tokens});
    save_checkpoint(model, arm_dir / (label + ".sclm"));
    result.registry.push_back({label, arm + "/" + label + ".sclm", task.name, 0});
    result.finals.push_back(model.clone());
    previous = label;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

std::vector<SuiteScore> evaluate_all(const TransformerModel& model, std::span<const EvalSuite> suites,
                                     const BiasOptions& bias) {
  std::vector<SuiteScore> column;
  column.reserve(suites.size());
  for (const auto& s : suites) {
    try {
      column.push_back(score_suite(model, s, bias));
    } catch (const DataError& e) {
      throw DataError("suite '" + s.name + "': " + e.what());
    }
  }
  return column;
}

std::vector<EvalSuite> load_suites(const ExperimentConfig& config) {
  std::vector<EvalSuite> out;
  for (const auto& sc : config.suites) {
    auto loaded = load_suite_jsonl(config.resolve(sc.path), sc.category, sc.name);
    if (!loaded.errors.empty()) {
      const auto& e = loaded.errors.front();
      throw DataError("suite '" + sc.name + "': " + std::to_string(loaded.errors.size()) +
                      " malformed line(s); line " + std::to_string(e.line) + ": " + e.message);
    }
    if (loaded.suite.size() == 0) throw DataError("suite '" + sc.name + "' is empty");
    loaded.suite.metric = sc.metric;
    out.push_back(std::move(loaded.suite));
  }
  return out;
}

InferenceRow inference_scores(const TransformerModel& model, const std::string& label, const PreparedTask& task,
                              const InferenceConfig& config) {
  InferenceRow row{task.name, label, 0, 0, 0, 0, 0, 0};
  GenerationOptions gen;
  gen.max_new = config.max_new;
  gen.eos = kEos;
  const std::size_t n = std::min(config.samples, task.test.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& sample = task.test[i];
    const auto prompt = prompt_tokens(sample);
    if (static_cast<int>(prompt.size()) >= model.config.max_seq_len) continue;
    const auto hyp = decode(generate(model, prompt, gen));
    const std::vector<std::string> refs{sample.output};
    row.bleu += bleu(hyp, refs);
    row.rouge1 += rouge_n(hyp, sample.output, 1);
    row.rouge2 += rouge_n(hyp, sample.output, 2);
    row.rougeL += rouge_l(hyp, sample.output);
    const auto& source = sample.input.empty() ? sample.instruction : sample.input;
    row.sari += sari(source, hyp, refs);
    ++row.samples;
  }
  if (row.samples > 0) {
    const auto k = static_cast<double>(row.samples);
    row.bleu /= k;
    row.rouge1 /= k;
    row.rouge2 /= k;
    row.rougeL /= k;
    row.sari /= k;
  }
  return row;
}

// ---------------------------------------------------------------------------
// Staged pipeline

namespace {

template <typename F>
auto in_stage(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError("stage " + stage + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError("stage " + stage + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError("stage " + stage + ": " + e.what());
  } catch (const InputError& e) {
    throw DataError("stage " + stage + ": " + e.what());
  } catch (const Error& e) {
    throw Error("stage " + stage + ": " + e.what());
  } catch (const fs::filesystem_error& e) {
    throw DataError("stage " + stage + ": " + e.what());
  }
}

fs::path arm_dir(const ExperimentConfig& config, Arm arm) { return config.output_dir / to_string(arm); }

void save_curve(const std::vector<LossPoint>& curve, const fs::path& path) { write_json(losses_to_json(curve), path); }

std::vector<LossPoint> load_curve_if_present(const fs::path& path) {
  if (!fs::exists(path)) return {};
  return losses_from_json(read_json(path));
}

TransformerModel load_required(const fs::path& path, const std::string& hint) {
  if (!fs::exists(path)) throw DataError("missing checkpoint " + path.string() + " (run `" + hint + "` first)");
  return load_checkpoint(path);
}

}  // namespace

void stage_pretrain(const ExperimentConfig& config, Arm arm) {
  in_stage("pretrain/" + to_string(arm), [&] {
    const auto dir = arm_dir(config, arm);
    fs::create_directories(dir);
    if (arm == Arm::stack) {
      auto r = pretrain_model(init_model<float>(config.small_model()), config.pretrain, config.pretrain.small_tokens,
                              derive_seed(config.seed, "corpus/small"), "pretrain", dir);
      save_checkpoint(r.model, dir / "small.sclm");
      save_curve(r.curve, dir / "curve_pretrain.json");
    } else {
      auto r = pretrain_model(init_model<float>(config.target_model()), config.pretrain,
                              config.pretrain.post_growth_tokens, derive_seed(config.seed, "corpus/main"), "pretrain",
                              dir);
      save_checkpoint(r.model, dir / "M0.sclm");
      save_curve(r.curve, dir / "curve_pretrain.json");
    }
  });
}

void stage_grow(const ExperimentConfig& config) {
  in_stage("grow", [&] {
    const auto dir = arm_dir(config, Arm::stack);
    const auto small = load_required(dir / "small.sclm", "pretrain --arm stack");
    auto r = grow_and_continue(small, config.growth, config.pretrain, config.pretrain.post_growth_tokens,
                               derive_seed(config.seed, "corpus/main"), dir);
    save_checkpoint(r.model, dir / "M0.sclm");
    save_curve(r.curve, dir / "curve_continue.json");
  });
}

void stage_finetune(const ExperimentConfig& config, Arm arm, const BatchHook& on_batch) {
  in_stage("finetune/" + to_string(arm), [&] {
    const auto dir = arm_dir(config, arm);
    const auto m0 = load_required(dir / "M0.sclm", arm == Arm::stack ? "grow" : "pretrain --arm scratch");
    auto r = finetune_sequential(m0, config, config.output_dir, to_string(arm), on_batch);
    write_json({{"registry", registry_to_json(r.registry)}, {"data", data_stats_to_json(r.data)}},
               dir / "registry.json");
    save_curve(r.curve, dir / "curve_finetune.json");
  });
}

ArmReport stage_eval(const ExperimentConfig& config, Arm arm) {
  return in_stage("eval/" + to_string(arm), [&] {
    const auto dir = arm_dir(config, arm);
    if (!fs::exists(dir / "registry.json")) {
      throw DataError("missing " + (dir / "registry.json").string() + " (run `finetune` first)");
    }
    const auto reg = read_json(dir / "registry.json");
    ArmReport report;
    report.arm = to_string(arm);
    report.registry = registry_from_json(reg.at("registry"));
    report.data = data_stats_from_json(reg.at("data"));

    const auto suites = load_suites(config);
    std::vector<PreparedTask> tasks;
    for (const auto& t : config.tasks) tasks.push_back(prepare_task(config, t));

    for (const auto& entry : report.registry) {
      if (entry.epoch != 0) continue;  // task-final checkpoints and M0 only
      const auto model = load_checkpoint(config.output_dir / entry.path);
      report.evaluation.append(entry.label, evaluate_all(model, suites, config.bias));
      for (const auto& t : tasks) report.inference.push_back(inference_scores(model, entry.label, t, config.inference));
    }
    report.fg = compute_fg(report.evaluation);

    for (const char* name : {"curve_pretrain.json", "curve_continue.json", "curve_finetune.json"}) {
      const auto curve = load_curve_if_present(dir / name);
      report.losses.insert(report.losses.end(), curve.begin(), curve.end());
    }
    write_json(to_json(report), dir / "arm_report.json");
    return report;
  });
}

RunReport stage_report(const ExperimentConfig& config, std::span<const Arm> arms) {
  return in_stage("report", [&] {
    RunReport report;
    report.config = config.snapshot();
    report.seed = config.seed;
    for (Arm arm : arms) {
      const auto path = arm_dir(config, arm) / "arm_report.json";
      if (!fs::exists(path)) throw DataError("missing " + path.string() + " (run `eval` first)");
      try {
        report.arms.push_back(arm_report_from_json(read_json(path)));
      } catch (const json::exception& e) {
        throw DataError(path.string() + " does not match the report schema: " + e.what());
      }
    }
    emit_report(report, config.output_dir);
    return report;
  });
}

RunReport run_experiment(const ExperimentConfig& config, std::span<const Arm> arms) {
  json timing = json::object();
  auto timed = [&](const std::string& name, auto&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    timing[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  fs::create_directories(config.output_dir);
  for (Arm arm : arms) {
    const auto a = to_string(arm);
    timed(a + "/pretrain", [&] { stage_pretrain(config, arm); });
    if (arm == Arm::stack) timed(a + "/grow", [&] { stage_grow(config); });
    timed(a + "/finetune", [&] { stage_finetune(config, arm); });
    timed(a + "/eval", [&] { stage_eval(config, arm); });
  }
  RunReport report;
  timed("report", [&] { report = stage_report(config, arms); });
  // Wall-clock lives apart from report.json so the report stays byte-reproducible.
  write_json(timing, config.output_dir / "timing.json");
  return report;
}

}  // namespace sclm
