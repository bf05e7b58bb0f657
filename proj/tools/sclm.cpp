// Command-line front end: staged pipeline, full runs and data regeneration.

#include <cstdio>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "sclm/corpus.hpp"
#include "sclm/harness.hpp"
#include "sclm/synthetic.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct CommonFlags {
  std::string config = "configs/default.json";
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string arm = "both";
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_arm) {
  cmd->add_option("--config", flags.config, "JSON experiment config")->capture_default_str();
  cmd->add_option("--seed", flags.seed, "override the experiment seed");
  cmd->add_option("--out", flags.out, "override the output directory");
  if (with_arm) {
    cmd->add_option("--arm", flags.arm, "scratch, stack or both")
        ->check(CLI::IsMember({"scratch", "stack", "both"}))
        ->capture_default_str();
  }
}

sclm::ExperimentConfig load_config(const CommonFlags& flags) {
  auto config = sclm::ExperimentConfig::load(flags.config);
  if (flags.seed) config.seed = *flags.seed;
  if (!flags.out.empty()) config.output_dir = flags.out;
  return config;
}

void print_fg(const sclm::RunReport& report) {
  for (const auto& arm : report.arms) {
    for (const auto& f : arm.fg) {
      if (f.valid) {
        std::printf("%-8s %-22s FG = %8.3f\n", arm.arm.c_str(), sclm::to_string(f.category).c_str(), f.entry.fg);
      } else {
        std::printf("%-8s %-22s FG undefined: %s\n", arm.arm.c_str(), sclm::to_string(f.category).c_str(),
                    f.error.c_str());
      }
    }
  }
}

void make_data(const std::string& out) {
  const std::filesystem::path dir(out);
  for (const auto& suite : sclm::make_eval_suites()) {
    const auto path = dir / "suites" / (suite.name + ".jsonl");
    std::filesystem::create_directories(path.parent_path());
    sclm::write_suite_jsonl(suite, path);
    std::printf("wrote %s (%zu items)\n", path.string().c_str(), suite.size());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale continual-learning laboratory for stacked transformers"};
  app.require_subcommand(1);

  CommonFlags flags;
  auto* pretrain = app.add_subcommand("pretrain", "pretrain the small (stack) or target-depth (scratch) model");
  auto* grow = app.add_subcommand("grow", "stack the small model and continue pretraining");
  auto* finetune = app.add_subcommand("finetune", "sequentially fine-tune M0 on the task list");
  auto* eval = app.add_subcommand("eval", "evaluate M0 ... MN, compute FG and the inference table");
  auto* run = app.add_subcommand("run", "every stage, then write the report");
  auto* report = app.add_subcommand("report", "assemble report.json and CSVs from evaluated arms");
  for (auto* cmd : {pretrain, finetune, eval, run, report}) add_common(cmd, flags, true);
  add_common(grow, flags, false);

  std::string data_out = "data";
  auto* data = app.add_subcommand("make-data", "regenerate the bundled evaluation suites");
  data->add_option("--out", data_out, "destination directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (data->parsed()) {
      make_data(data_out);
      return kExitOk;
    }
    const auto config = load_config(flags);
    const auto arms = sclm::arms_from_string(flags.arm);
    if (pretrain->parsed()) {
      for (auto arm : arms) sclm::stage_pretrain(config, arm);
    } else if (grow->parsed()) {
      sclm::stage_grow(config);
    } else if (finetune->parsed()) {
      for (auto arm : arms) sclm::stage_finetune(config, arm);
    } else if (eval->parsed()) {
      for (auto arm : arms) sclm::stage_eval(config, arm);
    } else if (report->parsed()) {
      print_fg(sclm::stage_report(config, arms));
    } else if (run->parsed()) {
      print_fg(sclm::run_experiment(config, arms));
      std::printf("report written to %s\n", config.output_dir.string().c_str());
    }
  } catch (const sclm::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const sclm::NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const sclm::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const sclm::InputError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInternal;
  }
  return kExitOk;
}
