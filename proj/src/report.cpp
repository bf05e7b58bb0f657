#include "sclm/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace sclm {

void EvalMatrix::append(const std::string& label, const std::vector<SuiteScore>& column) {
  if (rows.empty() && checkpoints.empty()) {
    for (const auto& s : column) rows.push_back({s.suite, s.category, s.metric, {}, {}});
  }
  if (column.size() != rows.size()) {
    throw ContractError("evaluation column for " + label + " has " + std::to_string(column.size()) +
                        " suites, matrix has " + std::to_string(rows.size()));
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (column[i].suite != rows[i].suite) {
      throw ContractError("evaluation column for " + label + " lists suite '" + column[i].suite +
                          "' where '" + rows[i].suite + "' was expected");
    }
    rows[i].values.push_back(column[i].value);
    rows[i].skipped.push_back(column[i].skipped);
  }
  checkpoints.push_back(label);
}

CategoryResult EvalMatrix::category_result(Category category) const {
  CategoryResult out;
  out.category = category;
  for (const auto& r : rows) {
    if (r.category != category || r.values.empty()) continue;
    out.tasks.push_back({r.suite, r.values.front(), std::vector<double>(r.values.begin() + 1, r.values.end())});
  }
  return out;
}

std::vector<FgValue> compute_fg(const EvalMatrix& matrix) {
  std::vector<FgValue> out;
  for (Category c : kAllCategories) {
    const auto cr = matrix.category_result(c);
    if (cr.tasks.empty()) continue;
    FgValue v;
    v.category = c;
    try {
      v.entry = fg(cr);
      v.valid = true;
    } catch (const Error& e) {
      v.error = e.what();
    }
    out.push_back(std::move(v));
  }
  return out;
}

// ---------------------------------------------------------------------------

nlohmann::json losses_to_json(const std::vector<LossPoint>& losses) {
  auto out = nlohmann::json::array();
  for (const auto& l : losses) {
    out.push_back({{"stage", l.stage}, {"step", l.step}, {"split", l.split}, {"loss", l.loss}, {"epoch", l.epoch}});
  }
  return out;
}

std::vector<LossPoint> losses_from_json(const nlohmann::json& j) {
  std::vector<LossPoint> out;
  for (const auto& l : j) {
    out.push_back({l.at("stage").get<std::string>(), l.at("step").get<long>(), l.at("split").get<std::string>(),
                   l.at("loss").get<double>(), l.at("epoch").get<int>()});
  }
  return out;
}

nlohmann::json registry_to_json(const std::vector<RegistryEntry>& registry) {
  auto out = nlohmann::json::array();
  for (const auto& r : registry) {
    out.push_back({{"label", r.label}, {"path", r.path}, {"task", r.task}, {"epoch", r.epoch}});
  }
  return out;
}

std::vector<RegistryEntry> registry_from_json(const nlohmann::json& j) {
  std::vector<RegistryEntry> out;
  for (const auto& r : j) {
    out.push_back({r.at("label").get<std::string>(), r.at("path").get<std::string>(),
                   r.at("task").get<std::string>(), r.at("epoch").get<int>()});
  }
  return out;
}

nlohmann::json data_stats_to_json(const std::vector<TaskDataStats>& data) {
  auto out = nlohmann::json::array();
  for (const auto& d : data) {
    out.push_back({{"task", d.task},
                   {"train", d.train},
                   {"validation", d.validation},
                   {"test", d.test},
                   {"skipped", d.skipped}});
  }
  return out;
}

std::vector<TaskDataStats> data_stats_from_json(const nlohmann::json& j) {
  std::vector<TaskDataStats> out;
  for (const auto& d : j) {
    out.push_back({d.at("task").get<std::string>(), d.at("train").get<std::size_t>(),
                   d.at("validation").get<std::size_t>(), d.at("test").get<std::size_t>(),
                   d.at("skipped").get<std::size_t>()});
  }
  return out;
}

nlohmann::json to_json(const ArmReport& arm) {
  nlohmann::json j;
  j["arm"] = arm.arm;
  j["registry"] = registry_to_json(arm.registry);
  j["evaluation"]["checkpoints"] = arm.evaluation.checkpoints;
  j["evaluation"]["suites"] = nlohmann::json::array();
  for (const auto& r : arm.evaluation.rows) {
    j["evaluation"]["suites"].push_back({{"suite", r.suite},
                                         {"category", to_string(r.category)},
                                         {"metric", r.metric},
                                         {"values", r.values},
                                         {"skipped", r.skipped}});
  }
  j["fg"] = nlohmann::json::array();
  for (const auto& f : arm.fg) {
    nlohmann::json e{{"category", to_string(f.category)}, {"valid", f.valid}};
    if (f.valid) {
      e["fg"] = f.entry.fg;
      e["steps"] = f.entry.steps;
      e["per_task"] = nlohmann::json::array();
      for (const auto& [name, v] : f.entry.per_task) e["per_task"].push_back({{"suite", name}, {"fg", v}});
    } else {
      e["error"] = f.error;
    }
    j["fg"].push_back(std::move(e));
  }
  j["losses"] = losses_to_json(arm.losses);
  j["inference"] = nlohmann::json::array();
  for (const auto& r : arm.inference) {
    j["inference"].push_back({{"task", r.task},
                              {"checkpoint", r.checkpoint},
                              {"samples", r.samples},
                              {"bleu", r.bleu},
                              {"rouge1", r.rouge1},
                              {"rouge2", r.rouge2},
                              {"rougeL", r.rougeL},
                              {"sari", r.sari}});
  }
  j["data"] = data_stats_to_json(arm.data);
  return j;
}

ArmReport arm_report_from_json(const nlohmann::json& j) {
  ArmReport arm;
  arm.arm = j.at("arm").get<std::string>();
  arm.registry = registry_from_json(j.at("registry"));
  arm.evaluation.checkpoints = j.at("evaluation").at("checkpoints").get<std::vector<std::string>>();
  for (const auto& r : j.at("evaluation").at("suites")) {
    arm.evaluation.rows.push_back({r.at("suite").get<std::string>(),
                                   category_from_string(r.at("category").get<std::string>()),
                                   r.at("metric").get<std::string>(), r.at("values").get<std::vector<double>>(),
                                   r.at("skipped").get<std::vector<std::size_t>>()});
  }
  for (const auto& e : j.at("fg")) {
    FgValue f;
    f.category = category_from_string(e.at("category").get<std::string>());
    f.valid = e.at("valid").get<bool>();
    f.entry.category = f.category;
    if (f.valid) {
      f.entry.fg = e.at("fg").get<double>();
      f.entry.steps = e.at("steps").get<int>();
      for (const auto& p : e.at("per_task")) {
        f.entry.per_task.emplace_back(p.at("suite").get<std::string>(), p.at("fg").get<double>());
      }
    } else {
      f.error = e.at("error").get<std::string>();
    }
    arm.fg.push_back(std::move(f));
  }
  arm.losses = losses_from_json(j.at("losses"));
  for (const auto& r : j.at("inference")) {
    arm.inference.push_back({r.at("task").get<std::string>(), r.at("checkpoint").get<std::string>(),
                             r.at("samples").get<std::size_t>(), r.at("bleu").get<double>(),
                             r.at("rouge1").get<double>(), r.at("rouge2").get<double>(),
                             r.at("rougeL").get<double>(), r.at("sari").get<double>()});
  }
  arm.data = data_stats_from_json(j.at("data"));
  return arm;
}

nlohmann::json to_json(const RunReport& report) {
  nlohmann::json j;
  j["config"] = report.config;
  j["seed"] = report.seed;
  j["arms"] = nlohmann::json::array();
  for (const auto& a : report.arms) j["arms"].push_back(to_json(a));
  return j;
}

RunReport run_report_from_json(const nlohmann::json& j) {
  RunReport r;
  r.config = j.at("config");
  r.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& a : j.at("arms")) r.arms.push_back(arm_report_from_json(a));
  return r;
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

RunReport load_report(const std::filesystem::path& path) {
  const auto j = read_json(path);
  try {
    return run_report_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("report " + path.string() + " does not match the report schema: " + e.what());
  }
}

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace

void emit_report(const RunReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_json(to_json(report), dir / "report.json");

  std::ostringstream metrics;
  metrics << "suite,category,checkpoint,metric,value\n";
  for (const auto& arm : report.arms) {
    for (const auto& row : arm.evaluation.rows) {
      for (std::size_t c = 0; c < arm.evaluation.checkpoints.size(); ++c) {
        metrics << csv_field(row.suite) << ',' << to_string(row.category) << ','
                << csv_field(arm.arm + "/" + arm.evaluation.checkpoints[c]) << ',' << row.metric << ','
                << num(row.values[c]) << '\n';
      }
    }
    for (const auto& r : arm.inference) {
      const std::string ck = csv_field(arm.arm + "/" + r.checkpoint);
      const std::pair<const char*, double> values[] = {
          {"bleu", r.bleu}, {"rouge1", r.rouge1}, {"rouge2", r.rouge2}, {"rougeL", r.rougeL}, {"sari", r.sari}};
      for (const auto& [name, v] : values) {
        metrics << csv_field(r.task) << ",Inference," << ck << ',' << name << ',' << num(v) << '\n';
      }
    }
  }
  write_text(dir / "metrics.csv", metrics.str());

  std::ostringstream curves;
  curves << "arm,task,step,split,loss\n";
  for (const auto& arm : report.arms) {
    for (const auto& l : arm.losses) {
      curves << arm.arm << ',' << csv_field(l.stage) << ',' << l.step << ',' << l.split << ',' << num(l.loss)
             << '\n';
    }
  }
  write_text(dir / "loss_curves.csv", curves.str());

  std::ostringstream fgs;
  fgs << "arm,category,fg,suites,steps\n";
  for (const auto& arm : report.arms) {
    for (const auto& f : arm.fg) {
      fgs << arm.arm << ',' << to_string(f.category) << ',' << (f.valid ? num(f.entry.fg) : "nan") << ','
          << f.entry.per_task.size() << ',' << f.entry.steps << '\n';
    }
  }
  write_text(dir / "fg_summary.csv", fgs.str());
}

}  // namespace sclm
