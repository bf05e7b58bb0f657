#include "sclm/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>

namespace sclm {

Tokens metric_tokens(std::string_view text) {
  Tokens out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char raw : text) {
    const auto ch = static_cast<unsigned char>(raw);
    if (std::isspace(ch)) {
      flush();
    } else if (ch < 128 && std::ispunct(ch)) {
      flush();
      out.emplace_back(1, raw);
    } else {
      cur.push_back(static_cast<char>(std::tolower(ch)));
    }
  }
  flush();
  return out;
}

namespace {

using Counts = std::map<std::string, long>;

Counts ngram_counts(const Tokens& toks, int n) {
  Counts c;
  const auto un = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i + un <= toks.size(); ++i) {
    std::string key = toks[i];
    for (std::size_t k = 1; k < un; ++k) key += '\x1f' + toks[i + k];
    ++c[key];
  }
  return c;
}

long total(const Counts& c) {
  long t = 0;
  for (const auto& [_, v] : c) t += v;
  return t;
}

std::vector<Tokens> tokenize_all(std::span<const std::string> texts) {
  std::vector<Tokens> out;
  for (const auto& t : texts) out.push_back(metric_tokens(t));
  return out;
}

double f1(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

}  // namespace

double bleu(const Tokens& hyp, std::span<const Tokens> refs, int max_n) {
  if (refs.empty()) throw ContractError("bleu: at least one reference is required");
  if (max_n < 1) throw ContractError("bleu: max_n must be at least 1");
  if (hyp.empty()) return 0.0;
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const auto hc = ngram_counts(hyp, n);
    Counts max_ref;
    for (const auto& r : refs) {
      for (const auto& [g, c] : ngram_counts(r, n)) max_ref[g] = std::max(max_ref[g], c);
    }
    long clipped = 0;
    for (const auto& [g, c] : hc) {
      auto it = max_ref.find(g);
      if (it != max_ref.end()) clipped += std::min(c, it->second);
    }
    double p;
    if (n == 1) {
      if (clipped == 0) return 0.0;
      p = static_cast<double>(clipped) / static_cast<double>(total(hc));
    } else {
      p = (static_cast<double>(clipped) + 1.0) / (static_cast<double>(total(hc)) + 1.0);
    }
    log_sum += std::log(p);
  }
  // Closest reference length; ties go to the shorter reference.
  const auto c = static_cast<long>(hyp.size());
  long r = static_cast<long>(refs[0].size());
  for (const auto& ref : refs) {
    const auto len = static_cast<long>(ref.size());
    if (std::abs(len - c) < std::abs(r - c) || (std::abs(len - c) == std::abs(r - c) && len < r)) r = len;
  }
  const double bp = std::exp(std::min(0.0, 1.0 - static_cast<double>(r) / static_cast<double>(c)));
  return bp * std::exp(log_sum / max_n);
}

double bleu(std::string_view hypothesis, std::span<const std::string> references, int max_n) {
  const auto refs = tokenize_all(references);
  return bleu(metric_tokens(hypothesis), refs, max_n);
}

double rouge_n(const Tokens& hyp, const Tokens& ref, int n) {
  if (n < 1) throw ContractError("rouge_n: n must be at least 1");
  const auto hc = ngram_counts(hyp, n);
  const auto rc = ngram_counts(ref, n);
  const long ht = total(hc), rt = total(rc);
  if (ht == 0 || rt == 0) return 0.0;
  long overlap = 0;
  for (const auto& [g, c] : hc) {
    auto it = rc.find(g);
    if (it != rc.end()) overlap += std::min(c, it->second);
  }
  return f1(static_cast<double>(overlap) / static_cast<double>(ht),
            static_cast<double>(overlap) / static_cast<double>(rt));
}

double rouge_n(std::string_view hypothesis, std::string_view reference, int n) {
  return rouge_n(metric_tokens(hypothesis), metric_tokens(reference), n);
}

double rouge_l(const Tokens& hyp, const Tokens& ref) {
  if (hyp.empty() || ref.empty()) return 0.0;
  std::vector<std::size_t> prev(ref.size() + 1, 0), cur(ref.size() + 1, 0);
  for (std::size_t i = 1; i <= hyp.size(); ++i) {
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      cur[j] = hyp[i - 1] == ref[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  const auto lcs = static_cast<double>(prev[ref.size()]);
  return f1(lcs / static_cast<double>(hyp.size()), lcs / static_cast<double>(ref.size()));
}

double rouge_l(std::string_view hypothesis, std::string_view reference) {
  return rouge_l(metric_tokens(hypothesis), metric_tokens(reference));
}

// SARI follows the reference implementation's multiset arithmetic: source and
// candidate counts are replicated once per reference and intersected with the
// pooled reference counts.
SariComponents sari_ngram(const Tokens& source, const Tokens& hypothesis,
                          std::span<const Tokens> references, int n) {
  const auto num_refs = static_cast<long>(references.size());
  Counts ref_counts;
  for (const auto& r : references) {
    for (const auto& [g, c] : ngram_counts(r, n)) ref_counts[g] += c;
  }
  Counts src_rep = ngram_counts(source, n);
  for (auto& [_, c] : src_rep) c *= num_refs;
  Counts cand_rep = ngram_counts(hypothesis, n);
  for (auto& [_, c] : cand_rep) c *= num_refs;

  auto get = [](const Counts& m, const std::string& g) {
    auto it = m.find(g);
    return it == m.end() ? 0L : it->second;
  };

  SariComponents out;

  // Keep: n-grams of the source the candidate retains.
  Counts keep, keep_all;
  for (const auto& [g, c] : src_rep) {
    const long k = std::min(c, get(cand_rep, g));
    if (k > 0) keep[g] = k;
    const long a = std::min(c, get(ref_counts, g));
    if (a > 0) keep_all[g] = a;
  }
  if (keep.empty() && keep_all.empty()) {
    out.keep_f1 = 1.0;
  } else {
    double p_sum = 0, r_sum = 0;
    for (const auto& [g, k] : keep) {
      const double good = static_cast<double>(std::min(k, get(ref_counts, g)));
      p_sum += good / static_cast<double>(k);
      const long all = get(keep_all, g);
      if (all > 0) r_sum += good / static_cast<double>(all);
    }
    const double p = keep.empty() ? 0.0 : p_sum / static_cast<double>(keep.size());
    const double r = keep_all.empty() ? 0.0 : r_sum / static_cast<double>(keep_all.size());
    out.keep_f1 = f1(p, r);
  }

  // Delete: source n-grams the candidate drops, scored by precision only.
  Counts del, del_all;
  for (const auto& [g, c] : src_rep) {
    const long d = c - get(cand_rep, g);
    if (d > 0) del[g] = d;
    const long a = c - get(ref_counts, g);
    if (a > 0) del_all[g] = a;
  }
  if (del.empty() && del_all.empty()) {
    out.delete_precision = 1.0;
  } else if (!del.empty()) {
    double p_sum = 0;
    for (const auto& [g, d] : del) {
      const long good = d - get(ref_counts, g);
      if (good > 0) p_sum += static_cast<double>(good) / static_cast<double>(d);
    }
    out.delete_precision = p_sum / static_cast<double>(del.size());
  }

  // Add: candidate n-grams absent from the source (set semantics).
  std::set<std::string> add, add_all;
  for (const auto& [g, _] : cand_rep) {
    if (!src_rep.count(g)) add.insert(g);
  }
  for (const auto& [g, _] : ref_counts) {
    if (!src_rep.count(g)) add_all.insert(g);
  }
  if (add.empty() && add_all.empty()) {
    out.add_f1 = 1.0;
  } else {
    double good = 0;
    for (const auto& g : add) good += add_all.count(g) ? 1.0 : 0.0;
    const double p = add.empty() ? 0.0 : good / static_cast<double>(add.size());
    const double r = add_all.empty() ? 0.0 : good / static_cast<double>(add_all.size());
    out.add_f1 = f1(p, r);
  }
  return out;
}

double sari(const Tokens& source, const Tokens& hypothesis, std::span<const Tokens> references) {
  if (references.empty()) throw ContractError("sari: at least one reference is required");
  if (source.empty()) throw ContractError("sari: empty source");
  double acc = 0;
  for (int n = 1; n <= 4; ++n) {
    const auto c = sari_ngram(source, hypothesis, references, n);
    acc += (c.keep_f1 + c.delete_precision + c.add_f1) / 3.0;
  }
  return acc / 4.0 * 100.0;
}

double sari(std::string_view source, std::string_view hypothesis, std::span<const std::string> references) {
  const auto refs = tokenize_all(references);
  return sari(metric_tokens(source), metric_tokens(hypothesis), refs);
}

// ---------------------------------------------------------------------------

ForgettingEntry fg(const CategoryResult& category) {
  if (category.tasks.empty()) throw ContractError("fg: category has no evaluation tasks");
  ForgettingEntry entry;
  entry.category = category.category;
  entry.steps = static_cast<int>(category.tasks.front().after.size());
  if (entry.steps < 1) throw ContractError("fg: at least one post-task score is required");
  double outer = 0.0;
  for (const auto& t : category.tasks) {
    if (static_cast<int>(t.after.size()) != entry.steps) {
      throw ContractError("fg: task '" + t.name + "' has " + std::to_string(t.after.size()) +
                          " post-task scores, expected " + std::to_string(entry.steps));
    }
    if (!(t.baseline > 0.0)) {
      throw InvalidBaselineError("fg: baseline score of task '" + t.name + "' must be positive");
    }
    double inner = 0.0;
    for (double r : t.after) inner += (t.baseline - r) / t.baseline;
    const double task_fg = inner / static_cast<double>(entry.steps) * 100.0;
    entry.per_task.emplace_back(t.name, task_fg);
    outer += task_fg;
  }
  entry.fg = outer / static_cast<double>(category.tasks.size());
  return entry;
}

}  // namespace sclm
