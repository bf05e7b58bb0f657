#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sclm/optim.hpp"
#include "sclm/tensor.hpp"

namespace sclm {

struct ModelConfig {
  int vocab_size = 259;
  int d_model = 64;
  int n_heads = 4;
  int n_layers = 2;
  int d_ff = 256;
  int max_seq_len = 384;
  double norm_eps = 1e-5;
  double rope_theta = 10000.0;
  std::uint64_t seed = 0;

  void validate() const;
  int head_dim() const { return d_model / n_heads; }
  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// One growth event: which source layer each grown layer was copied from.
struct GrowthRecord {
  int factor = 1;
  std::string mode = "full";
  int span = 0;
  int source_depth = 0;
  int grown_depth = 0;
  std::vector<int> layer_sources;

  bool operator==(const GrowthRecord&) const = default;
};

struct TrainingRecord {
  std::string stage;  // "pretrain", "continue", "finetune"
  std::string label;
  long steps = 0;
  long tokens = 0;

  bool operator==(const TrainingRecord&) const = default;
};

/// History carried inside checkpoints.
struct Provenance {
  std::vector<GrowthRecord> growth;
  std::vector<TrainingRecord> training;
  std::vector<std::string> lineage;  // checkpoint labels this model descends from, oldest first

  bool operator==(const Provenance&) const = default;
};

void to_json(nlohmann::json& j, const Provenance& p);
void from_json(const nlohmann::json& j, Provenance& p);

/// Pre-norm decoder block: RMSNorm -> rotary causal attention -> residual ->
/// RMSNorm -> SiLU-gated feed-forward -> residual.
template <typename Scalar>
struct TransformerBlock {
  BasicTensor<Scalar> attn_norm;  // {d}
  BasicTensor<Scalar> wq, wk, wv, wo;  // {d, d}
  BasicTensor<Scalar> ffn_norm;  // {d}
  BasicTensor<Scalar> w_gate, w_up;  // {d, d_ff}
  BasicTensor<Scalar> w_down;  // {d_ff, d}

  TransformerBlock clone() const;
  void append_parameters(ParameterList<Scalar>& out, const std::string& prefix) const;
};

template <typename Scalar>
struct BasicTransformer {
  ModelConfig config;
  BasicTensor<Scalar> token_embedding;  // {vocab, d}
  std::vector<TransformerBlock<Scalar>> layers;
  BasicTensor<Scalar> final_norm;  // {d}
  BasicTensor<Scalar> lm_head;  // {d, vocab}
  Provenance provenance;

  /// Parameters in checkpoint order. Handles share storage with the model.
  ParameterList<Scalar> parameters() const;
  std::size_t parameter_count() const;
  /// Deep copy: the result shares no storage with this model.
  BasicTransformer clone() const;

  template <typename Other>
  BasicTransformer<Other> cast() const;
};

using TransformerModel = BasicTransformer<float>;

/// Scalar count of one block's parameters for `config`.
std::size_t block_parameter_count(const ModelConfig& config);

/// Parameters ~ N(0, 0.02) from `config.seed`; norm gains are 1.
template <typename Scalar>
BasicTransformer<Scalar> init_model(const ModelConfig& config);

/// Logits (T x vocab) for one token sequence.
template <typename Scalar>
BasicTensor<Scalar> forward(const BasicTransformer<Scalar>& model, std::span<const int> tokens);

/// Logits for several sequences packed row-wise; sequences never attend to
/// each other.
template <typename Scalar>
BasicTensor<Scalar> forward_packed(const BasicTransformer<Scalar>& model,
                                   const std::vector<std::vector<int>>& sequences);

/// A token sequence with a per-token loss flag. `mask[t]` marks token t as a
/// prediction target (predicted from tokens before t).
struct TrainingExample {
  std::vector<int> tokens;
  Mask mask;
};

/// Mean next-token cross-entropy over all flagged targets in the batch.
template <typename Scalar>
BasicTensor<Scalar> masked_loss(const BasicTransformer<Scalar>& model,
                                std::span<const TrainingExample> batch);

struct GenerationOptions {
  enum class Mode { greedy, temperature };
  Mode mode = Mode::greedy;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  int max_new = 32;
  std::optional<int> eos;
};

/// Continuation tokens only (the prompt is not echoed). Stops after emitting
/// `eos`, after `max_new` tokens, or when the context window is full.
template <typename Scalar>
std::vector<int> generate(const BasicTransformer<Scalar>& model, std::span<const int> prompt,
                          const GenerationOptions& options);

/// Sum of log p(continuation[i] | prompt, continuation[<i]).
template <typename Scalar>
double sequence_logprob(const BasicTransformer<Scalar>& model, std::span<const int> prompt,
                        std::span<const int> continuation);

/// Natural-log softmax of one logit row, accumulated in double.
template <typename Derived>
double log_softmax_at(const Eigen::MatrixBase<Derived>& row, Index index) {
  const double m = static_cast<double>(row.maxCoeff());
  double denom = 0.0;
  for (Index c = 0; c < row.size(); ++c) denom += std::exp(static_cast<double>(row(c)) - m);
  return static_cast<double>(row(index)) - m - std::log(denom);
}

// ---------------------------------------------------------------------------

template <typename Scalar>
template <typename Other>
BasicTransformer<Other> BasicTransformer<Scalar>::cast() const {
  BasicTransformer<Other> out;
  out.config = config;
  out.token_embedding = token_embedding.template cast<Other>();
  for (const auto& b : layers) {
    TransformerBlock<Other> c;
    c.attn_norm = b.attn_norm.template cast<Other>();
    c.wq = b.wq.template cast<Other>();
    c.wk = b.wk.template cast<Other>();
    c.wv = b.wv.template cast<Other>();
    c.wo = b.wo.template cast<Other>();
    c.ffn_norm = b.ffn_norm.template cast<Other>();
    c.w_gate = b.w_gate.template cast<Other>();
    c.w_up = b.w_up.template cast<Other>();
    c.w_down = b.w_down.template cast<Other>();
    out.layers.push_back(std::move(c));
  }
  out.final_norm = final_norm.template cast<Other>();
  out.lm_head = lm_head.template cast<Other>();
  out.provenance = provenance;
  return out;
}

}  // namespace sclm
