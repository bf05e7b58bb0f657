#include "sclm/model.hpp"

#include <random>

namespace sclm {

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw ConfigError(std::string("model: ") + name + " must be positive");
  };
  positive(vocab_size, "vocab_size");
  positive(d_model, "d_model");
  positive(n_heads, "n_heads");
  positive(n_layers, "n_layers");
  positive(d_ff, "d_ff");
  positive(max_seq_len, "max_seq_len");
  if (d_model % n_heads != 0) throw ConfigError("model: d_model must be divisible by n_heads");
  if (head_dim() % 2 != 0) throw ConfigError("model: head dimension must be even for rotary encoding");
  if (!(norm_eps > 0.0)) throw ConfigError("model: norm_eps must be positive");
  if (!(rope_theta > 0.0)) throw ConfigError("model: rope_theta must be positive");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"vocab_size", c.vocab_size}, {"d_model", c.d_model},
                     {"n_heads", c.n_heads},       {"n_layers", c.n_layers},
                     {"d_ff", c.d_ff},             {"max_seq_len", c.max_seq_len},
                     {"norm_eps", c.norm_eps},     {"rope_theta", c.rope_theta},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.vocab_size = j.value("vocab_size", d.vocab_size);
  c.d_model = j.value("d_model", d.d_model);
  c.n_heads = j.value("n_heads", d.n_heads);
  c.n_layers = j.value("n_layers", d.n_layers);
  c.d_ff = j.value("d_ff", d.d_ff);
  c.max_seq_len = j.value("max_seq_len", d.max_seq_len);
  c.norm_eps = j.value("norm_eps", d.norm_eps);
  c.rope_theta = j.value("rope_theta", d.rope_theta);
  c.seed = j.value("seed", d.seed);
}

void to_json(nlohmann::json& j, const Provenance& p) {
  j = nlohmann::json::object();
  j["growth"] = nlohmann::json::array();
  for (const auto& g : p.growth) {
    j["growth"].push_back({{"factor", g.factor},
                           {"mode", g.mode},
                           {"span", g.span},
                           {"source_depth", g.source_depth},
                           {"grown_depth", g.grown_depth},
                           {"layer_sources", g.layer_sources}});
  }
  j["training"] = nlohmann::json::array();
  for (const auto& t : p.training) {
    j["training"].push_back(
        {{"stage", t.stage}, {"label", t.label}, {"steps", t.steps}, {"tokens", t.tokens}});
  }
  j["lineage"] = p.lineage;
}

void from_json(const nlohmann::json& j, Provenance& p) {
  p = Provenance{};
  for (const auto& g : j.at("growth")) {
    GrowthRecord r;
    r.factor = g.at("factor").get<int>();
    r.mode = g.at("mode").get<std::string>();
    r.span = g.at("span").get<int>();
    r.source_depth = g.at("source_depth").get<int>();
    r.grown_depth = g.at("grown_depth").get<int>();
    r.layer_sources = g.at("layer_sources").get<std::vector<int>>();
    p.growth.push_back(std::move(r));
  }
  for (const auto& t : j.at("training")) {
    p.training.push_back({t.at("stage").get<std::string>(), t.at("label").get<std::string>(),
                          t.at("steps").get<long>(), t.at("tokens").get<long>()});
  }
  p.lineage = j.at("lineage").get<std::vector<std::string>>();
}

// ---------------------------------------------------------------------------

template <typename Scalar>
TransformerBlock<Scalar> TransformerBlock<Scalar>::clone() const {
  return {attn_norm.clone(), wq.clone(),     wk.clone(),   wv.clone(),    wo.clone(),
          ffn_norm.clone(),  w_gate.clone(), w_up.clone(), w_down.clone()};
}

template <typename Scalar>
void TransformerBlock<Scalar>::append_parameters(ParameterList<Scalar>& out,
                                                 const std::string& prefix) const {
  out.push_back({prefix + "attn_norm", attn_norm});
  out.push_back({prefix + "wq", wq});
  out.push_back({prefix + "wk", wk});
  out.push_back({prefix + "wv", wv});
  out.push_back({prefix + "wo", wo});
  out.push_back({prefix + "ffn_norm", ffn_norm});
  out.push_back({prefix + "w_gate", w_gate});
  out.push_back({prefix + "w_up", w_up});
  out.push_back({prefix + "w_down", w_down});
}

template <typename Scalar>
ParameterList<Scalar> BasicTransformer<Scalar>::parameters() const {
  ParameterList<Scalar> out;
  out.push_back({"token_embedding", token_embedding});
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].append_parameters(out, "layers." + std::to_string(i) + ".");
  }
  out.push_back({"final_norm", final_norm});
  out.push_back({"lm_head", lm_head});
  return out;
}

template <typename Scalar>
std::size_t BasicTransformer<Scalar>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += static_cast<std::size_t>(p.tensor.size());
  return n;
}

template <typename Scalar>
BasicTransformer<Scalar> BasicTransformer<Scalar>::clone() const {
  BasicTransformer out;
  out.config = config;
  out.token_embedding = token_embedding.clone();
  for (const auto& b : layers) out.layers.push_back(b.clone());
  out.final_norm = final_norm.clone();
  out.lm_head = lm_head.clone();
  out.provenance = provenance;
  return out;
}

std::size_t block_parameter_count(const ModelConfig& c) {
  const auto d = static_cast<std::size_t>(c.d_model);
  const auto f = static_cast<std::size_t>(c.d_ff);
  return 2 * d + 4 * d * d + 3 * d * f;
}

template <typename Scalar>
BasicTransformer<Scalar> init_model(const ModelConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  auto weight = [&](Index rows, Index cols) {
    Matrix<Scalar> m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(normal(rng));
    return BasicTensor<Scalar>({rows, cols}, std::move(m), true);
  };
  auto gain = [](Index n) {
    return BasicTensor<Scalar>({n}, Matrix<Scalar>::Ones(1, n), true);
  };
  const Index d = config.d_model;
  const Index f = config.d_ff;
  const Index v = config.vocab_size;

  BasicTransformer<Scalar> model;
  model.config = config;
  model.token_embedding = weight(v, d);
  for (int l = 0; l < config.n_layers; ++l) {
    TransformerBlock<Scalar> b;
    b.attn_norm = gain(d);
    b.wq = weight(d, d);
    b.wk = weight(d, d);
    b.wv = weight(d, d);
    b.wo = weight(d, d);
    b.ffn_norm = gain(d);
    b.w_gate = weight(d, f);
    b.w_up = weight(d, f);
    b.w_down = weight(f, d);
    model.layers.push_back(std::move(b));
  }
  model.final_norm = gain(d);
  model.lm_head = weight(d, v);
  return model;
}

namespace {

template <typename Scalar>
void check_tokens(const ModelConfig& config, std::span<const int> tokens) {
  if (tokens.empty()) throw InputError("forward: empty token sequence");
  if (static_cast<int>(tokens.size()) > config.max_seq_len) {
    throw InputError("forward: sequence of " + std::to_string(tokens.size()) +
                     " tokens exceeds max_seq_len " + std::to_string(config.max_seq_len));
  }
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (tokens[t] < 0 || tokens[t] >= config.vocab_size) {
      throw InputError("forward: token id " + std::to_string(tokens[t]) + " at position " +
                       std::to_string(t) + " outside vocabulary of " +
                       std::to_string(config.vocab_size));
    }
  }
}

}  // namespace

template <typename Scalar>
BasicTensor<Scalar> forward_packed(const BasicTransformer<Scalar>& model,
                                   const std::vector<std::vector<int>>& sequences) {
  const auto& cfg = model.config;
  if (sequences.empty()) throw InputError("forward: no sequences");
  std::vector<int> ids;
  std::vector<int> positions;
  std::vector<Index> segments;
  for (const auto& seq : sequences) {
    check_tokens<Scalar>(cfg, seq);
    ids.insert(ids.end(), seq.begin(), seq.end());
    for (std::size_t t = 0; t < seq.size(); ++t) positions.push_back(static_cast<int>(t));
    segments.push_back(static_cast<Index>(seq.size()));
  }

  auto x = embedding(model.token_embedding, ids);
  for (const auto& block : model.layers) {
    auto h = rms_norm(x, block.attn_norm, cfg.norm_eps);
    auto q = rotary(matmul(h, block.wq), cfg.n_heads, positions, cfg.rope_theta);
    auto k = rotary(matmul(h, block.wk), cfg.n_heads, positions, cfg.rope_theta);
    auto v = matmul(h, block.wv);
    x = x + matmul(causal_attention(q, k, v, cfg.n_heads, segments), block.wo);
    auto h2 = rms_norm(x, block.ffn_norm, cfg.norm_eps);
    auto gated = silu(matmul(h2, block.w_gate)) * matmul(h2, block.w_up);
    x = x + matmul(gated, block.w_down);
  }
  return matmul(rms_norm(x, model.final_norm, cfg.norm_eps), model.lm_head);
}

template <typename Scalar>
BasicTensor<Scalar> forward(const BasicTransformer<Scalar>& model, std::span<const int> tokens) {
  return forward_packed(model, {std::vector<int>(tokens.begin(), tokens.end())});
}

template <typename Scalar>
BasicTensor<Scalar> masked_loss(const BasicTransformer<Scalar>& model,
                                std::span<const TrainingExample> batch) {
  std::vector<std::vector<int>> inputs;
  std::vector<int> targets;
  Mask mask;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& ex = batch[b];
    if (ex.mask.size() != ex.tokens.size()) {
      throw DimensionError("masked_loss", "example " + std::to_string(b) + " has " +
                                              std::to_string(ex.tokens.size()) + " tokens but " +
                                              std::to_string(ex.mask.size()) + " mask entries");
    }
    if (ex.tokens.size() < 2) continue;  // nothing to predict
    inputs.emplace_back(ex.tokens.begin(), ex.tokens.end() - 1);
    targets.insert(targets.end(), ex.tokens.begin() + 1, ex.tokens.end());
    mask.insert(mask.end(), ex.mask.begin() + 1, ex.mask.end());
  }
  bool any = false;
  for (auto m : mask) any = any || m;
  if (!any) throw DataError("masked_loss: degenerate batch, no unmasked target positions");
  auto logits = forward_packed(model, inputs);
  return masked_cross_entropy(logits, targets, mask);
}

template <typename Scalar>
std::vector<int> generate(const BasicTransformer<Scalar>& model, std::span<const int> prompt,
                          const GenerationOptions& options) {
  if (prompt.empty()) throw InputError("generate: empty prompt");
  if (static_cast<int>(prompt.size()) > model.config.max_seq_len) {
    throw InputError("generate: prompt of " + std::to_string(prompt.size()) +
                     " tokens exceeds max_seq_len " + std::to_string(model.config.max_seq_len));
  }
  if (options.mode == GenerationOptions::Mode::temperature && !(options.temperature > 0.0)) {
    throw InputError("generate: temperature must be positive");
  }
  NoGradGuard no_grad;
  std::mt19937_64 rng(options.seed);
  std::vector<int> context(prompt.begin(), prompt.end());
  std::vector<int> out;
  while (static_cast<int>(out.size()) < options.max_new &&
         static_cast<int>(context.size()) < model.config.max_seq_len) {
    const auto logits = forward(model, context);
    const auto row = logits.value().row(logits.rows() - 1);
    int next = 0;
    if (options.mode == GenerationOptions::Mode::greedy) {
      for (Index c = 1; c < row.size(); ++c) {
        if (row(c) > row(next)) next = static_cast<int>(c);  // strict: ties keep the lowest id
      }
    } else {
      const double m = static_cast<double>(row.maxCoeff());
      std::vector<double> w(static_cast<std::size_t>(row.size()));
      double total = 0.0;
      for (Index c = 0; c < row.size(); ++c) {
        w[static_cast<std::size_t>(c)] =
            std::exp((static_cast<double>(row(c)) - m) / options.temperature);
        total += w[static_cast<std::size_t>(c)];
      }
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * total;
      double acc = 0.0;
      next = static_cast<int>(row.size()) - 1;
      for (std::size_t c = 0; c < w.size(); ++c) {
        acc += w[c];
        if (u < acc) {
          next = static_cast<int>(c);
          break;
        }
      }
    }
    out.push_back(next);
    context.push_back(next);
    if (options.eos && next == *options.eos) break;
  }
  return out;
}

template <typename Scalar>
double sequence_logprob(const BasicTransformer<Scalar>& model, std::span<const int> prompt,
                        std::span<const int> continuation) {
  if (continuation.empty()) throw ContractError("sequence_logprob: empty continuation");
  if (prompt.empty()) throw InputError("sequence_logprob: empty prompt (prepend BOS)");
  const auto total = prompt.size() + continuation.size();
  if (static_cast<int>(total) > model.config.max_seq_len) {
    throw InputError("sequence_logprob: " + std::to_string(total) +
                     " tokens exceed max_seq_len " + std::to_string(model.config.max_seq_len));
  }
  NoGradGuard no_grad;
  std::vector<int> seq(prompt.begin(), prompt.end());
  seq.insert(seq.end(), continuation.begin(), continuation.end() - 1);
  const auto logits = forward(model, seq);
  double lp = 0.0;
  for (std::size_t i = 0; i < continuation.size(); ++i) {
    const auto row = static_cast<Index>(prompt.size() - 1 + i);
    lp += log_softmax_at(logits.value().row(row), continuation[i]);
  }
  return lp;
}

#define SCLM_INSTANTIATE_MODEL(S)                                                              \
  template struct TransformerBlock<S>;                                                         \
  template struct BasicTransformer<S>;                                                         \
  template BasicTransformer<S> init_model<S>(const ModelConfig&);                              \
  template BasicTensor<S> forward(const BasicTransformer<S>&, std::span<const int>);           \
  template BasicTensor<S> forward_packed(const BasicTransformer<S>&,                           \
                                         const std::vector<std::vector<int>>&);                \
  template BasicTensor<S> masked_loss(const BasicTransformer<S>&,                              \
                                      std::span<const TrainingExample>);                       \
  template std::vector<int> generate(const BasicTransformer<S>&, std::span<const int>,         \
                                     const GenerationOptions&);                                \
  template double sequence_logprob(const BasicTransformer<S>&, std::span<const int>,           \
                                   std::span<const int>);

SCLM_INSTANTIATE_MODEL(float)
SCLM_INSTANTIATE_MODEL(double)

#undef SCLM_INSTANTIATE_MODEL

}  // namespace sclm
