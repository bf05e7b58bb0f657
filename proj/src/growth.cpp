#include "sclm/growth.hpp"

namespace sclm {

std::string to_string(StackMode mode) { return mode == StackMode::full ? "full" : "middle"; }

StackMode stack_mode_from_string(const std::string& name) {
  if (name == "full") return StackMode::full;
  if (name == "middle") return StackMode::middle;
  throw ConfigError("growth: unknown stacking mode '" + name + "' (expected full or middle)");
}

void GrowthSpec::validate(int source_depth) const {
  if (factor < 1) throw ConfigError("growth: factor must be at least 1");
  if (source_depth < 1) throw ConfigError("growth: source model has no layers");
  if (mode == StackMode::middle && (span < 1 || span > source_depth)) {
    throw ConfigError("growth: middle span " + std::to_string(span) + " must lie in [1, " +
                      std::to_string(source_depth) + "]");
  }
}

int GrowthSpec::grown_depth(int source_depth) const {
  return mode == StackMode::full ? factor * source_depth : source_depth + (factor - 1) * span;
}

void to_json(nlohmann::json& j, const GrowthSpec& g) {
  j = {{"factor", g.factor}, {"mode", to_string(g.mode)}, {"span", g.span}};
}

void from_json(const nlohmann::json& j, GrowthSpec& g) {
  g.factor = j.value("factor", 2);
  g.mode = stack_mode_from_string(j.value("mode", std::string("full")));
  g.span = j.value("span", 0);
}

std::vector<int> stacking_layout(int source_depth, const GrowthSpec& spec) {
  spec.validate(source_depth);
  std::vector<int> layout;
  if (spec.mode == StackMode::full) {
    for (int r = 0; r < spec.factor; ++r) {
      for (int l = 0; l < source_depth; ++l) layout.push_back(l);
    }
    return layout;
  }
  const int start = (source_depth - spec.span) / 2;
  for (int l = 0; l < start; ++l) layout.push_back(l);
  for (int r = 0; r < spec.factor; ++r) {
    for (int l = start; l < start + spec.span; ++l) layout.push_back(l);
  }
  for (int l = start + spec.span; l < source_depth; ++l) layout.push_back(l);
  return layout;
}

template <typename Scalar>
BasicTransformer<Scalar> stack_grow(const BasicTransformer<Scalar>& model, const GrowthSpec& spec) {
  const int depth = static_cast<int>(model.layers.size());
  const auto layout = stacking_layout(depth, spec);

  BasicTransformer<Scalar> grown;
  grown.config = model.config;
  grown.config.n_layers = static_cast<int>(layout.size());
  grown.token_embedding = model.token_embedding.clone();
  for (int src : layout) grown.layers.push_back(model.layers[static_cast<std::size_t>(src)].clone());
  grown.final_norm = model.final_norm.clone();
  grown.lm_head = model.lm_head.clone();
  grown.provenance = model.provenance;
  grown.provenance.growth.push_back(
      {spec.factor, to_string(spec.mode), spec.mode == StackMode::middle ? spec.span : 0, depth,
       static_cast<int>(layout.size()), layout});
  return grown;
}

template BasicTransformer<float> stack_grow(const BasicTransformer<float>&, const GrowthSpec&);
template BasicTransformer<double> stack_grow(const BasicTransformer<double>&, const GrowthSpec&);

}  // namespace sclm
