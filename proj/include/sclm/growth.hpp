#pragma once

#include <string>
#include <vector>

#include "sclm/model.hpp"

namespace sclm {

enum class StackMode { full, middle };

std::string to_string(StackMode mode);
StackMode stack_mode_from_string(const std::string& name);

struct GrowthSpec {
  int factor = 2;
  StackMode mode = StackMode::full;
  int span = 0;  // middle mode only

  void validate(int source_depth) const;
  int grown_depth(int source_depth) const;
};

void to_json(nlohmann::json& j, const GrowthSpec& g);
void from_json(const nlohmann::json& j, GrowthSpec& g);

/// Source layer index for every layer of the grown model.
///
/// Full mode repeats the whole block sequence `factor` times. Middle mode
/// repeats a contiguous span of `span` layers in place; the span is centred,
/// and an odd overhang puts the extra outer layer at the end.
std::vector<int> stacking_layout(int source_depth, const GrowthSpec& spec);

/// Deeper model whose blocks are deep copies of the source blocks laid out by
/// `stacking_layout`. Embeddings, final norm and head are copied once. The
/// source is left untouched and the growth event is appended to provenance.
template <typename Scalar>
BasicTransformer<Scalar> stack_grow(const BasicTransformer<Scalar>& model, const GrowthSpec& spec);

}  // namespace sclm
