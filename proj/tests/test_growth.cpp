#include "doctest.h"

#include <random>

#include "oracles.hpp"
#include "sclm/growth.hpp"

using namespace sclm;

namespace {

ModelConfig cfg(int layers, int d = 16) {
  ModelConfig c;
  c.d_model = d;
  c.n_heads = 4;
  c.n_layers = layers;
  c.d_ff = 32;
  c.max_seq_len = 64;
  c.seed = 21;
  return c;
}

bool block_equal(const TransformerBlock<float>& a, const TransformerBlock<float>& b) {
  ParameterList<float> pa, pb;
  a.append_parameters(pa, "");
  b.append_parameters(pb, "");
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].tensor.value() != pb[i].tensor.value()) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("growth") {
  TEST_CASE("layouts for full and middle modes") {
    CHECK(stacking_layout(2, {2, StackMode::full, 0}) == std::vector<int>{0, 1, 0, 1});
    CHECK(stacking_layout(3, {3, StackMode::full, 0}) == std::vector<int>{0, 1, 2, 0, 1, 2, 0, 1, 2});
    // L=5, span 2: overhang 3 puts the span at layers 1..2.
    CHECK(stacking_layout(5, {2, StackMode::middle, 2}) == std::vector<int>{0, 1, 2, 1, 2, 3, 4});
    CHECK(stacking_layout(4, {3, StackMode::middle, 2}) == std::vector<int>{0, 1, 2, 1, 2, 1, 2, 3});
    CHECK(GrowthSpec{3, StackMode::middle, 2}.grown_depth(4) == 8);
    CHECK_THROWS_AS(GrowthSpec({2, StackMode::middle, 5}).validate(4), ConfigError);
    CHECK_THROWS_AS(GrowthSpec({0, StackMode::full, 0}).validate(4), ConfigError);
  }

  TEST_CASE("g = 1 is an identity in both modes") {
    const auto m = init_model<float>(cfg(3));
    for (auto spec : {GrowthSpec{1, StackMode::full, 0}, GrowthSpec{1, StackMode::middle, 1}}) {
      const auto g = stack_grow(m, spec);
      const auto pa = m.parameters(), pb = g.parameters();
      REQUIRE(pa.size() == pb.size());
      for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].tensor.value() == pb[i].tensor.value());
      std::vector<int> t{256, 1, 2, 3};
      CHECK(forward(m, t).value() == forward(g, t).value());
    }
  }

  TEST_CASE("full mode provenance, parameter count, and deep copies") {
    const auto m = init_model<float>(cfg(2));
    const auto before = m.layers[0].wq.value();
    for (int g : {2, 4}) {
      auto grown = stack_grow(m, {g, StackMode::full, 0});
      REQUIRE(grown.layers.size() == static_cast<std::size_t>(2 * g));
      for (std::size_t l = 0; l < grown.layers.size(); ++l) CHECK(block_equal(grown.layers[l], m.layers[l % 2]));
      const auto base = m.parameter_count() - 2 * block_parameter_count(m.config);
      CHECK(grown.parameter_count() == base + static_cast<std::size_t>(2 * g) * block_parameter_count(m.config));
      const auto& rec = grown.provenance.growth.back();
      CHECK(rec.factor == g);
      CHECK(rec.mode == "full");
      CHECK(rec.source_depth == 2);
      CHECK(rec.grown_depth == 2 * g);
      grown.layers[2].wq.value().setZero();
      CHECK(m.layers[0].wq.value() == before);
      CHECK_FALSE(grown.layers[0].wq.value() == grown.layers[2].wq.value());
    }
  }

  TEST_CASE("one-layer g = 2 equals applying the block twice by hand") {
    // In double so the comparison measures composition, not float rounding.
    auto m = init_model<double>(cfg(1, 8));
    for (auto& p : m.parameters()) p.tensor.value() *= 10.0;
    const auto grown = stack_grow(m, {2, StackMode::full, 0});
    const auto ref = oracle::ref_model(m);
    std::mt19937_64 rng(4);
    std::vector<int> tokens(9);
    for (auto& t : tokens) t = static_cast<int>(rng() % 259);
    auto x = oracle::embed(ref, tokens);
    x = oracle::apply_block(ref.blocks[0], x, ref.n_heads, ref.eps, ref.theta);
    x = oracle::apply_block(ref.blocks[0], x, ref.n_heads, ref.eps, ref.theta);
    const auto want = oracle::unembed(ref, x);
    CHECK((forward(grown, tokens).value() - want).cwiseAbs().maxCoeff() < 1e-5);
  }
}
