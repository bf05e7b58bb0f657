#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "sclm/checkpoint.hpp"
#include "sclm/growth.hpp"
#include "sclm/model.hpp"

using namespace sclm;

namespace {

ModelConfig micro(int layers = 1, int d = 8, int heads = 2, int vocab = 259) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.d_model = d;
  c.n_heads = heads;
  c.n_layers = layers;
  c.d_ff = 2 * d;
  c.max_seq_len = 64;
  c.seed = 7;
  return c;
}

// Larger init scale so the oracle comparison exercises non-trivial values.
TransformerModel spread(TransformerModel m, float factor) {
  for (auto& p : m.parameters()) {
    if (p.tensor.shape().size() == 2) p.tensor.value() *= factor;
  }
  return m;
}

std::vector<int> random_tokens(std::mt19937_64& rng, std::size_t n, int vocab) {
  std::vector<int> t(n);
  for (auto& x : t) x = static_cast<int>(rng() % static_cast<std::uint64_t>(vocab));
  return t;
}

bool params_equal(const TransformerModel& a, const TransformerModel& b) {
  const auto pa = a.parameters(), pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].name != pb[i].name || pa[i].tensor.value() != pb[i].tensor.value()) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("init is deterministic per seed with unit gains") {
    auto a = init_model<float>(micro(2));
    auto b = init_model<float>(micro(2));
    CHECK(params_equal(a, b));
    auto c2 = micro(2);
    c2.seed = 8;
    CHECK_FALSE(params_equal(a, init_model<float>(c2)));
    for (const auto& l : a.layers) {
      CHECK((l.attn_norm.value().array() == 1.f).all());
      CHECK((l.ffn_norm.value().array() == 1.f).all());
    }
    CHECK((a.final_norm.value().array() == 1.f).all());
  }

  TEST_CASE("invalid configs are rejected") {
    auto c = micro();
    c.n_heads = 3;
    CHECK_THROWS_AS(init_model<float>(c), ConfigError);
    c = micro();
    c.n_layers = 0;
    CHECK_THROWS_AS(init_model<float>(c), ConfigError);
  }

  TEST_CASE("forward matches the step-by-step reference within 1e-4") {
    auto m = spread(init_model<float>(micro(1, 8, 2)), 20.f);
    const auto ref = oracle::ref_model(m);
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 5; ++trial) {
      const auto tokens = random_tokens(rng, 3 + static_cast<std::size_t>(trial) * 4, 259);
      const auto got = forward(m, tokens);
      const auto want = oracle::forward(ref, tokens);
      REQUIRE(got.rows() == static_cast<Index>(tokens.size()));
      REQUIRE(got.cols() == 259);
      CHECK((got.value().cast<double>() - want).cwiseAbs().maxCoeff() < 1e-4);
    }
  }

  TEST_CASE("two-layer forward matches the reference too") {
    auto m = spread(init_model<float>(micro(2, 16, 4)), 10.f);
    const auto ref = oracle::ref_model(m);
    std::mt19937_64 rng(6);
    const auto tokens = random_tokens(rng, 12, 259);
    CHECK((forward(m, tokens).value().cast<double>() - oracle::forward(ref, tokens)).cwiseAbs().maxCoeff() < 1e-4);
  }

  TEST_CASE("appending tokens never changes earlier logits") {
    auto m = spread(init_model<float>(micro(2, 16, 4)), 10.f);
    std::mt19937_64 rng(9);
    const auto tokens = random_tokens(rng, 20, 259);
    const auto full = forward(m, tokens);
    for (std::size_t len = 1; len < tokens.size(); len += 3) {
      const auto prefix = forward(m, std::span<const int>(tokens.data(), len));
      CHECK(prefix.value() == full.value().topRows(static_cast<Index>(len)));
    }
  }

  TEST_CASE("packed batches equal separate forwards") {
    auto m = init_model<float>(micro(2, 16, 4));
    std::vector<std::vector<int>> seqs{{1, 2, 3}, {9, 8, 7, 6, 5}, {42}};
    const auto packed = forward_packed(m, seqs);
    Index off = 0;
    for (const auto& s : seqs) {
      const auto single = forward(m, s);
      CHECK((packed.value().middleRows(off, static_cast<Index>(s.size())) - single.value()).cwiseAbs().maxCoeff() <
            1e-6);
      off += static_cast<Index>(s.size());
    }
  }

  TEST_CASE("bad token ids and over-long inputs are input errors") {
    auto m = init_model<float>(micro());
    std::vector<int> bad{1, 259};
    CHECK_THROWS_AS(forward(m, bad), InputError);
    std::vector<int> neg{-1};
    CHECK_THROWS_AS(forward(m, neg), InputError);
    std::vector<int> longer(65, 1);
    CHECK_THROWS_AS(forward(m, longer), InputError);
  }

  TEST_CASE("masked loss equals explicit per-position summation") {
    auto m = spread(init_model<float>(micro(1, 8, 2)), 20.f);
    const auto ref = oracle::ref_model(m);
    std::mt19937_64 rng(2);
    std::vector<TrainingExample> batch;
    for (int b = 0; b < 3; ++b) {
      TrainingExample ex;
      ex.tokens = random_tokens(rng, 6 + static_cast<std::size_t>(b), 259);
      for (std::size_t t = 0; t < ex.tokens.size(); ++t) ex.mask.push_back((rng() % 2) || t + 1 == ex.tokens.size());
      batch.push_back(ex);
    }
    double total = 0;
    int count = 0;
    for (const auto& ex : batch) {
      std::vector<int> in(ex.tokens.begin(), ex.tokens.end() - 1);
      const auto logits = oracle::forward(ref, in);
      for (std::size_t t = 1; t < ex.tokens.size(); ++t) {
        if (!ex.mask[t]) continue;
        total -= oracle::log_softmax(logits, static_cast<Index>(t - 1), ex.tokens[t]);
        ++count;
      }
    }
    CHECK(masked_loss(m, std::span<const TrainingExample>(batch)).item() ==
          doctest::Approx(total / count).epsilon(1e-5));
  }

  TEST_CASE("masked loss: one uniform target gives ln V, all-masked is degenerate") {
    auto m = init_model<float>(micro(1, 8, 2));
    m.lm_head.value().setZero();
    TrainingExample ex{{5, 6, 7, 8}, {0, 0, 1, 0}};
    CHECK(masked_loss(m, std::span<const TrainingExample>(&ex, 1)).item() ==
          doctest::Approx(std::log(259.0)).epsilon(1e-6));
    TrainingExample none{{5, 6, 7}, {1, 0, 0}};  // position 0 is never a target
    CHECK_THROWS_AS(masked_loss(m, std::span<const TrainingExample>(&none, 1)), DataError);
  }

  TEST_CASE("longer masked prompts leave the mean over the same targets defined") {
    auto m = init_model<float>(micro(1, 8, 2));
    TrainingExample a{{1, 2, 3, 4}, {0, 0, 1, 1}};
    TrainingExample b{{1, 2, 2, 2, 3, 4}, {0, 0, 0, 0, 1, 1}};
    const double la = masked_loss(m, std::span<const TrainingExample>(&a, 1)).item();
    const double lb = masked_loss(m, std::span<const TrainingExample>(&b, 1)).item();
    CHECK(std::isfinite(la));
    CHECK(std::isfinite(lb));
  }

  TEST_CASE("greedy generation is deterministic and respects limits") {
    auto m = spread(init_model<float>(micro(2, 16, 4)), 10.f);
    std::vector<int> prompt{256, 72, 105};
    GenerationOptions g;
    g.max_new = 12;
    CHECK(generate(m, prompt, g) == generate(m, prompt, g));
    CHECK(generate(m, prompt, g).size() == 12);
    g.max_new = 0;
    CHECK(generate(m, prompt, g).empty());
    GenerationOptions t;
    t.mode = GenerationOptions::Mode::temperature;
    t.temperature = 0.8;
    t.seed = 99;
    t.max_new = 10;
    CHECK(generate(m, prompt, t) == generate(m, prompt, t));
    std::vector<int> empty;
    CHECK_THROWS_AS(generate(m, empty, g), InputError);
    std::vector<int> too_long(65, 1);
    CHECK_THROWS_AS(generate(m, too_long, g), InputError);
  }

  TEST_CASE("greedy stops at EOS and breaks ties toward the lowest id") {
    auto m = init_model<float>(micro(1, 8, 2));
    m.lm_head.value().setZero();  // every logit ties
    std::vector<int> prompt{256};
    GenerationOptions g;
    g.max_new = 4;
    CHECK(generate(m, prompt, g) == std::vector<int>{0, 0, 0, 0});
    g.eos = 0;
    CHECK(generate(m, prompt, g) == std::vector<int>{0});
  }

  TEST_CASE("sequence logprob: single token, chain rule, enumeration") {
    auto m = spread(init_model<float>(micro(1, 8, 2)), 20.f);
    const auto ref = oracle::ref_model(m);
    std::vector<int> prompt{256, 10, 20};
    std::vector<int> one{30};
    const auto logits = forward(m, prompt);
    CHECK(sequence_logprob(m, prompt, one) ==
          doctest::Approx(log_softmax_at(logits.value().row(2), 30)).epsilon(1e-6));

    std::vector<int> cont{30, 40, 50, 60};
    std::vector<int> whole = prompt;
    whole.insert(whole.end(), cont.begin(), cont.end());
    const auto ref_logits = oracle::forward(ref, whole);
    double prob = 1.0;
    for (std::size_t i = 0; i < cont.size(); ++i) {
      prob *= std::exp(oracle::log_softmax(ref_logits, static_cast<Index>(prompt.size() + i - 1), cont[i]));
    }
    const double lp = sequence_logprob(m, prompt, cont);
    CHECK(lp <= 0.0);
    CHECK(std::exp(lp) == doctest::Approx(prob).epsilon(1e-5));

    std::vector<int> c1{30, 40}, c2{50, 60};
    std::vector<int> p2 = prompt;
    p2.insert(p2.end(), c1.begin(), c1.end());
    CHECK(lp == doctest::Approx(sequence_logprob(m, prompt, c1) + sequence_logprob(m, p2, c2)).epsilon(1e-6));

    std::vector<int> empty;
    CHECK_THROWS_AS(sequence_logprob(m, prompt, empty), ContractError);
  }

  TEST_CASE("double and float models agree") {
    auto m = init_model<float>(micro(2, 16, 4));
    auto d = m.cast<double>();
    std::vector<int> t{1, 2, 3, 4, 5};
    CHECK((forward(m, t).value().cast<double>() - forward(d, t).value()).cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_SUITE("checkpoint") {
  TEST_CASE("round trip is bit-exact with provenance, grown and ungrown") {
    auto m = spread(init_model<float>(micro(2, 16, 4)), 3.f);
    m.provenance.training.push_back({"pretrain", "pretrain", 10, 1280});
    for (const auto& model : {m, stack_grow(m, GrowthSpec{2, StackMode::full, 0})}) {
      const auto back = decode_checkpoint(encode_checkpoint(model));
      CHECK(params_equal(model, back));
      CHECK(back.config == model.config);
      CHECK(back.provenance == model.provenance);
    }
    const auto path = std::filesystem::temp_directory_path() / "sclm_test_roundtrip.sclm";
    save_checkpoint(m, path);
    CHECK(params_equal(m, load_checkpoint(path)));
    std::filesystem::remove(path);
  }

  TEST_CASE("corruption is reported with distinct kinds") {
    const auto bytes = encode_checkpoint(init_model<float>(micro()));
    auto kind_of = [](const std::string& b) {
      try {
        (void)decode_checkpoint(b);
      } catch (const CheckpointError& e) {
        return e.kind();
      }
      FAIL("expected a checkpoint error");
      return CheckpointError::Kind::io;
    };
    CHECK(kind_of(bytes.substr(0, bytes.size() - 7)) == CheckpointError::Kind::truncated);
    CHECK(kind_of(bytes.substr(0, 6)) == CheckpointError::Kind::truncated);
    auto magic = bytes;
    magic[0] = 'X';
    CHECK(kind_of(magic) == CheckpointError::Kind::bad_magic);
    auto version = bytes;
    version[4] = 9;
    CHECK(kind_of(version) == CheckpointError::Kind::version_mismatch);
    auto header = bytes;
    header[12] = '#';
    CHECK(kind_of(header) == CheckpointError::Kind::corrupt_header);
    CHECK(kind_of(bytes + "xyz") == CheckpointError::Kind::size_mismatch);
    // Same-length edit of the first declared byte count.
    auto declared = bytes;
    auto at = declared.find("\"nbytes\":");
    REQUIRE(at != std::string::npos);
    at += 9;
    while (std::isdigit(static_cast<unsigned char>(declared[at + 1]))) ++at;
    declared[at] = declared[at] == '9' ? '8' : static_cast<char>(declared[at] + 1);
    CHECK(kind_of(declared) == CheckpointError::Kind::size_mismatch);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/dir/none.sclm"), CheckpointError);
  }
}
