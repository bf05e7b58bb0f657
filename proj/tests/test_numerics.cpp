#include "doctest.h"

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sclm/model.hpp"
#include "sclm/optim.hpp"
#include "sclm/tensor.hpp"

using namespace sclm;

namespace {

Tensor mat(std::initializer_list<std::initializer_list<float>> rows, bool rg = false) {
  Matrix<float> m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index r = 0;
  for (const auto& row : rows) {
    Index c = 0;
    for (float v : row) m(r, c++) = v;
    ++r;
  }
  return Tensor::matrix(std::move(m), rg);
}

Tensor vec(std::vector<float> v, bool rg = false) { return Tensor::vector(v, rg); }

}  // namespace

TEST_SUITE("numerics") {
  TEST_CASE("softmax of equal logits is uniform and rows sum to one") {
    auto s = softmax(mat({{0.f, 0.f}}));
    CHECK(s.value()(0, 0) == doctest::Approx(0.5));
    CHECK(s.value()(0, 1) == doctest::Approx(0.5));
    std::mt19937 rng(3);
    std::normal_distribution<float> n(0, 4);
    Matrix<float> m(5, 7);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    auto p = softmax(Tensor::matrix(m));
    for (Index r = 0; r < 5; ++r) CHECK(std::abs(p.value().row(r).sum() - 1.0f) < 1e-6f);
  }

  TEST_CASE("cross-entropy of uniform logits at one target is ln V") {
    const int V = 259;
    Tensor logits({3, V}, Matrix<float>::Zero(3, V));
    std::vector<int> targets{5, 17, 200};
    Mask mask{0, 1, 0};
    auto ce = masked_cross_entropy(logits, targets, mask);
    CHECK(ce.item() == doctest::Approx(std::log(static_cast<double>(V))).epsilon(1e-6));
    CHECK(ce.item() >= 0.f);
    Mask none{0, 0, 0};
    CHECK_THROWS_AS(masked_cross_entropy(logits, targets, none), DataError);
  }

  TEST_CASE("rms norm of a constant vector is its sign") {
    auto gain = Tensor({4}, Matrix<float>::Ones(1, 4));
    auto pos = rms_norm(mat({{2.5f, 2.5f, 2.5f, 2.5f}}), gain, 0.0);
    auto neg = rms_norm(mat({{-0.3f, -0.3f, -0.3f, -0.3f}}), gain, 0.0);
    for (Index c = 0; c < 4; ++c) {
      CHECK(pos.value()(0, c) == doctest::Approx(1.0));
      CHECK(neg.value()(0, c) == doctest::Approx(-1.0));
    }
  }

  TEST_CASE("shape mismatches name the primitive") {
    auto a = mat({{1, 2, 3}});
    auto b = mat({{1, 2}});
    try {
      (void)matmul(a, b);
      FAIL("expected a dimension error");
    } catch (const DimensionError& e) {
      CHECK(e.primitive() == "matmul");
    }
    CHECK_THROWS_AS(add(a, b), DimensionError);
  }

  TEST_CASE("backward of sum is all ones and dot(x, x) gives 2x") {
    auto x = vec({1.f, -2.f, 3.5f}, true);
    sum(x).backward();
    for (Index i = 0; i < 3; ++i) CHECK(x.grad()(0, i) == 1.f);
    auto y = vec({1.f, -2.f, 3.5f}, true);
    dot(y, y).backward();
    for (Index i = 0; i < 3; ++i) CHECK(y.grad()(0, i) == doctest::Approx(2 * y.value()(0, i)));
  }

  TEST_CASE("gradients accumulate over repeated use") {
    auto x = vec({2.f, 3.f}, true);
    sum(x + x * 3.f).backward();
    CHECK(x.grad()(0, 0) == doctest::Approx(4.0));
    CHECK(x.grad()(0, 1) == doctest::Approx(4.0));
  }

  TEST_CASE("backward on a non-scalar is a contract error") {
    auto x = vec({1.f, 2.f}, true);
    CHECK_THROWS_AS((x * 2.f).backward(), ContractError);
  }

  TEST_CASE("no-grad guard records no graph") {
    auto x = vec({1.f, 2.f}, true);
    {
      NoGradGuard g;
      auto y = sum(x * 2.f);
      CHECK_FALSE(y.requires_grad());
    }
    CHECK(NoGradGuard::grad_enabled());
  }

  TEST_CASE("primitive gradients match finite differences in double") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0, 1);
    auto random = [&](Index r, Index c) {
      Matrix<double> m(r, c);
      for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
      return TensorD({r, c}, m, true);
    };
    auto a = random(5, 8);
    auto w = random(8, 8);
    auto gain = TensorD({8}, Matrix<double>::Random(1, 8), true);
    std::vector<int> pos{0, 1, 2, 3, 4};
    std::vector<Index> segs{2, 3};
    std::vector<int> targets{1, 3, 0, 7, 2};
    Mask mask{1, 0, 1, 1, 1};
    auto loss_of = [&] {
      auto h = rms_norm(a, gain, 1e-5);
      auto q = rotary(matmul(h, w), 2, pos, 10000.0);
      auto att = causal_attention(q, q, silu(h), 2, segs);
      return masked_cross_entropy(att * h, targets, mask);
    };
    auto loss = loss_of();
    loss.backward();
    for (auto* t : {&a, &w, &gain}) {
      std::vector<double*> ptrs;
      for (Index i = 0; i < t->size(); ++i) ptrs.push_back(t->value().data() + i);
      const auto fd = oracle::finite_difference(ptrs, [&] {
        NoGradGuard g;
        return loss_of().item();
      }, 1e-5);
      for (std::size_t i = 0; i < fd.size(); ++i) {
        CHECK(t->grad().data()[i] == doctest::Approx(fd[i]).epsilon(1e-5).scale(1.0));
      }
    }
  }

  TEST_CASE("adam: zero gradients without decay leave parameters unchanged") {
    auto p = vec({0.5f, -1.f}, true);
    ParameterList<float> params{{"p", p}};
    AdamState<float> st(params, {});
    p.grad().setZero();
    const auto before = p.value();
    st.step(params, 0.1);
    CHECK(p.value() == before);
    CHECK(st.step_count() == 1);
  }

  TEST_CASE("adam: first step with a constant gradient moves by about lr") {
    auto p = vec({1.f, 1.f}, true);
    ParameterList<float> params{{"p", p}};
    AdamState<float> st(params, {});
    p.grad().setConstant(0.37f);
    st.step(params, 0.01);
    CHECK(p.value()(0, 0) == doctest::Approx(0.99).epsilon(1e-5));
  }

  TEST_CASE("adam: ten steps on x^2 shrink |x| monotonically") {
    auto x = vec({1.f}, true);
    ParameterList<float> params{{"x", x}};
    AdamState<float> st(params, {});
    double prev = 1.0;
    for (int i = 0; i < 10; ++i) {
      zero_grad(params);
      dot(x, x).backward();
      st.step(params, 0.1);
      const double now = std::abs(x.value()(0, 0));
      CHECK(now < prev);
      prev = now;
    }
  }

  TEST_CASE("adam: decoupled weight decay shrinks before the moment update") {
    auto p = vec({2.f}, true);
    ParameterList<float> params{{"p", p}};
    AdamState<float> st(params, {0.9, 0.999, 1e-8, 0.5});
    p.grad().setZero();
    st.step(params, 0.1);
    CHECK(p.value()(0, 0) == doctest::Approx(2.0 * (1 - 0.1 * 0.5)));
  }

  TEST_CASE("adam: non-finite gradient names the parameter") {
    auto p = vec({1.f}, true);
    ParameterList<float> params{{"layers.0.wq", p}};
    AdamState<float> st(params, {});
    p.grad().setConstant(std::numeric_limits<float>::quiet_NaN());
    try {
      st.step(params, 0.1);
      FAIL("expected a numeric error");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("layers.0.wq") != std::string::npos);
    }
  }

  TEST_CASE("adam updates are deterministic") {
    auto run = [] {
      auto p = vec({0.3f, -0.7f, 1.1f}, true);
      ParameterList<float> params{{"p", p}};
      AdamState<float> st(params, {0.9, 0.999, 1e-8, 0.01});
      for (int i = 0; i < 5; ++i) {
        zero_grad(params);
        dot(p, p).backward();
        st.step(params, 0.05);
      }
      return Matrix<float>(p.value());
    };
    CHECK(run() == run());
  }

  TEST_CASE("lr schedule boundary values") {
    ScheduleSpec c{ScheduleKind::constant, 2e-5, 0, 50, 2e-6};
    CHECK(lr_at(0, c) == 2e-5);
    CHECK(lr_at(37, c) == 2e-5);
    ScheduleSpec s{ScheduleKind::cosine, 1e-3, 10, 110, 1e-4};
    CHECK(lr_at(0, s) == 0.0);
    CHECK(lr_at(5, s) == doctest::Approx(5e-4));
    CHECK(lr_at(10, s) == doctest::Approx(1e-3));
    CHECK(lr_at(60, s) == doctest::Approx((1e-3 + 1e-4) / 2));
    CHECK(lr_at(110, s) == doctest::Approx(1e-4));
    CHECK_THROWS_AS(lr_at(111, s), RangeError);
    ScheduleSpec bad{ScheduleKind::cosine, 1e-3, 20, 10, 1e-4};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }
}
