#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "test_util.hpp"

using namespace tbif;
using tbif::testing::random_tensor;

namespace {

// Brute-force C = A B.
Tensor matmul_oracle(const Tensor& a, const Tensor& b) {
  Tensor c({a.dim(0), b.dim(1)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < b.dim(1); ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < a.dim(1); ++t) s += a(i, t) * b(t, j);
      c(i, j) = s;
    }
  return c;
}

Tensor conv_oracle(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride) {
  const std::size_t T = x.dim(0), B = x.dim(1), C = x.dim(2), l = w.dim(0), D = w.dim(3);
  const std::size_t L = (T - l + 1) / stride;
  Tensor out({L, B, D});
  for (std::size_t o = 0; o < L; ++o)
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t d = 0; d < D; ++d) {
        double s = bias[d];
        for (std::size_t t = 0; t < l; ++t)
          for (std::size_t c = 0; c < C; ++c) s += x(o * stride + t, b, c) * w[(t * C + c) * D + d];
        out(o, b, d) = s;
      }
  return out;
}

Tensor value_of(const std::function<Var(Tape&)>& f) {
  Tape t;
  return f(t).value();
}

constexpr double kGradTol = 1e-4;

}  // namespace

TEST(Tensor, RejectsInconsistentData) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  EXPECT_THROW(Tensor({2, 0}), DimensionError);
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_TRUE(t.all_finite());
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  Tensor m = Tensor::matrix(2, 2, {1, 2, 3, 4});
  Tensor out = value_of([&](Tape& t) { return matmul(t.constant(Tensor::matrix(2, 2, {1, 0, 0, 1})), t.constant(m)); });
  EXPECT_EQ(out, m);
}

TEST(Matmul, ScalarProduct) {
  Tensor out = value_of([](Tape& t) { return matmul(t.constant(Tensor({1, 1}, 2.0)), t.constant(Tensor({1, 1}, 3.0))); });
  EXPECT_DOUBLE_EQ(out[0], 6.0);
}

TEST(Matmul, MatchesTripleLoop) {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
    Tensor out = value_of([&](Tape& t) { return matmul(t.constant(a), t.constant(b)); });
    EXPECT_LT(max_abs_diff(out, matmul_oracle(a, b)), 1e-12);
  }
}

TEST(Matmul, ShapeErrorNamesBothShapes) {
  Tape t;
  try {
    matmul(t.constant(Tensor({2, 3})), t.constant(Tensor({2, 3})));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2, 3] x [2, 3]"), std::string::npos) << msg;
  }
}

TEST(Softmax, EqualRowIsUniform) {
  Tensor out = softmax_rows_value(Tensor({2, 4}, 7.25));
  for (double v : out.values()) EXPECT_DOUBLE_EQ(v, 0.25);
  EXPECT_DOUBLE_EQ(softmax_rows_value(Tensor({1, 1}, -3.0))[0], 1.0);
}

TEST(Softmax, ClosedFormTwoElementRow) {
  Tensor out = softmax_rows_value(Tensor::matrix(1, 2, {0.0, std::log(3.0)}));
  EXPECT_NEAR(out[0], 0.25, 1e-15);
  EXPECT_NEAR(out[1], 0.75, 1e-15);
}

TEST(Softmax, RowsSumToOneAndIgnoreShifts) {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 50; ++rep) {
    Tensor x = random_tensor({5, 7}, rng, -30.0, 30.0);
    Tensor p = softmax_rows_value(x);
    Tensor shifted = x;
    for (std::size_t j = 0; j < 7; ++j) shifted(2, j) += 123.0;
    Tensor q = softmax_rows_value(shifted);
    for (std::size_t i = 0; i < 5; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 7; ++j) {
        EXPECT_GE(p(i, j), 0.0);
        s += p(i, j);
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
    EXPECT_LT(max_abs_diff(p, q), 1e-12);
  }
}

TEST(Conv, OutputLengthFollowsFormula) {
  EXPECT_EQ(conv_output_length(50, 10, 1), 41u);
  EXPECT_EQ(conv_output_length(10, 10, 1), 1u);
  EXPECT_EQ(conv_output_length(50, 10, 2), 20u);
  for (std::size_t T = 1; T <= 40; ++T)
    for (std::size_t l = 1; l <= T; ++l)
      for (std::size_t s = 1; s <= 4; ++s) EXPECT_EQ(conv_output_length(T, l, s), (T - l + 1) / s);
  EXPECT_THROW(conv_output_length(9, 10, 1), ValidationError);
}

TEST(Conv, PaperWindowCount) {
  Tape t;
  Var y = conv_time_part(t.constant(Tensor({50, 5, 3})), t.constant(Tensor({10, 1, 3, 8})), t.constant(Tensor({8})), 1);
  EXPECT_EQ(y.shape(), (Shape{41, 5, 8}));
}

TEST(Conv, AveragingKernelKeepsConstant) {
  const std::size_t l = 4, C = 3, D = 2;
  Tensor x({12, 2, C}, 0.7);
  Tensor w({l, 1, C, D}, 1.0 / static_cast<double>(l * C));
  Tensor y = value_of([&](Tape& t) { return conv_time_part(t.constant(x), t.constant(w), t.constant(Tensor({D})), 1); });
  for (double v : y.values()) EXPECT_NEAR(v, 0.7, 1e-15);
}

TEST(Conv, MatchesDirectSummation) {
  std::mt19937_64 rng(3);
  for (std::size_t stride : {1u, 2u, 3u}) {
    Tensor x = random_tensor({12, 2, 3}, rng), w = random_tensor({5, 1, 3, 4}, rng), b = random_tensor({4}, rng);
    Tensor y = value_of([&](Tape& t) { return conv_time_part(t.constant(x), t.constant(w), t.constant(b), stride); });
    EXPECT_LT(max_abs_diff(y, conv_oracle(x, w, b, stride)), 1e-12);
  }
}

TEST(Conv, TooShortSequence) {
  Tape t;
  EXPECT_THROW(conv_time_part(t.constant(Tensor({5, 1, 3})), t.constant(Tensor({6, 1, 3, 2})), t.constant(Tensor({2})), 1),
               ValidationError);
}

TEST(LayerNorm, StandardizedInputPassesThrough) {
  Tensor x = Tensor::matrix(1, 4, {-1.0, -1.0, 1.0, 1.0});
  Tensor y = value_of([&](Tape& t) {
    return layer_norm(t.constant(x), t.constant(Tensor({4}, 1.0)), t.constant(Tensor({4})));
  });
  EXPECT_LT(max_abs_diff(x, y), 1e-5);
}

TEST(LayerNorm, ConstantSliceGivesShift) {
  Tensor shift = Tensor::matrix(1, 3, {0.5, -2.0, 3.0}).reshaped({3});
  Tensor y = value_of([&](Tape& t) {
    return layer_norm(t.constant(Tensor({2, 3}, 4.2)), t.constant(Tensor({3}, 1.7)), t.constant(shift));
  });
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(y(r, c), shift[c], 1e-12);
}

TEST(LayerNorm, NormalizedMoments) {
  std::mt19937_64 rng(4);
  Tensor x = random_tensor({4, 8}, rng, -5.0, 5.0);
  Tensor y = value_of([&](Tape& t) { return layer_norm(t.constant(x), t.constant(Tensor({8}, 1.0)), t.constant(Tensor({8}))); });
  for (std::size_t r = 0; r < 4; ++r) {
    double m = 0.0, v = 0.0;
    for (std::size_t c = 0; c < 8; ++c) m += y(r, c) / 8.0;
    for (std::size_t c = 0; c < 8; ++c) v += (y(r, c) - m) * (y(r, c) - m) / 8.0;
    EXPECT_LT(std::abs(m), 1e-9);
    EXPECT_NEAR(v, 1.0, 1e-4);
  }
}

TEST(Adam, ZeroGradientLeavesParams) {
  ParamSet ps;
  std::mt19937_64 rng(5);
  ps.add("w", random_tensor({3, 3}, rng));
  const Tensor before = ps.at("w").value;
  Adam opt;
  for (int i = 0; i < 25; ++i) opt.step(ps);
  EXPECT_EQ(ps.at("w").value, before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  for (double g : {2.5, -0.01, 40.0}) {
    Tensor value({1}, 1.0), grad({1}, g), m({1}), v({1});
    AdamConfig cfg;
    adam_step(value, grad, m, v, cfg, 1);
    EXPECT_NEAR(value[0] - 1.0, -cfg.lr * (g > 0 ? 1.0 : -1.0), 1e-9);
  }
}

TEST(Adam, Defaults) {
  AdamConfig cfg;
  EXPECT_EQ(cfg.lr, 0.0003);
  EXPECT_EQ(cfg.beta1, 0.9);
  EXPECT_EQ(cfg.beta2, 0.999);
  EXPECT_EQ(cfg.eps, 1e-8);
  Tensor a({1}), b({1}), c({1}), d({1});
  EXPECT_THROW(adam_step(a, b, c, d, cfg, 0), ConfigError);
}

TEST(GradCheck, Square) {
  auto rep = grad_check([](Tape&, std::span<const Var> x) { return mul(x[0], x[0]); }, {Tensor({1}, 3.0)});
  EXPECT_LT(rep.max_rel_error, 1e-6);
  Tape t;
  Tensor x({1}, 3.0);
  x.set_requires_grad(true);
  Var v = t.leaf(x);
  t.backward(mul(v, v));
  EXPECT_DOUBLE_EQ(t.grad(v)[0], 6.0);
}

TEST(GradCheck, SoftmaxRowSumsAreConserved) {
  std::mt19937_64 rng(6);
  auto rep = grad_check([](Tape&, std::span<const Var> x) { return sum(softmax_rows(x[0])); }, {random_tensor({3, 5}, rng)});
  EXPECT_LT(rep.max_abs_error, 1e-7);
}

TEST(GradCheck, NonFiniteValueThrows) {
  EXPECT_THROW(grad_check([](Tape&, std::span<const Var> x) { return scale(x[0], std::numeric_limits<double>::infinity()); },
                          {Tensor({1}, 1.0)}),
               EvaluationError);
}

// ---- every op against finite differences ---------------------------------------------

class OpGradients : public ::testing::Test {
 protected:
  std::mt19937_64 rng{7};
  Tensor rnd(Shape s, double lo = -1.0, double hi = 1.0) { return random_tensor(std::move(s), rng, lo, hi); }
  // Random weighting so the checked scalar depends on every output entry.
  Var weigh(Var y) {
    Tape& t = *y.tape;
    std::mt19937_64 wr(99);
    return sum(mul(y, t.constant(Tensor::uniform(y.shape(), -1.0, 1.0, wr))));
  }
  void check(const ScalarFn& f, std::vector<Tensor> inputs) {
    auto rep = grad_check(f, std::move(inputs));
    EXPECT_LT(rep.max_rel_error, kGradTol) << "analytic " << rep.worst_analytic << " numeric " << rep.worst_numeric;
  }
};

TEST_F(OpGradients, Elementwise) {
  check([&](Tape&, std::span<const Var> x) { return weigh(add(x[0], x[1])); }, {rnd({3, 4}), rnd({3, 4})});
  check([&](Tape&, std::span<const Var> x) { return weigh(sub(x[0], x[1])); }, {rnd({3, 4}), rnd({3, 4})});
  check([&](Tape&, std::span<const Var> x) { return weigh(mul(x[0], x[1])); }, {rnd({3, 4}), rnd({3, 4})});
  check([&](Tape&, std::span<const Var> x) { return weigh(scale(x[0], -2.5)); }, {rnd({3, 4})});
  Tensor away = rnd({4, 5}, 0.1, 1.0);
  for (std::size_t i = 0; i < away.size(); i += 2) away[i] = -away[i];
  check([&](Tape&, std::span<const Var> x) { return weigh(relu(x[0])); }, {away});
  check([&](Tape&, std::span<const Var> x) { return weigh(add_bias(x[0], x[1])); }, {rnd({2, 3, 4}), rnd({4})});
}

TEST_F(OpGradients, Reductions) {
  check([&](Tape&, std::span<const Var> x) { return sum(x[0]); }, {rnd({3, 4})});
  check([&](Tape&, std::span<const Var> x) { return mean(mul(x[0], x[0])); }, {rnd({3, 4})});
  check([&](Tape&, std::span<const Var> x) { return mean_row_norm(x[0], 1e-8); }, {rnd({6, 3})});
}

TEST_F(OpGradients, LinearAlgebra) {
  check([&](Tape&, std::span<const Var> x) { return weigh(matmul(x[0], x[1])); }, {rnd({3, 4}), rnd({4, 2})});
  check([&](Tape&, std::span<const Var> x) { return weigh(transpose(x[0])); }, {rnd({3, 5})});
  check([&](Tape&, std::span<const Var> x) { return weigh(softmax_rows(x[0])); }, {rnd({4, 6}, -3.0, 3.0)});
  check([&](Tape&, std::span<const Var> x) { return weigh(layer_norm(x[0], x[1], x[2])); },
        {rnd({4, 8}), rnd({8}), rnd({8})});
}

TEST_F(OpGradients, ShapeOps) {
  check([&](Tape&, std::span<const Var> x) { return weigh(reshape(x[0], {6, 2})); }, {rnd({3, 4})});
  check([&](Tape&, std::span<const Var> x) { return weigh(slice_rows(x[0], 1, 2)); }, {rnd({4, 3})});
  check([&](Tape&, std::span<const Var> x) { return weigh(slice_cols(x[0], 2, 3)); }, {rnd({4, 6})});
  check([&](Tape&, std::span<const Var> x) { return weigh(concat_rows({x[0], x[1], x[0]})); }, {rnd({2, 3}), rnd({4, 3})});
  check([&](Tape&, std::span<const Var> x) { return weigh(concat_cols({x[0], x[1]})); }, {rnd({3, 2}), rnd({3, 4})});
  check([&](Tape&, std::span<const Var> x) { return weigh(gather_rows(x[0], {2, 0, 2, 1, 2})); }, {rnd({3, 4})});
}

TEST_F(OpGradients, IndexedDot) {
  auto idx = std::make_shared<std::vector<int>>(std::vector<int>{0, 3, 1, 1, 2, 0, 3, 3, 0, 1, 2, 2});
  check([&](Tape&, std::span<const Var> x) { return weigh(indexed_dot(x[0], x[1], idx, 4)); }, {rnd({3, 5}), rnd({4, 5})});
}

TEST_F(OpGradients, Convolution) {
  for (std::size_t stride : {1u, 2u})
    check([&](Tape&, std::span<const Var> x) { return weigh(conv_time_part(x[0], x[1], x[2], stride)); },
          {rnd({9, 2, 3}), rnd({4, 1, 3, 5}), rnd({5})});
}

TEST_F(OpGradients, Attention) {
  auto idx = std::make_shared<std::vector<int>>(36);
  for (std::size_t i = 0; i < 36; ++i) (*idx)[i] = static_cast<int>((i * 7) % 5);
  check([&](Tape&, std::span<const Var> x) { return weigh(multi_head_attention(x[0], x[1], x[2], 2)); },
        {rnd({6, 8}), rnd({6, 8}), rnd({6, 8})});
  check([&](Tape&, std::span<const Var> x) { return weigh(multi_head_attention(x[0], x[1], x[2], 2)); },
        {rnd({2, 8}), rnd({5, 8}), rnd({5, 8})});
  check(
      [&](Tape&, std::span<const Var> x) {
        AttentionOptions opt;
        opt.bias_table = x[3];
        opt.bias_index = idx;
        return weigh(multi_head_attention(x[0], x[1], x[2], 2, opt));
      },
      {rnd({6, 8}), rnd({6, 8}), rnd({6, 8}), rnd({5, 4})});
  check(
      [&](Tape&, std::span<const Var> x) {
        AttentionOptions opt;
        opt.query_groups = opt.key_groups = {0, 0, 1, 1, 1, 2};
        return weigh(multi_head_attention(x[0], x[1], x[2], 4, opt));
      },
      {rnd({6, 8}), rnd({6, 8}), rnd({6, 8})});
}

TEST_F(OpGradients, InverseDct) {
  check([&](Tape&, std::span<const Var> x) { return weigh(idct_time(x[0], 7)); }, {rnd({3, 4})});
}

TEST_F(OpGradients, DropoutWithFixedStream) {
  check(
      [&](Tape&, std::span<const Var> x) {
        std::mt19937_64 r(11);
        return weigh(dropout(x[0], 0.3, true, r));
      },
      {rnd({5, 6})});
}

TEST(Dropout, EvalModeIsIdentityAndTrainIsSeeded) {
  std::mt19937_64 rng(8);
  Tensor x = random_tensor({10, 10}, rng);
  Tape t;
  std::mt19937_64 a(1);
  EXPECT_EQ(dropout(t.constant(x), 0.2, false, a).value(), x);
  std::mt19937_64 r(3);
  Tensor y = dropout(t.constant(x), 0.5, true, r).value();
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (y[i] == 0.0) ++dropped;
    else EXPECT_DOUBLE_EQ(y[i], 2.0 * x[i]);
  }
  EXPECT_GT(dropped, 20u);
  EXPECT_LT(dropped, 80u);
  std::mt19937_64 c(5), d(5);
  EXPECT_EQ(dropout(t.constant(x), 0.5, true, c).value(), dropout(t.constant(x), 0.5, true, d).value());
}

TEST(Tape, BackwardTwiceDoublesParamGrads) {
  std::mt19937_64 rng(9);
  ParamSet ps;
  ps.add("w", random_tensor({4, 3}, rng));
  ps.add("b", random_tensor({3}, rng));
  Tensor x = random_tensor({5, 4}, rng);
  auto loss = [&](Tape& t) { return mean_row_norm(add_bias(matmul(t.constant(x), t.param(ps.at("w"))), t.param(ps.at("b"))), 1e-8); };
  {
    Tape t;
    t.backward(loss(t));
  }
  const Tensor gw = ps.at("w").grad, gb = ps.at("b").grad;
  {
    Tape t;
    t.backward(loss(t));
  }
  for (std::size_t i = 0; i < gw.size(); ++i) EXPECT_EQ(ps.at("w").grad[i], 2.0 * gw[i]);
  for (std::size_t i = 0; i < gb.size(); ++i) EXPECT_EQ(ps.at("b").grad[i], 2.0 * gb[i]);
}

TEST(Tape, BackwardVisitsInReverseOrder) {
  Tape t;
  std::vector<int> visits;
  Tensor x({1}, 1.0);
  x.set_requires_grad(true);
  Var v = t.leaf(x);
  for (int k = 0; k < 5; ++k) {
    Var in = v;
    v = t.record(v.value(), {in}, [&visits, k, in](Tape& tape, const Tensor& g, const Tensor&) {
      visits.push_back(k);
      tape.grad_of(in) += g;
    });
  }
  t.backward(v);
  EXPECT_EQ(visits, (std::vector<int>{4, 3, 2, 1, 0}));
}

TEST(ParamSet, NamesAreUnique) {
  ParamSet ps;
  ps.add("a", Tensor({2}));
  EXPECT_THROW(ps.add("a", Tensor({3})), ConfigError);
  EXPECT_EQ(ps.at("a").grad.shape(), ps.at("a").value.shape());
}
