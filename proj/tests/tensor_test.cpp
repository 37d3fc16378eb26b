// Copyright 2026 The RISExt Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <tuple>

#include <gtest/gtest.h>

#include "risext/adam.hpp"
#include "risext/conv.hpp"
#include "risext/grad_check.hpp"
#include "risext/tensor.hpp"

namespace risext {
namespace {

Tensor random_tensor(const Shape& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t(s);
  for (double& v : t.storage()) v = n(rng);
  return t;
}

// Zero-padded cross-correlation written as the textbook six-deep loop.
Tensor naive_conv(const Tensor& x, const Tensor& w, const Tensor& b) {
  const std::size_t B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  const std::size_t kh = w.dim(0), kw = w.dim(1), O = w.dim(3);
  Tensor y({B, H, W, O});
  for (std::size_t n = 0; n < B; ++n)
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j)
        for (std::size_t o = 0; o < O; ++o) {
          double acc = b[o];
          for (std::size_t dy = 0; dy < kh; ++dy)
            for (std::size_t dx = 0; dx < kw; ++dx) {
              const long yi = long(i) + long(dy) - long(kh / 2);
              const long xj = long(j) + long(dx) - long(kw / 2);
              if (yi < 0 || xj < 0 || yi >= long(H) || xj >= long(W)) continue;
              for (std::size_t c = 0; c < C; ++c)
                acc += x.at({n, std::size_t(yi), std::size_t(xj), c}) * w.at({dy, dx, c, o});
            }
          y.at({n, i, j, o}) = acc;
        }
  return y;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

TEST(TensorBasics, ShapeIndexAndValidation) {
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  t.at({1, 2, 3}) = 5.0;
  EXPECT_EQ(t[23], 5.0);
  EXPECT_THROW(t.at({2, 0, 0}), std::out_of_range);
  EXPECT_THROW(t.at({0, 0}), std::out_of_range);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
  EXPECT_EQ(t.reshaped({4, 6})[23], 5.0);
  EXPECT_THROW(t.reshaped({5, 5}), std::invalid_argument);
}

TEST(TensorArithmetic, AddScaleAxpyCombineDot) {
  const Tensor a({3}, std::vector<double>{1, 2, 3});
  const Tensor b({3}, std::vector<double>{-1, 0.5, 4});
  EXPECT_EQ(add(a, b), Tensor({3}, std::vector<double>{0, 2.5, 7}));
  EXPECT_EQ(scale(a, -2), Tensor({3}, std::vector<double>{-2, -4, -6}));
  Tensor c = a;
  axpy(c, 2.0, b);
  EXPECT_EQ(c, Tensor({3}, std::vector<double>{-1, 3, 11}));
  EXPECT_EQ(combine({{2.0, &a}, {2.0, &b}}), Tensor({3}, std::vector<double>{0, 5, 14}));
  EXPECT_DOUBLE_EQ(dot(a, b), -1 + 1 + 12);
  EXPECT_THROW(add(a, Tensor({4})), std::invalid_argument);
}

TEST(Relu, ForwardAndBackwardMask) {
  const Tensor x({4}, std::vector<double>{-1, 0, 2, -0.5});
  EXPECT_EQ(relu_forward(x), Tensor({4}, std::vector<double>{0, 0, 2, 0}));
  const Tensor up({4}, std::vector<double>{1, 2, 3, 4});
  EXPECT_EQ(relu_backward(up, x), Tensor({4}, std::vector<double>{0, 0, 3, 0}));
  EXPECT_EQ(relu_backward(up, relu_forward(x)), Tensor({4}, std::vector<double>{0, 0, 3, 0}));
}

TEST(MseLoss, MatchesHandComputation) {
  // M=1, L=1, K=2, batch 1: four entries, normaliser 1/2
  const Tensor out({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  const Tensor tgt({1, 1, 2, 2}, std::vector<double>{1, 0, 0, 4});
  const LossResult r = mse_loss(out, tgt, 1, 1, 2, 1);
  EXPECT_DOUBLE_EQ(r.loss, (0 + 4 + 9 + 0) / 2.0);
  EXPECT_EQ(r.grad, Tensor({1, 1, 2, 2}, std::vector<double>{0, 2, 3, 0}));
  EXPECT_THROW(mse_loss(out, tgt, 2, 1, 2, 1), std::invalid_argument);
}

TEST(MseLoss, GradientMatchesFiniteDifference) {
  Tensor out = random_tensor({2, 3, 4, 2}, 1);
  const Tensor tgt = random_tensor({2, 3, 4, 2}, 2);
  const LossResult r = mse_loss(out, tgt);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double keep = out[i];
    out[i] = keep + 1e-6;
    const double fp = mse_loss(out, tgt).loss;
    out[i] = keep - 1e-6;
    const double fm = mse_loss(out, tgt).loss;
    out[i] = keep;
    EXPECT_NEAR(r.grad[i], (fp - fm) / 2e-6, 1e-8);
  }
}

// (batch, H, W, cin, cout, kernel) covering the vector, narrow and scalar paths.
class ConvPaths : public ::testing::TestWithParam<std::tuple<int, int, int, int, int, int>> {};

TEST_P(ConvPaths, ForwardMatchesNaiveLoop) {
  const auto [B, H, W, ci, co, k] = GetParam();
  ConvLayer conv("c", k, k, ci, co);
  std::mt19937_64 rng(3);
  conv.init_uniform(rng);
  for (double& b : conv.bias().value.storage()) b = std::normal_distribution<double>()(rng);
  const Tensor x = random_tensor({std::size_t(B), std::size_t(H), std::size_t(W), std::size_t(ci)}, 4);
  EXPECT_LE(max_abs_diff(conv.forward(x), naive_conv(x, conv.kernels().value, conv.bias().value)),
            1e-12);
}

TEST_P(ConvPaths, BackwardMatchesFiniteDifferences) {
  const auto [B, H, W, ci, co, k] = GetParam();
  ConvLayer conv("c", k, k, ci, co);
  std::mt19937_64 rng(5);
  conv.init_uniform(rng);
  const Tensor x = random_tensor_away_from_zero(
      {std::size_t(B), std::size_t(H), std::size_t(W), std::size_t(ci)}, 6, 1e-3);
  const GradCheckReport rep = grad_check(grad_target(conv), x);
  EXPECT_EQ(rep.skipped, 0u);
  EXPECT_LT(rep.max_rel_error, 1e-6) << rep.worst;
}

TEST_P(ConvPaths, BackwardMatchesNaiveAdjoint) {
  const auto [B, H, W, ci, co, k] = GetParam();
  ConvLayer conv("c", k, k, ci, co);
  std::mt19937_64 rng(7);
  conv.init_uniform(rng);
  const Tensor x = random_tensor({std::size_t(B), std::size_t(H), std::size_t(W), std::size_t(ci)}, 8);
  const Tensor up = random_tensor({std::size_t(B), std::size_t(H), std::size_t(W), std::size_t(co)}, 9);
  conv.kernels().zero_grad();
  conv.bias().zero_grad();
  const Tensor dx = conv.backward(up, x);
  const Tensor& w = conv.kernels().value;
  Tensor dw(w.shape()), db({std::size_t(co)}), dx_ref(x.shape());
  const long h = k / 2;
  for (int n = 0; n < B; ++n)
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j)
        for (int o = 0; o < co; ++o) {
          const double u = up.at({std::size_t(n), std::size_t(i), std::size_t(j), std::size_t(o)});
          db[std::size_t(o)] += u;
          for (int dy = 0; dy < k; ++dy)
            for (int dxx = 0; dxx < k; ++dxx) {
              const long yi = i + dy - h, xj = j + dxx - h;
              if (yi < 0 || xj < 0 || yi >= H || xj >= W) continue;
              for (int c = 0; c < ci; ++c) {
                const std::initializer_list<std::size_t> xi{std::size_t(n), std::size_t(yi),
                                                            std::size_t(xj), std::size_t(c)};
                const std::initializer_list<std::size_t> wi{std::size_t(dy), std::size_t(dxx),
                                                            std::size_t(c), std::size_t(o)};
                dw.at(wi) += x.at(xi) * u;
                dx_ref.at(xi) += w.at(wi) * u;
              }
            }
        }
  EXPECT_LE(max_abs_diff(conv.kernels().grad, dw), 1e-11);
  EXPECT_LE(max_abs_diff(conv.bias().grad, db), 1e-11);
  EXPECT_LE(max_abs_diff(dx, dx_ref), 1e-11);
}

INSTANTIATE_TEST_SUITE_P(
    Shapes, ConvPaths,
    ::testing::Values(std::make_tuple(2, 6, 9, 8, 8, 3), std::make_tuple(1, 5, 7, 16, 16, 3),
                      std::make_tuple(2, 4, 6, 8, 2, 3), std::make_tuple(1, 6, 5, 16, 2, 3),
                      std::make_tuple(2, 7, 5, 2, 8, 5), std::make_tuple(1, 5, 6, 3, 5, 3),
                      std::make_tuple(1, 4, 4, 1, 1, 1), std::make_tuple(3, 3, 11, 8, 24, 3),
                      std::make_tuple(1, 16, 8, 2, 16, 5), std::make_tuple(1, 2, 2, 8, 4, 5)));

TEST(ConvLayer, RankThreeInputIsBatchOfOne) {
  ConvLayer conv("c", 3, 3, 2, 3);
  std::mt19937_64 rng(1);
  conv.init_uniform(rng);
  const Tensor x = random_tensor({4, 5, 2}, 2);
  const Tensor y3 = conv.forward(x);
  const Tensor y4 = conv.forward(x.reshaped({1, 4, 5, 2}));
  EXPECT_EQ(y3.shape(), (Shape{4, 5, 3}));
  EXPECT_EQ(y3.storage(), y4.storage());
}

TEST(ConvLayer, RejectsBadShapes) {
  EXPECT_THROW(ConvLayer("c", 2, 3, 1, 1), std::invalid_argument);
  EXPECT_THROW(ConvLayer("c", 3, 3, 0, 1), std::invalid_argument);
  ConvLayer conv("c", 3, 3, 2, 2);
  EXPECT_THROW(conv.forward(Tensor({4, 4, 3})), std::invalid_argument);
  EXPECT_THROW(conv.forward(Tensor({4})), std::invalid_argument);
  EXPECT_THROW(conv.backward(Tensor({1, 4, 4, 2}), Tensor{}), std::logic_error);
}

TEST(ConvLayer, InitBoundAndZeroBias) {
  ConvLayer conv("c", 3, 3, 16, 16);
  std::mt19937_64 rng(9);
  conv.init_uniform(rng);
  const double bound = std::sqrt(6.0 / (9 * 16 + 9 * 16));
  double mx = 0.0;
  for (double w : conv.kernels().value.values()) mx = std::max(mx, std::abs(w));
  EXPECT_LE(mx, bound);
  EXPECT_GT(mx, 0.9 * bound);
  for (double b : conv.bias().value.values()) EXPECT_EQ(b, 0.0);
}

TEST(ConvLayer, BackwardAccumulatesAndCanSkipInputGrad) {
  ConvLayer conv("c", 3, 3, 8, 8);
  std::mt19937_64 rng(2);
  conv.init_uniform(rng);
  const Tensor x = random_tensor({1, 4, 4, 8}, 3);
  const Tensor up = random_tensor({1, 4, 4, 8}, 4);
  conv.kernels().zero_grad();
  conv.bias().zero_grad();
  const Tensor dx = conv.backward(up, x);
  const Tensor g1 = conv.kernels().grad;
  EXPECT_TRUE(conv.backward(up, x, false).empty());
  EXPECT_LE(max_abs_diff(conv.kernels().grad, scale(g1, 2.0)), 1e-12);
  EXPECT_EQ(dx.shape(), x.shape());
}

TEST(Adam, FirstStepMovesBySignTimesLr) {
  Parameter p("p", Tensor({3}, std::vector<double>{1.0, -2.0, 0.5}));
  p.grad = Tensor({3}, std::vector<double>{0.3, -4.0, 0.0});
  Parameter* ps[] = {&p};
  adam_step(ps, 0.1);
  // bias-corrected first step: m^ = g, v^ = g^2, update = lr * g / (|g| + eps)
  EXPECT_NEAR(p.value[0], 1.0 - 0.1 * 0.3 / (0.3 + 1e-8), 1e-15);
  EXPECT_NEAR(p.value[1], -2.0 + 0.1 * 4.0 / (4.0 + 1e-8), 1e-15);
  EXPECT_EQ(p.value[2], 0.5);
  EXPECT_EQ(p.step, 1);
}

TEST(Adam, MatchesScalarRecurrenceOverManySteps) {
  Parameter p("p", Tensor({1}, 0.7));
  double w = 0.7, m = 0.0, v = 0.0;
  Parameter* ps[] = {&p};
  for (int t = 1; t <= 50; ++t) {
    const double g = std::sin(0.3 * t) + 0.1 * w;
    p.grad[0] = g;
    adam_step(ps, 0.01);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    w -= 0.01 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    ASSERT_NEAR(p.value[0], w, 1e-14) << "step " << t;
  }
}

TEST(Adam, ZeroLearningRateLeavesWeights) {
  Parameter p("p", Tensor({2}, 1.5));
  p.grad.fill(3.0);
  Parameter* ps[] = {&p};
  adam_step(ps, 0.0);
  EXPECT_EQ(p.value, Tensor({2}, 1.5));
  EXPECT_EQ(p.step, 1);
}

TEST(GradCheck, RelativeErrorFloor) {
  EXPECT_NEAR(relative_error(1.0, 1.1, 1e-3), 0.1 / 1.1, 1e-15);
  EXPECT_DOUBLE_EQ(relative_error(1e-6, 0.0, 1e-3), 1e-3);
}

TEST(GradCheck, DetectsWrongGradient) {
  ConvLayer conv("c", 3, 3, 2, 2);
  std::mt19937_64 rng(1);
  conv.init_uniform(rng);
  GradCheckTarget t = grad_target(conv);
  auto good = t.backward;
  t.backward = [good](const Tensor& x, const Tensor& up) { return scale(good(x, up), 1.01); };
  EXPECT_GT(grad_check(t, random_tensor({1, 3, 3, 2}, 2)).max_rel_error, 5e-3);
}

TEST(GradCheck, AwayFromZeroSampler) {
  const Tensor t = random_tensor_away_from_zero({1000}, 3, 0.25);
  for (double v : t.values()) {
    EXPECT_GE(std::abs(v), 0.25);
    EXPECT_LE(std::abs(v), 1.0);
  }
}

}  // namespace
}  // namespace risext
