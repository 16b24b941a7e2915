// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mtms/autodiff.hpp"
#include "mtms/error.hpp"
#include "mtms/grad_check.hpp"
#include "mtms/ops.hpp"
#include "mtms/rng.hpp"
#include "oracles.hpp"

namespace {

using mtms::Shape;
using mtms::Tensor;
namespace ad = mtms::ad;

oracle::Image to_image(const Tensor& t) {
  oracle::Image img(t.dim(0), std::vector<std::vector<double>>(t.dim(1), std::vector<double>(t.dim(2))));
  for (std::size_t c = 0; c < t.dim(0); ++c)
    for (std::size_t y = 0; y < t.dim(1); ++y)
      for (std::size_t x = 0; x < t.dim(2); ++x) img[c][y][x] = t.at({c, y, x});
  return img;
}

oracle::Bank to_bank(const Tensor& k) {
  oracle::Bank b;
  for (std::size_t o = 0; o < k.dim(0); ++o) {
    const std::size_t n = k.dim(1) * k.dim(2) * k.dim(3);
    Tensor slice({k.dim(1), k.dim(2), k.dim(3)}, std::vector<double>(k.data().begin() + o * n, k.data().begin() + (o + 1) * n));
    b.push_back(to_image(slice));
  }
  return b;
}

TEST(Tensor, ElementCountMatchesShape) {
  const Tensor t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>(3)), mtms::ShapeError);
  EXPECT_THROW(Tensor({2, 0}), mtms::ShapeError);
}

TEST(Tensor, RowMajorLastIndexFastest) {
  Tensor t({2, 3}, {0, 1, 2, 3, 4, 5});
  EXPECT_EQ(t.at({1, 0}), 3.0);
  EXPECT_EQ(t.at({0, 2}), 2.0);
}

TEST(Conv2d, AllOnesCenterIsNine) {
  const Tensor out = mtms::conv2d(Tensor({1, 3, 3}, 1.0), Tensor({1, 1, 3, 3}, 1.0), 1);
  ASSERT_EQ(out.shape(), (Shape{1, 3, 3}));
  const auto ref = oracle::conv2d(to_image(Tensor({1, 3, 3}, 1.0)), to_bank(Tensor({1, 1, 3, 3}, 1.0)), 1);
  EXPECT_DOUBLE_EQ(ref[0][1][1], 9.0);
  EXPECT_DOUBLE_EQ(out.at({0, 1, 1}), ref[0][1][1]);
  EXPECT_DOUBLE_EQ(out.at({0, 0, 0}), 4.0);
}

TEST(Conv2d, IdentityKernelReturnsInput) {
  mtms::Rng rng(1);
  const Tensor x = mtms::uniform_tensor({1, 5, 4}, -1, 1, rng);
  EXPECT_EQ(mtms::conv2d(x, Tensor({1, 1, 1, 1}, 1.0), 0), x);
}

TEST(Conv2d, ZeroKernelGivesZero) {
  mtms::Rng rng(2);
  const Tensor x = mtms::uniform_tensor({2, 5, 5}, -1, 1, rng);
  const Tensor out = mtms::conv2d(x, Tensor({3, 2, 3, 3}), 1);
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(Conv2d, ChannelMismatchIsShapeError) {
  EXPECT_THROW(mtms::conv2d(Tensor({2, 4, 4}), Tensor({1, 3, 3, 3}), 1), mtms::ShapeError);
  EXPECT_THROW(mtms::conv2d(Tensor({1, 4, 4}), Tensor({1, 1, 2, 2}), 1), mtms::ShapeError);
  EXPECT_THROW(mtms::conv2d(Tensor({1, 2, 2}), Tensor({1, 1, 5, 5}), 0), mtms::ShapeError);
}

TEST(Conv2d, MatchesNestedLoopOracle) {
  mtms::Rng rng(3);
  for (std::size_t pad : {0u, 1u, 2u}) {
    for (std::size_t dil : {1u, 2u}) {
      const Tensor x = mtms::uniform_tensor({3, 7, 6}, -1, 1, rng);
      const Tensor k = mtms::uniform_tensor({2, 3, 3, 3}, -1, 1, rng);
      const Tensor out = mtms::conv2d(x, k, pad, dil);
      const auto ref = oracle::conv2d(to_image(x), to_bank(k), pad, dil);
      ASSERT_EQ(out.dim(1), ref[0].size());
      ASSERT_EQ(out.dim(2), ref[0][0].size());
      for (std::size_t o = 0; o < 2; ++o)
        for (std::size_t y = 0; y < out.dim(1); ++y)
          for (std::size_t z = 0; z < out.dim(2); ++z) EXPECT_NEAR(out.at({o, y, z}), ref[o][y][z], 1e-12);
    }
  }
}

TEST(Conv2d, IsLinear) {
  mtms::Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x = mtms::uniform_tensor({2, 6, 6}, -1, 1, rng);
    const Tensor y = mtms::uniform_tensor({2, 6, 6}, -1, 1, rng);
    const Tensor k = mtms::uniform_tensor({3, 2, 3, 3}, -1, 1, rng);
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    Tensor mix(x.shape());
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * x[i] + b * y[i];
    const Tensor lhs = mtms::conv2d(mix, k, 1);
    const Tensor cx = mtms::conv2d(x, k, 1), cy = mtms::conv2d(y, k, 1);
    for (std::size_t i = 0; i < lhs.size(); ++i) {
      const double rhs = a * cx[i] + b * cy[i];
      EXPECT_LE(std::abs(lhs[i] - rhs), 1e-12 * std::max(1.0, std::abs(rhs)));
    }
  }
}

TEST(GlobalAvgPool, HandValues) {
  EXPECT_EQ(mtms::global_avg_pool(Tensor({1, 2, 2}, {1, 2, 3, 4}))[0], 2.5);
  const Tensor c = mtms::global_avg_pool(Tensor({3, 4, 5}, 0.7));
  for (double v : c.data()) EXPECT_DOUBLE_EQ(v, 0.7);
  const Tensor z = mtms::global_avg_pool(Tensor({2, 3, 3}));
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
}

TEST(Activation, ClosedForms) {
  using mtms::Activation;
  EXPECT_EQ(mtms::apply_activation(0.0, Activation::kSigmoid), 0.5);
  EXPECT_EQ(mtms::apply_activation(0.0, Activation::kTanh), 0.0);
  EXPECT_NEAR(mtms::apply_activation(std::log(3.0), Activation::kSigmoid), 0.75, 1e-15);
  EXPECT_EQ(mtms::apply_activation(-2.0, Activation::kRelu), 0.0);
  EXPECT_EQ(mtms::apply_activation(-2.0, Activation::kIdentity), -2.0);
}

TEST(Activation, RangesHoldForLargeInputs) {
  for (double x : {-50.0, -5.0, 5.0, 50.0}) {
    const double s = mtms::apply_activation(x, mtms::Activation::kSigmoid);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
    EXPECT_TRUE(std::isfinite(s));
    EXPECT_LE(std::abs(mtms::apply_activation(x, mtms::Activation::kTanh)), 1.0);
  }
  EXPECT_GT(mtms::apply_activation(-5.0, mtms::Activation::kSigmoid), 0.0);
  EXPECT_LT(mtms::apply_activation(5.0, mtms::Activation::kSigmoid), 1.0);
}

TEST(CosineSimilarity, HandValues) {
  const Tensor u({2}, {1, 0}), v({2}, {1, 1}), w({2}, {0, 3});
  EXPECT_DOUBLE_EQ(mtms::cosine_similarity(v, v), 1.0);
  EXPECT_EQ(mtms::cosine_similarity(u, w), 0.0);
  EXPECT_NEAR(mtms::cosine_similarity(u, v), 0.70710678118654752, 1e-15);
  EXPECT_THROW(mtms::cosine_similarity(u, Tensor({2})), mtms::DomainError);
}

TEST(ShufflePermutation, StandardOrder) {
  EXPECT_EQ(mtms::shuffle_permutation(4, 2), (std::vector<std::size_t>{0, 2, 1, 3}));
  EXPECT_EQ(mtms::shuffle_permutation(6, 1), (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
  EXPECT_THROW(mtms::shuffle_permutation(6, 4), mtms::InvalidArgument);
}

TEST(GradCheck, SumOfSquares) {
  mtms::Rng rng(5);
  const Tensor x = mtms::uniform_tensor({4, 3}, -2, 2, rng);
  EXPECT_LT(mtms::grad_check([](ad::Tape&, ad::Var v) { return ad::sum_squares(v); }, x), 1e-6);
}

TEST(GradCheck, ConstantFunctionHasZeroError) {
  const Tensor x({3}, {1, 2, 3});
  const double err = mtms::grad_check(
      [](ad::Tape& t, ad::Var) { return t.constant(Tensor::scalar(4.0)); }, x);
  EXPECT_EQ(err, 0.0);
}

TEST(GradCheck, RejectsEpsOutsideRange) {
  const Tensor x({1}, {1.0});
  auto f = [](ad::Tape&, ad::Var v) { return ad::sum(v); };
  EXPECT_THROW(mtms::grad_check(f, x, 1e-8), mtms::InvalidArgument);
  EXPECT_THROW(mtms::grad_check(f, x, 1e-2), mtms::InvalidArgument);
}

TEST(GradCheck, NonFiniteIsDiagnosed) {
  const Tensor x({1}, {0.0});
  auto f = [](ad::Tape&, ad::Var v) { return ad::scale(ad::sum(v), std::numeric_limits<double>::infinity()); };
  EXPECT_THROW(mtms::grad_check(f, x), mtms::NumericalError);
}

struct PrimitiveCase {
  const char* name;
  std::vector<Shape> shapes;
  mtms::ScalarGraph f;
  double lo = -1.0, hi = 1.0;
};

std::vector<PrimitiveCase> primitive_cases() {
  using V = std::span<const ad::Var>;
  auto sq = [](ad::Var v) { return ad::sum_squares(v); };
  return {
      {"add", {{2, 3}, {2, 3}}, [=](ad::Tape&, V v) { return sq(ad::add(v[0], v[1])); }},
      {"sub", {{2, 3}, {2, 3}}, [=](ad::Tape&, V v) { return sq(ad::sub(v[0], v[1])); }},
      {"mul", {{2, 3}, {2, 3}}, [=](ad::Tape&, V v) { return sq(ad::mul(v[0], v[1])); }},
      {"scale", {{5}}, [=](ad::Tape&, V v) { return sq(ad::scale(v[0], -1.7)); }},
      {"add_constant", {{5}}, [=](ad::Tape&, V v) { return sq(ad::add_constant(v[0], 0.3)); }},
      {"sigmoid", {{2, 2, 2}}, [=](ad::Tape&, V v) { return sq(ad::sigmoid(v[0])); }, -3, 3},
      {"tanh", {{2, 2, 2}}, [=](ad::Tape&, V v) { return sq(ad::tanh(v[0])); }, -3, 3},
      {"relu", {{7}}, [=](ad::Tape&, V v) { return sq(ad::relu(v[0])); }, 0.1, 1.0},
      {"identity", {{7}}, [=](ad::Tape&, V v) { return sq(ad::activation(v[0], mtms::Activation::kIdentity)); }},
      {"conv2d", {{2, 5, 5}, {3, 2, 3, 3}}, [=](ad::Tape&, V v) { return sq(ad::conv2d(v[0], v[1], 1)); }},
      {"conv2d_valid", {{2, 5, 5}, {1, 2, 3, 3}}, [=](ad::Tape&, V v) { return sq(ad::conv2d(v[0], v[1], 0)); }},
      {"conv2d_dilated", {{1, 6, 6}, {2, 1, 3, 3}}, [=](ad::Tape&, V v) { return sq(ad::conv2d(v[0], v[1], 2, 2)); }},
      {"add_channel_bias", {{3, 2, 2}, {3}}, [=](ad::Tape&, V v) { return sq(ad::add_channel_bias(v[0], v[1])); }},
      {"scale_channels", {{3, 2, 2}, {3}}, [=](ad::Tape&, V v) { return sq(ad::scale_channels(v[0], v[1])); }},
      {"global_avg_pool", {{3, 3, 2}}, [=](ad::Tape&, V v) { return sq(ad::global_avg_pool(v[0])); }},
      {"permute_channels", {{3, 2, 2}}, [=](ad::Tape&, V v) { return ad::sum(ad::mul(ad::permute_channels(v[0], {2, 0, 1}), v[0])); }},
      {"select_channels", {{4, 2}}, [=](ad::Tape&, V v) { return sq(ad::select_channels(v[0], {3, 1, 1})); }},
      {"concat_channels", {{1, 2, 2}, {2, 2, 2}}, [=](ad::Tape&, V v) {
         const ad::Var parts[] = {v[0], v[1]};
         return ad::sum(ad::mul(ad::concat_channels(parts), ad::concat_channels(parts)));
       }},
      {"matvec", {{3, 4}, {4}}, [=](ad::Tape&, V v) { return sq(ad::matvec(v[0], v[1])); }},
      {"softmax", {{5}}, [=](ad::Tape& t, V v) {
         return ad::sum(ad::mul(ad::softmax(v[0]), t.constant(Tensor({5}, {1, -2, 3, 0.5, 2}))));
       }},
      {"log_sum_exp", {{6}}, [=](ad::Tape&, V v) { return ad::log_sum_exp(v[0]); }},
      {"index", {{4}}, [=](ad::Tape&, V v) { return sq(ad::index(v[0], 2)); }},
      {"stack", {{1}, {1}, {1}}, [=](ad::Tape& t, V v) {
         const ad::Var s[] = {v[0], v[1], v[2]};
         return ad::sum(ad::mul(ad::stack(s), t.constant(Tensor({3}, {1, 2, 3}))));
       }},
      {"mix", {{2, 2, 3}, {2}}, [=](ad::Tape&, V v) { return sq(ad::mix(v[0], v[1])); }},
      {"weighted_sum", {{2, 2}, {2, 2}, {2}}, [=](ad::Tape&, V v) {
         const ad::Var p[] = {v[0], v[1]};
         return sq(ad::weighted_sum(p, v[2]));
       }},
      {"sum", {{3, 2}}, [=](ad::Tape&, V v) { return ad::sum(v[0]); }},
      {"mean", {{3, 2}}, [=](ad::Tape&, V v) { return sq(ad::mean(v[0])); }},
      {"sum_squares", {{3, 2}}, [=](ad::Tape&, V v) { return ad::sum_squares(v[0]); }},
      {"l2_norm", {{4}}, [=](ad::Tape&, V v) { return ad::l2_norm(v[0]); }},
      {"mse", {{4}, {4}}, [=](ad::Tape&, V v) { return ad::mse(v[0], v[1]); }},
      {"cosine_similarity", {{4}, {4}}, [=](ad::Tape&, V v) { return ad::cosine_similarity(v[0], v[1]); }},
  };
}

class PrimitiveGradient : public ::testing::TestWithParam<std::size_t> {};

TEST_P(PrimitiveGradient, MatchesCentralDifferences) {
  const auto cases = primitive_cases();
  const auto& c = cases[GetParam()];
  mtms::Rng rng(100 + GetParam());
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<Tensor> inputs;
    for (const auto& s : c.shapes) inputs.push_back(mtms::uniform_tensor(s, c.lo, c.hi, rng));
    const auto report = mtms::grad_check(c.f, inputs, 1e-5);
    EXPECT_LT(report.max_rel_error, 1e-4) << c.name << " input " << report.worst_input << " index "
                                          << report.worst_index;
  }
}

INSTANTIATE_TEST_SUITE_P(AllPrimitives, PrimitiveGradient, ::testing::Range<std::size_t>(0, primitive_cases().size()),
                         [](const auto& info) { return std::string(primitive_cases()[info.param].name); });

TEST(Tape, UnusedInputsHaveExactlyZeroGradient) {
  ad::Tape tape;
  const ad::Var used = tape.parameter(Tensor({3}, {1, 2, 3}));
  const ad::Var unused = tape.parameter(Tensor({2}, {4, 5}));
  const ad::Var side = ad::sum(ad::mul(unused, unused));
  (void)side;
  const ad::Var loss = ad::sum_squares(used);
  tape.backward(loss);
  const Tensor g_unused = tape.grad(unused);
  for (double g : g_unused.data()) EXPECT_EQ(g, 0.0);
  EXPECT_EQ(tape.grad(used)[1], 4.0);
}

TEST(Tape, ReplayIsBitIdentical) {
  mtms::Rng rng(6);
  ad::Tape tape;
  const ad::Var x = tape.parameter(mtms::uniform_tensor({2, 5, 5}, -1, 1, rng));
  const ad::Var k = tape.parameter(mtms::uniform_tensor({3, 2, 3, 3}, -1, 1, rng));
  const ad::Var y = ad::tanh(ad::conv2d(x, k, 1));
  const ad::Var loss = ad::log_sum_exp(ad::global_avg_pool(y));
  const Tensor before_y = y.value();
  const Tensor before_loss = loss.value();
  tape.replay();
  EXPECT_EQ(y.value(), before_y);
  EXPECT_EQ(loss.value(), before_loss);
}

TEST(Tape, BackwardTwiceGivesSameGradient) {
  ad::Tape tape;
  const ad::Var x = tape.parameter(Tensor({3}, {0.5, -1, 2}));
  const ad::Var loss = ad::sum_squares(ad::tanh(x));
  tape.backward(loss);
  const Tensor g1 = tape.grad(x);
  tape.backward(loss);
  EXPECT_EQ(tape.grad(x), g1);
}

TEST(Tape, SetValueOnlyOnLeaves) {
  ad::Tape tape;
  const ad::Var x = tape.parameter(Tensor({2}, 1.0));
  const ad::Var y = ad::scale(x, 2.0);
  EXPECT_THROW(tape.set_value(y, Tensor({2})), mtms::InvalidArgument);
  EXPECT_THROW(tape.set_value(x, Tensor({3})), mtms::ShapeError);
  tape.set_value(x, Tensor({2}, 3.0));
  tape.replay();
  EXPECT_EQ(y.value()[0], 6.0);
}

TEST(Tape, ConstantsReceiveNoGradient) {
  ad::Tape tape;
  const ad::Var c = tape.constant(Tensor({2}, {1, 2}));
  const ad::Var p = tape.parameter(Tensor({2}, {3, 4}));
  tape.backward(ad::sum(ad::mul(c, p)));
  const Tensor g_const = tape.grad(c);
  for (double g : g_const.data()) EXPECT_EQ(g, 0.0);
  EXPECT_EQ(tape.grad(p)[1], 2.0);
}

TEST(Primitives, FiniteOutputsOnFiniteInputs) {
  mtms::Rng rng(7);
  const Tensor x = mtms::uniform_tensor({2, 4, 4}, -30, 30, rng);
  for (auto kind : {mtms::Activation::kSigmoid, mtms::Activation::kTanh, mtms::Activation::kRelu}) {
    EXPECT_TRUE(mtms::all_finite(mtms::activation(x, kind)));
  }
  ad::Tape tape;
  const ad::Var v = tape.constant(mtms::uniform_tensor({6}, -700, 700, rng));
  EXPECT_TRUE(mtms::all_finite(ad::softmax(v).value()));
  EXPECT_TRUE(mtms::all_finite(ad::log_sum_exp(v).value()));
}

}  // namespace
