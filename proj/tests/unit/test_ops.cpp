// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include <gtest/gtest.h>

#include <cmath>

#include "edgepipe/layers.hpp"
#include "edgepipe/naive_ops.hpp"
#include "edgepipe/ops.hpp"
#include "edgepipe/verify.hpp"

using namespace edgepipe;

namespace {

std::vector<double> doubles(const Tensor& t) {
  std::vector<double> v(t.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = t.at_as_double(i);
  return v;
}

}  // namespace

TEST(Matmul, TwoByTwo) {
  const Tensor a = Tensor::from<float>({2, 2}, {1, 2, 3, 4});
  const Tensor b = Tensor::from<float>({2, 2}, {5, 6, 7, 8});
  // [[1*5+2*7, 1*6+2*8], [3*5+4*7, 3*6+4*8]]
  EXPECT_EQ(doubles(matmul_broadcast(a, b)), (std::vector<double>{19, 22, 43, 50}));
}

TEST(Matmul, BroadcastsLeadingAxes) {
  EXPECT_EQ(broadcast_shapes({2, 1, 3}, {4, 3}), (Shape{2, 4, 3}));
  const Tensor a = Tensor::from<double>({2, 1, 2}, {1, 0, 0, 1});
  const Tensor b = Tensor::from<double>({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor c = matmul_broadcast(a, b);
  EXPECT_EQ(c.shape(), (Shape{2, 1, 3}));
  EXPECT_EQ(doubles(c), (std::vector<double>{1, 2, 3, 4, 5, 6}));
}

TEST(Matmul, ShapeConflictIsReported) {
  const Tensor a(DType::kF32, {2, 3});
  const Tensor b(DType::kF32, {2, 3});
  try {
    matmul_broadcast(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kShapeMismatch);
  }
  EXPECT_THROW(broadcast_shapes({3, 2}, {4, 2}), Error);
}

TEST(Conv2d, HandComputedSingleChannel) {
  // 3x3 input, 2x2 ones kernel, stride 1, no pad: each output is a 2x2 window sum.
  const Tensor x = Tensor::from<float>({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const Tensor w = Tensor::from<float>({1, 1, 2, 2}, {1, 1, 1, 1});
  const Tensor b = Tensor::from<float>({1}, {0.5f});
  const Tensor y = naive::conv2d(x, w, b, 1, 0);
  EXPECT_EQ(doubles(y), (std::vector<double>{12.5, 16.5, 24.5, 28.5}));

  const LayerSpec l = LayerSpec::conv2d(1, 1, 2, 1, 0);
  const Tensor params[] = {w, b};
  const LayerForward f = layer_forward(l, params, x, LayerContext{});
  EXPECT_TRUE(f.output.bit_equal(y));
}

TEST(Conv2d, PaddingAndStride) {
  const LayerSpec l = LayerSpec::conv2d(3, 8, 3, 2, 1);
  EXPECT_EQ(l.output_shape({4, 3, 32, 32}), (Shape{4, 8, 16, 16}));
  EXPECT_THROW(l.output_shape({4, 2, 32, 32}), Error);
}

TEST(Dropout, KeptElementsScaleByInverseKeepRate) {
  Prng p(3);
  const Tensor x = Tensor::from<float>({1, 1000}, std::vector<float>(1000, 1.0f));
  const auto d = dropout(x, 0.2, p, true);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < 1000; ++i) {
    const double y = d.output.at_as_double(i);
    if (d.mask.at_as_double(i) != 0.0) {
      ++kept;
      EXPECT_FLOAT_EQ(y, 1.0 / 0.8);
    } else {
      EXPECT_EQ(y, 0.0);
    }
  }
  // Binomial(1000, 0.8): mean 800, sd ~12.6.
  EXPECT_NEAR(static_cast<double>(kept), 800.0, 60.0);
}

TEST(Dropout, EvalModeIsIdentity) {
  Prng p(3);
  const Tensor x = Tensor::from<float>({2, 2}, {1, -2, 3, -4});
  EXPECT_TRUE(dropout(x, 0.5, p, false).output.bit_equal(x));
}

TEST(Dropout, SameStreamSameMask) {
  const Tensor x(DType::kF32, {4, 16});
  Prng a = Prng::for_stream(1, 2, 3, 4), b = Prng::for_stream(1, 2, 3, 4);
  EXPECT_TRUE(dropout(x, 0.3, a, true).mask.bit_equal(dropout(x, 0.3, b, true).mask));
}

TEST(SoftmaxXent, UniformLogitsGiveLogClassCount) {
  const Tensor logits(DType::kF64, {3, 5});
  const Tensor labels = Tensor::from<std::int64_t>({3}, {0, 2, 4});
  EXPECT_NEAR(naive::softmax_xent(logits, labels).at_as_double(0), std::log(5.0), 1e-12);
}

TEST(SoftmaxXent, LargeLogitsStayFinite) {
  const Tensor logits = Tensor::from<float>({1, 2}, {1000.0f, 0.0f});
  const Tensor labels = Tensor::from<std::int64_t>({1}, {1});
  const Tensor params[1] = {};
  LayerContext ctx;
  ctx.labels = &labels;
  const auto f = layer_forward(LayerSpec::softmax_xent(), std::span<const Tensor>(params, 0), logits, ctx);
  EXPECT_NEAR(f.output.at_as_double(0), 1000.0, 1e-3);
}

TEST(SoftmaxXent, LabelOutOfRangeRejected) {
  const Tensor logits(DType::kF32, {1, 3});
  const Tensor labels = Tensor::from<std::int64_t>({1}, {3});
  LayerContext ctx;
  ctx.labels = &labels;
  EXPECT_THROW(layer_forward(LayerSpec::softmax_xent(), {}, logits, ctx), Error);
}

TEST(Sgd, StepsInPlace) {
  std::vector<Tensor> p{Tensor::from<float>({2}, {1.0f, 2.0f})};
  const std::vector<Tensor> g{Tensor::from<float>({2}, {0.5f, -1.0f})};
  sgd_step(p, g, 0.1);
  EXPECT_FLOAT_EQ(p[0].values<float>()[0], 0.95f);
  EXPECT_FLOAT_EQ(p[0].values<float>()[1], 2.1f);
}

TEST(AbsDiff, MaxAndMean) {
  const Tensor a = Tensor::from<double>({3}, {0, 1, 2});
  const Tensor b = Tensor::from<double>({3}, {0, 1.5, 1});
  const AbsDiff d = abs_diff(a, b);
  EXPECT_EQ(d.max, 1.0);
  EXPECT_EQ(d.mean, 0.5);
  EXPECT_EQ(d.count, 3u);
}

TEST(Verify, EveryOpAgreesWithItsLoopOracle) {
  const auto reports = run_op_verification(11, 20);
  ASSERT_GE(reports.size(), 7u);
  for (const auto& r : reports) {
    if (r.expect_failure) {
      EXPECT_FALSE(r.within()) << r.line();
    } else {
      EXPECT_TRUE(r.within()) << r.line();
      EXPECT_GT(r.element_count, 0u);
    }
  }
}

TEST(Verify, DetectsShapeMismatch) {
  const Tensor x(DType::kF32, {2, 2});
  const Tensor inputs[] = {x};
  const auto r = verify_pair(
      "shape", inputs, [](std::span<const Tensor> in) { return in[0]; },
      [](std::span<const Tensor>) { return Tensor(DType::kF32, {4}); });
  EXPECT_TRUE(r.shape_mismatch);
  EXPECT_FALSE(r.within());
  EXPECT_NE(r.line().find("status=fail"), std::string::npos);
}

TEST(Verify, LineFormat) {
  DiffReport r;
  r.op_name = "relu";
  EXPECT_EQ(r.line().rfind("op=relu max=", 0), 0u);
  EXPECT_NE(r.line().find("status=pass"), std::string::npos);
}
