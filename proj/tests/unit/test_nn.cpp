#include <gtest/gtest.h>

#include <cmath>

#include "gradient_cases.hpp"
#include "moeids/errors.hpp"
#include "moeids/nn.hpp"
#include "moeids/ops.hpp"

namespace moeids::nn {
namespace {

TEST(Conv1d, HandComputedWithPadding) {
  // One channel, kernel [1, 2, 3], input [1, 2, 3], zero padding 1.
  Tensor x({1, 1, 3}, {1, 2, 3});
  Tensor w({1, 1, 3}, {1, 2, 3});
  Tensor b({1}, {0.5});
  Tensor y = conv1d(x, w, b, 1);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 3}));
  EXPECT_DOUBLE_EQ(y[0], 0 * 1 + 1 * 2 + 2 * 3 + 0.5);
  EXPECT_DOUBLE_EQ(y[1], 1 * 1 + 2 * 2 + 3 * 3 + 0.5);
  EXPECT_DOUBLE_EQ(y[2], 2 * 1 + 3 * 2 + 0 * 3 + 0.5);
}

TEST(Conv1d, WidePaddingOnShortInput) {
  Tensor y = conv1d(Tensor({1, 1, 1}, {2.0}), Tensor({1, 1, 3}, {1, 1, 1}), Tensor({1}, {0.0}), 2);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 3}));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(y[i], 2.0);
}

TEST(Conv1d, ChannelMismatchNamesShapes) {
  try {
    conv1d(Tensor::zeros({1, 2, 4}), Tensor::zeros({3, 5, 3}), Tensor::zeros({3}), 1);
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("(1,2,4)"), std::string::npos) << e.what();
  }
}

TEST(MaxPool, FloorsOddLengthAndPicksFirstMaximum) {
  Tensor x({1, 1, 5}, {1, 3, 4, 4, 9}, true);
  Tensor y = maxpool1d(x);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2}));
  EXPECT_DOUBLE_EQ(y[0], 3);
  EXPECT_DOUBLE_EQ(y[1], 4);
  sum(y).backward();
  const std::vector<double> expected{0, 1, 1, 0, 0};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(x.grad()[i], expected[i]);
}

TEST(Dense, OutputShapeAndValues) {
  Tensor x({1, 2}, {1, 2});
  Tensor w({3, 2}, {1, 0, 0, 1, 1, 1});
  Tensor b({3}, {0, 0, 1});
  Tensor y = dense(x, w, b);
  ASSERT_EQ(y.shape(), (Shape{1, 3}));
  EXPECT_DOUBLE_EQ(y[0], 1);
  EXPECT_DOUBLE_EQ(y[1], 2);
  EXPECT_DOUBLE_EQ(y[2], 4);
}

TEST(CrossEntropy, MatchesLogSumExpAndRejectsBadLabels) {
  Tensor logits({1, 3}, {1.0, 2.0, 3.0});
  const std::vector<int> labels{2};
  const double expected = -3.0 + std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
  EXPECT_NEAR(cross_entropy(logits, labels).item(), expected, 1e-14);
  EXPECT_THROW(cross_entropy(logits, std::vector<int>{3}), LabelError);
  EXPECT_THROW(cross_entropy(logits, std::vector<int>{0, 1}), DimensionError);
}

TEST(BatchNorm, TrainModeNormalizesPerChannel) {
  Tensor x({2, 1, 2}, {1, 2, 3, 4});
  BatchStatistics stats;
  Tensor y = batch_norm_train(x, Tensor({1}, {1.0}), Tensor({1}, {0.0}), 0.0, &stats);
  EXPECT_DOUBLE_EQ(stats.mean[0], 2.5);
  EXPECT_DOUBLE_EQ(stats.variance[0], 1.25);
  double s = 0.0, s2 = 0.0;
  for (double v : y.data()) {
    s += v;
    s2 += v * v;
  }
  EXPECT_NEAR(s / 4, 0.0, 1e-15);
  EXPECT_NEAR(s2 / 4, 1.0, 1e-12);
  EXPECT_THROW(batch_norm_train(Tensor::zeros({1, 1, 1}), Tensor({1}, {1.0}), Tensor({1}, {0.0}), 1e-5),
               DegenerateInputError);
}

TEST(BatchNorm, RunningStatisticsUseMomentumAndUnbiasedVariance) {
  BatchNorm1dLayer bn(1);
  bn.forward(Tensor({2, 1, 2}, {1, 2, 3, 4}), Mode::kTrain);
  std::vector<NamedTensor> buffers;
  bn.collect_buffers("", buffers);
  ASSERT_EQ(buffers.size(), 2u);
  EXPECT_EQ(buffers[0].name, "running_mean");
  EXPECT_NEAR(buffers[0].tensor[0], 0.9 * 0.0 + 0.1 * 2.5, 1e-15);
  EXPECT_NEAR(buffers[1].tensor[0], 0.9 * 1.0 + 0.1 * (5.0 / 3.0), 1e-15);
  // Eval mode leaves the buffers untouched.
  bn.forward(Tensor({2, 1, 2}, {10, 20, 30, 40}), Mode::kEval);
  EXPECT_NEAR(buffers[0].tensor[0], 0.25, 1e-15);
}

TEST(Backbone, ShapeChainForTheDefaultConfig) {
  Rng rng(1);
  BackboneConfig cfg;
  EXPECT_EQ(cfg.output_length(), 1u);
  EXPECT_EQ(cfg.output_features(), 128u);
  CnnBackbone net(cfg, rng);
  Tensor x = standard_normal_sample(rng, {4, 6, 13});
  Tensor y = net.forward(x, Mode::kTrain);
  EXPECT_EQ(y.shape(), (Shape{4, 128}));
  EXPECT_EQ(net.forward(x, Mode::kEval).shape(), (Shape{4, 128}));
}

TEST(Backbone, WrongInputShapeNamesExpectedShape) {
  Rng rng(1);
  CnnBackbone net(BackboneConfig{}, rng);
  try {
    net.forward(Tensor::zeros({2, 13, 6}), Mode::kEval);
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("(batch,6,13)"), std::string::npos) << e.what();
  }
}

TEST(Backbone, ParameterNamesAreStable) {
  Rng rng(1);
  CnnBackbone net(BackboneConfig{}, rng);
  std::vector<NamedTensor> params, buffers;
  net.collect("backbone.", params);
  net.collect_buffers("backbone.", buffers);
  ASSERT_EQ(params.size(), 16u);
  EXPECT_EQ(params[0].name, "backbone.cell0.conv.weight");
  EXPECT_EQ(params[0].tensor.shape(), (Shape{16, 6, 3}));
  EXPECT_EQ(buffers.size(), 8u);
  std::size_t count = 0;
  for (const auto& p : params) count += p.tensor.numel();
  // conv: 16*6*3+16, 32*16*3+32, 64*32*3+64, 128*64*3+128; bn: 2*(16+32+64+128)
  EXPECT_EQ(count, 304u + 1568u + 6208u + 24704u + 480u);
}

TEST(DenseLayer, InitStaysWithinFanInBound) {
  Rng rng(3);
  DenseLayer layer(25, 4, rng);
  for (double v : layer.weight().data()) EXPECT_LE(std::abs(v), 1.0 / 5.0);
  EXPECT_EQ(layer.parameter_count(), 25u * 4u + 4u);
}

class LayerGradients : public ::testing::TestWithParam<testing::GradFamily> {};

TEST_P(LayerGradients, MatchFiniteDifferences) {
  Rng rng(100 + static_cast<int>(GetParam()));
  for (int i = 0; i < 5; ++i) {
    const auto r = testing::check_random_instance(GetParam(), rng);
    EXPECT_TRUE(r.ok) << testing::family_name(GetParam()) << " instance " << i << " error " << r.max_relative_error;
  }
}

INSTANTIATE_TEST_SUITE_P(Families, LayerGradients, ::testing::ValuesIn(testing::kAllGradFamilies),
                         [](const auto& info) { return std::string(testing::family_name(info.param)); });

}  // namespace
}  // namespace moeids::nn
