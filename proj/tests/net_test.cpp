#include "support.hpp"
#include "vforge/data.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace vforge;
using vforge::testing::random_matrix;

namespace {

ModelConfig small_config(std::uint64_t seed) {
  ModelConfig mc;
  mc.input_dim = 3;
  mc.hidden_layers = {5, 4};
  mc.output_dim = 3;
  mc.init_seed = seed;
  return mc;
}

Parameters identity_net() {
  ModelConfig mc;
  mc.input_dim = 2;
  mc.output_dim = 2;
  auto p = init_parameters<double>(mc);
  p.layers[0].weight = Matrix::Identity(2, 2);
  return p;
}

}  // namespace

TEST(InitParameters, SameSeedIsBitwiseIdentical) {
  auto a = init_parameters<double>(small_config(7));
  auto b = init_parameters<double>(small_config(7));
  EXPECT_TRUE(a.bitwise_equals(b));
  EXPECT_FALSE(a.bitwise_equals(init_parameters<double>(small_config(8))));
}

TEST(InitParameters, NoHiddenLayersGivesOneLayer) {
  ModelConfig mc;
  mc.input_dim = 2;
  mc.output_dim = 2;
  auto p = init_parameters<double>(mc);
  ASSERT_EQ(p.layers.size(), 1u);
  EXPECT_EQ(p.layers[0].weight.rows(), 2);
  EXPECT_EQ(p.layers[0].weight.cols(), 2);
  EXPECT_EQ(p.layers[0].bias, Vector::Zero(2));
}

TEST(InitParameters, KaimingStdMatchesFanIn) {
  ModelConfig mc;
  mc.input_dim = 200;
  mc.output_dim = 50;  // 10,000 weights
  mc.init_seed = 11;
  auto p = init_parameters<double>(mc);
  const auto& w = p.layers[0].weight;
  ASSERT_EQ(w.size(), 10000);
  const double mean = w.mean();
  const double sd = std::sqrt((w.array() - mean).square().sum() / (w.size() - 1));
  EXPECT_NEAR(sd, std::sqrt(2.0 / 200.0), 0.05 * std::sqrt(2.0 / 200.0));
}

TEST(InitParameters, XavierStaysInsideBound) {
  ModelConfig mc;
  mc.input_dim = 30;
  mc.hidden_layers = {20};
  mc.output_dim = 4;
  mc.init_scheme = InitScheme::xavier;
  auto p = init_parameters<double>(mc);
  EXPECT_LE(p.layers[0].weight.cwiseAbs().maxCoeff(), std::sqrt(6.0 / 50.0));
  EXPECT_LE(p.layers[1].weight.cwiseAbs().maxCoeff(), std::sqrt(6.0 / 24.0));
}

TEST(InitParameters, RejectsBadDimensions) {
  ModelConfig mc;
  mc.output_dim = 1;
  EXPECT_THROW(init_parameters<double>(mc), ConfigError);
  mc.output_dim = 2;
  mc.hidden_layers = {0};
  EXPECT_THROW(init_parameters<double>(mc), ConfigError);
}

TEST(InitParameters, FloatInstantiation) {
  auto p = init_parameters<float>(small_config(1));
  MatrixX<float> x = MatrixX<float>::Ones(2, 3);
  auto probs = forward(p, x);
  EXPECT_NEAR(probs.row(0).sum(), 1.0f, 1e-6f);
}

TEST(Forward, ZeroNetIsUniform) {
  auto p = init_parameters<double>(small_config(3)).zeros_like();
  Rng rng(1);
  auto probs = forward(p, random_matrix(rng, 4, 3));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    for (Eigen::Index c = 0; c < probs.cols(); ++c) EXPECT_DOUBLE_EQ(probs(r, c), 1.0 / 3.0);
  }
}

TEST(Forward, IdentityNetOnOrigin) {
  auto probs = forward(identity_net(), Matrix(Matrix::Zero(1, 2)));
  EXPECT_DOUBLE_EQ(probs(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(probs(0, 1), 0.5);
}

TEST(Forward, RowsSumToOne) {
  Rng rng(5);
  auto p = init_parameters<double>(small_config(5));
  auto probs = forward(p, random_matrix(rng, 5, 3, 3.0));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    EXPECT_NEAR(probs.row(r).sum(), 1.0, 1e-12);
    EXPECT_GT(probs.row(r).minCoeff(), 0.0);
    EXPECT_LT(probs.row(r).maxCoeff(), 1.0);
  }
}

TEST(Forward, LargeLogitsStayFinite) {
  auto p = identity_net();
  Matrix x(1, 2);
  x << 800.0, -800.0;
  auto probs = forward(p, x);
  EXPECT_TRUE(probs.allFinite());
  EXPECT_NEAR(probs.row(0).sum(), 1.0, 1e-12);
}

TEST(Forward, ShapeMismatchThrows) {
  EXPECT_THROW(forward(identity_net(), Matrix(Matrix::Zero(1, 3))), ShapeError);
}

TEST(Loss, ConfidentCorrectIsNearZero) {
  Matrix probs(1, 2);
  probs << 1.0 - 1e-15, 1e-15;
  EXPECT_NEAR(loss(probs, Labels{0}), 0.0, 1e-14);
}

TEST(Loss, UniformOverFourClasses) {
  Matrix probs = Matrix::Constant(3, 4, 0.25);
  EXPECT_NEAR(loss(probs, Labels{0, 1, 3}), std::log(4.0), 1e-15);
  EXPECT_NEAR(loss(probs, Labels{0, 1, 3}), 1.3863, 1e-4);
}

TEST(Loss, MixedBatchMatchesHandSum) {
  Matrix probs(3, 3);
  probs << 0.7, 0.2, 0.1,
           0.1, 0.1, 0.8,
           0.3, 0.4, 0.3;
  const double expected = -(std::log(0.7) + std::log(0.8) + std::log(0.3)) / 3.0;
  EXPECT_NEAR(loss(probs, Labels{0, 2, 2}), expected, 1e-15);
}

TEST(Loss, LabelOutOfRangeIsDataError) {
  Matrix probs = Matrix::Constant(1, 2, 0.5);
  EXPECT_THROW(loss(probs, Labels{2}), DataError);
  EXPECT_THROW(loss(probs, Labels{-1}), DataError);
  EXPECT_THROW(loss(probs, Labels{0, 1}), ShapeError);
}

TEST(Backward, MatchesFiniteDifferences) {
  Rng rng(2024);
  for (int trial = 0; trial < 5; ++trial) {
    auto p = vforge::testing::random_network(rng);
    const auto n = static_cast<Eigen::Index>(2 + rng.index(5));
    Matrix x = random_matrix(rng, n, p.arch.input_dim);
    Labels y = vforge::testing::random_labels(rng, static_cast<std::size_t>(n), p.arch.output_dim);
    EXPECT_LT(vforge::testing::gradient_check(p, x, y), 1e-4) << "trial " << trial;
  }
}

TEST(Backward, DuplicatedSampleGivesIdenticalInputGradients) {
  Rng rng(9);
  auto p = init_parameters<double>(small_config(9));
  Matrix row = random_matrix(rng, 1, 3);
  Matrix x(2, 3);
  x << row, row;
  auto g = backward(p, x, Labels{1, 1});
  EXPECT_TRUE(bitwise_equal(g.inputs.row(0), g.inputs.row(1)));
}

TEST(Backward, NoSignalWhenAlreadyCorrect) {
  auto p = identity_net();
  Matrix x(2, 2);
  x << 40.0, 0.0,
       0.0, 40.0;
  auto g = backward(p, x, Labels{0, 1});
  double norm = 0.0;
  for (const auto& l : g.params.layers) norm += l.weight.squaredNorm() + l.bias.squaredNorm();
  EXPECT_LT(std::sqrt(norm), 1e-12);
}

TEST(Train, IsDeterministic) {
  auto data = gen_blobs(2, 20, 2, 0.5, 4);
  ModelConfig mc;
  mc.input_dim = 2;
  mc.hidden_layers = {6};
  mc.output_dim = 2;
  TrainConfig tc(20, 8, 0.1, 5);
  auto a = train(data.features, data.labels, mc, tc);
  auto b = train(data.features, data.labels, mc, tc);
  EXPECT_TRUE(a.bitwise_equals(b));
  EXPECT_TRUE(a.finite());
}

TEST(Train, SeparableBlobsReachFullTrainingAccuracy) {
  auto data = gen_blobs(BlobsSpec{2, 20, 2, 0.5, 1, 6.0});
  // Separable: every point is nearer its own center than the midpoint plane.
  const Vector c0 = data.features.topRows(20).colwise().mean();
  const Vector c1 = data.features.bottomRows(20).colwise().mean();
  for (Eigen::Index r = 0; r < 40; ++r) {
    const double side = (data.features.row(r).transpose() - 0.5 * (c0 + c1)).dot(c1 - c0);
    ASSERT_EQ(side > 0, data.labels[static_cast<std::size_t>(r)] == 1);
  }
  ModelConfig mc;
  mc.input_dim = 2;
  mc.hidden_layers = {8};
  mc.output_dim = 2;
  mc.init_seed = 1;
  auto p = train(data.features, data.labels, mc, TrainConfig(200, 8, 0.1, 1));
  EXPECT_EQ(predict(p, data.features), data.labels);
}

TEST(Train, RejectsInvalidTrainConfig) {
  EXPECT_THROW(TrainConfig(0, 8, 0.1, 0), ConfigError);
  EXPECT_THROW(TrainConfig(1, 0, 0.1, 0), ConfigError);
  EXPECT_THROW(TrainConfig(1, 8, 0.0, 0), ConfigError);
  EXPECT_THROW(TrainConfig(1, 8, std::nan(""), 0), ConfigError);
}

TEST(Train, DivergenceCarriesEpoch) {
  auto data = gen_blobs(2, 20, 2, 0.5, 1);
  data.features *= 1e6;
  ModelConfig mc;
  mc.input_dim = 2;
  mc.hidden_layers = {8};
  mc.output_dim = 2;
  try {
    train(data.features, data.labels, mc, TrainConfig(50, 4, 1e6, 0));
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_LT(e.epoch(), 50u);
  }
}

TEST(Train, ShapeAndSizeChecks) {
  ModelConfig mc;
  mc.input_dim = 2;
  mc.output_dim = 2;
  Matrix x = Matrix::Zero(4, 2);
  EXPECT_THROW(train(x, Labels{0, 1, 0}, mc, TrainConfig(1, 2, 0.1, 0)), ShapeError);
  EXPECT_THROW(train(x, Labels{0, 1, 0, 1}, mc, TrainConfig(1, 5, 0.1, 0)), ConfigError);
  EXPECT_THROW(train(Matrix(Matrix::Zero(4, 3)), Labels{0, 1, 0, 1}, mc, TrainConfig(1, 2, 0.1, 0)),
               ShapeError);
}

TEST(Predict, TieGoesToLowestIndex) {
  Matrix probs(2, 3);
  probs << 0.5, 0.5, 0.0,
           0.1, 0.2, 0.7;
  EXPECT_EQ(argmax_rows(probs), (Labels{0, 2}));
}

TEST(Predict, AgreesWithForwardThenArgmax) {
  Rng rng(3);
  auto p = init_parameters<double>(small_config(3));
  Matrix x = random_matrix(rng, 20, 3);
  auto probs = forward(p, x);
  auto labels = predict(p, x);
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Eigen::Index best;
    probs.row(r).maxCoeff(&best);
    EXPECT_EQ(labels[static_cast<std::size_t>(r)], best);
  }
}
