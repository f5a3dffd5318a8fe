#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "headhunt/error.hpp"
#include "headhunt/scorer.hpp"

using namespace headhunt;

namespace {

LabeledSet overlapping(std::uint64_t seed, int n, int d) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  LabeledSet s{Eigen::MatrixXd(n, d), Eigen::VectorXd(n), {}};
  for (int i = 0; i < n; ++i) {
    s.y[i] = i % 2;
    for (int j = 0; j < d; ++j) s.x(i, j) = 3.0 * j + 0.7 * s.y[i] * (j % 2 ? -1.0 : 1.0) + z(gen) * (1.0 + j);
  }
  return s;
}

Eigen::VectorXd central_difference(const LogisticObjective& f, const Eigen::VectorXd& theta, double h) {
  Eigen::VectorXd g(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd a = theta, b = theta;
    a[i] += h;
    b[i] -= h;
    g[i] = (f.value(a) - f.value(b)) / (2.0 * h);
  }
  return g;
}

}  // namespace

TEST(Objective, GradientMatchesFiniteDifferences) {
  const auto s = overlapping(1, 40, 5);
  const LogisticObjective f(s.x, s.y, 0.3);
  std::mt19937_64 gen(2);
  std::normal_distribution<double> z(0.0, 0.5);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd theta(f.dim());
    for (auto& v : theta) v = z(gen);
    const auto g = f.gradient(theta);
    const auto fd = central_difference(f, theta, 1e-5);
    EXPECT_LT((g - fd).cwiseAbs().maxCoeff() / g.cwiseAbs().maxCoeff(), 1e-5);
  }
}

TEST(Objective, HessianMatchesGradientDifferences) {
  const auto s = overlapping(3, 30, 4);
  const LogisticObjective f(s.x, s.y, 0.1);
  Eigen::VectorXd theta = Eigen::VectorXd::Constant(f.dim(), 0.05);
  const auto h = f.hessian(theta);
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd a = theta, b = theta;
    a[i] += 1e-6;
    b[i] -= 1e-6;
    const Eigen::VectorXd col = (f.gradient(a) - f.gradient(b)) / 2e-6;
    EXPECT_LT((h.col(i) - col).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Objective, ValueAtZeroIsLogTwo) {
  const auto s = overlapping(4, 10, 2);
  const LogisticObjective f(s.x, s.y, 1.0);
  EXPECT_NEAR(f.value(Eigen::VectorXd::Zero(3)), std::log(2.0), 1e-15);
}

TEST(Objective, BiasIsNotPenalized) {
  const auto s = overlapping(5, 10, 2);
  const LogisticObjective with(s.x, s.y, 10.0), without(s.x, s.y, 0.0);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(3);
  theta[2] = 1.5;
  EXPECT_EQ(with.value(theta), without.value(theta));
}

TEST(Train, ConvexProblemReachesSameLossFromTwoStarts) {
  const auto s = overlapping(6, 80, 6);
  const TrainOptions opts{1e-3, 1e-10, 200};
  const auto a = train(s, opts);
  Eigen::VectorXd init = Eigen::VectorXd::Constant(7, -2.0);
  const auto b = train(s, opts, init);
  EXPECT_TRUE(a.training_meta.converged);
  EXPECT_TRUE(b.training_meta.converged);
  EXPECT_LT(std::abs(a.training_meta.final_loss - b.training_meta.final_loss), 1e-6);
  const auto& h = a.training_meta.loss_history;
  for (std::size_t i = 1; i < h.size(); ++i) EXPECT_LE(h[i], h[i - 1]);
}

TEST(Train, SingleClassIsRejected) {
  auto s = overlapping(7, 10, 2);
  s.y.setZero();
  EXPECT_THROW(train(s, {}), ValidationError);
}

TEST(Train, UnderdeterminedWithoutPenaltyWarns) {
  const auto s = overlapping(8, 6, 10);
  const auto m = train(s, {0.0, 1e-6, 20});
  ASSERT_FALSE(m.training_meta.warnings.empty());
  EXPECT_NE(m.training_meta.warnings[0].find("rank"), std::string::npos);
}

TEST(Train, ConstantFeatureGetsUnitScale) {
  auto s = overlapping(9, 20, 2);
  s.x.col(1).setConstant(4.0);
  const auto m = train(s, {});
  EXPECT_EQ(m.standardization.scale[1], 1.0);
  EXPECT_TRUE(m.weights.allFinite());
}

TEST(Predict, StandardizesRawInputs) {
  ScorerModel m;
  m.weights = Eigen::VectorXd::Ones(2);
  m.bias = -1.0;
  m.standardization.mean = Eigen::VectorXd::Constant(2, 1.0);
  m.standardization.scale = Eigen::VectorXd::Constant(2, 2.0);
  const std::vector<double> x{3.0, 1.0};  // standardized (1, 0): logit 0
  EXPECT_DOUBLE_EQ(predict(m, x), 0.5);
  const std::vector<float> xf{3.0f, 1.0f};
  EXPECT_DOUBLE_EQ(predict(m, xf), 0.5);
}

TEST(Sigmoid, StaysInsideOpenInterval) {
  EXPECT_GT(sigmoid(-1e6), 0.0);
  EXPECT_LT(sigmoid(1e6), 1.0);
  EXPECT_NEAR(sigmoid(2.0), 1.0 / (1.0 + std::exp(-2.0)), 1e-16);
}
