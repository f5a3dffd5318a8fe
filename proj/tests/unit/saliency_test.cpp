#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "headhunt/error.hpp"
#include "headhunt/saliency.hpp"
#include "headhunt/synthlab.hpp"
#include "oracles.hpp"

using namespace headhunt;
using fixture::to_eigen;

TEST(Mmd, MatchesDoubleLoopOracle) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const int d = 1 + static_cast<int>(s % 8);
    const auto a = oracle::random_matrix(100 + s, 5 + static_cast<int>(s), d);
    const auto b = oracle::random_matrix(200 + s, 12, d, 0.7);
    const double h = oracle::median_distance(a, b);
    EXPECT_NEAR(median_heuristic_bandwidth(to_eigen(a), to_eigen(b)), h, 1e-12);
    EXPECT_NEAR(mmd2(to_eigen(a), to_eigen(b), KernelSpec::median_heuristic()), oracle::mmd2(a, b, h), 1e-9);
    EXPECT_NEAR(mmd2(to_eigen(a), to_eigen(b), KernelSpec::fixed(0.8)), oracle::mmd2(a, b, 0.8), 1e-9);
  }
}

TEST(Mmd, ClosedFormSinglePoints) {
  Eigen::MatrixXd x(1, 1), y(1, 1);
  x << 0.0;
  y << 1.0;
  EXPECT_NEAR(mmd2(x, y, KernelSpec::fixed(1.0)), 2.0 - 2.0 * std::exp(-0.5), 1e-12);
}

TEST(Mmd, SymmetricBitForBitAndZeroOnIdenticalSets) {
  const auto a = to_eigen(oracle::random_matrix(1, 9, 4));
  const auto b = to_eigen(oracle::random_matrix(2, 7, 4, 1.0));
  EXPECT_EQ(mmd2(a, b, {}), mmd2(b, a, {}));
  EXPECT_EQ(mmd2(a, a, {}), 0.0);
}

TEST(Mmd, MedianFallsBackToOneOnIdenticalPoints) {
  const Eigen::MatrixXd z = Eigen::MatrixXd::Zero(3, 2);
  EXPECT_EQ(median_heuristic_bandwidth(z, z), 1.0);
  EXPECT_THROW(mmd2(z, z, KernelSpec::fixed(-1.0)), ValidationError);
}

TEST(Lda, MatchesExplicitSolve) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const int d = 1 + static_cast<int>(s % 6);
    const auto n = oracle::random_matrix(300 + s, 10, d);
    const auto a = oracle::random_matrix(400 + s, 8, d, 0.5);
    EXPECT_NEAR(lda_score(to_eigen(n), to_eigen(a), {0.1, 1e-6}), oracle::lda(n, a, 0.1, 1e-6), 1e-9);
    EXPECT_NEAR(lda_score(to_eigen(n), to_eigen(a), {0.0, 1e-3}), oracle::lda(n, a, 0.0, 1e-3), 1e-9);
  }
}

TEST(Lda, OneDimensionalSpotValue) {
  // class means -1 and 3, scatter 2 + 2 = 4: (4^2) / 4 = 4 before jitter
  Eigen::MatrixXd n(2, 1), a(2, 1);
  n << -2.0, 0.0;
  a << 2.0, 4.0;
  EXPECT_NEAR(lda_score(n, a, {0.1, 1e-6}), 16.0 / (4.0 + 1e-6), 1e-12);
  EXPECT_NEAR(lda_score(n, a, {0.1, 1e-6}), 4.0, 1e-6);
}

TEST(Lda, NeedsTwoSamplesPerClass) {
  const Eigen::MatrixXd one = Eigen::MatrixXd::Zero(1, 2);
  const Eigen::MatrixXd two = Eigen::MatrixXd::Ones(2, 2);
  EXPECT_THROW(lda_score(one, two), ValidationError);
}

TEST(Kl, UnitGaussiansOneApart) {
  Eigen::MatrixXd one(1, 1);
  one << 1.0;
  const auto n = GaussianClassModel::from_moments(Eigen::VectorXd::Zero(1), one);
  const auto a = GaussianClassModel::from_moments(Eigen::VectorXd::Ones(1), one);
  EXPECT_NEAR(symmetrized_kl(n, a), 0.5, 1e-12);
  EXPECT_EQ(symmetrized_kl(n, a), symmetrized_kl(a, n));
  EXPECT_EQ(gaussian_kl(n, n), 0.0);
}

TEST(Kl, MatchesMonteCarlo) {
  const std::vector<double> mn{0.0, 0.5, -0.3}, ma{0.8, 0.1, 0.4};
  const oracle::Matrix cn{{1.0, 0.3, 0.0}, {0.3, 1.5, 0.2}, {0.0, 0.2, 0.7}};
  const oracle::Matrix ca{{2.0, -0.4, 0.1}, {-0.4, 1.0, 0.0}, {0.1, 0.0, 1.2}};
  const auto n = GaussianClassModel::from_moments(Eigen::Map<const Eigen::VectorXd>(mn.data(), 3), to_eigen(cn));
  const auto a = GaussianClassModel::from_moments(Eigen::Map<const Eigen::VectorXd>(ma.data(), 3), to_eigen(ca));
  const double mc = oracle::mc_symmetrized_kl(mn, cn, ma, ca, 100000, 5);
  EXPECT_NEAR(symmetrized_kl(n, a), mc, 0.02 * mc);
}

TEST(Kl, FitUsesUnbiasedCovariance) {
  Eigen::MatrixXd x(3, 1);
  x << 1.0, 2.0, 6.0;  // mean 3, squared deviations 4 + 1 + 9 = 14
  const auto m = GaussianClassModel::fit(x, {0.0, 0.0});
  EXPECT_NEAR(m.covariance(0, 0), 7.0, 1e-12);
}

TEST(Nmi, PerfectClusteringScoresOne) {
  Eigen::MatrixXd n = to_eigen(oracle::random_matrix(7, 10, 2));
  Eigen::MatrixXd a = to_eigen(oracle::random_matrix(8, 10, 2, 50.0));
  const auto r = nmi_score(n, a, 3);
  EXPECT_FALSE(r.degenerate);
  EXPECT_NEAR(r.value, 1.0, 1e-12);
}

TEST(Nmi, IdenticalPooledPointsAreDegenerate) {
  const Eigen::MatrixXd z = Eigen::MatrixXd::Constant(4, 3, 2.0);
  const auto r = nmi_score(z, z, 1);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.value, 0.0);
}

TEST(Normalize, MinMaxPerMetricAndHalfOnZeroRange) {
  const std::vector<SaliencyScores> raw{{1.0, 5.0, 0.2, 0.3}, {3.0, 5.0, 0.4, 0.3}, {2.0, 5.0, 0.0, 0.3}};
  const auto n = normalize_and_average(raw);
  EXPECT_DOUBLE_EQ(n.normalized[0].lda, 0.0);
  EXPECT_DOUBLE_EQ(n.normalized[1].lda, 1.0);
  EXPECT_DOUBLE_EQ(n.normalized[2].lda, 0.5);
  EXPECT_DOUBLE_EQ(n.normalized[0].kl, 0.5);
  EXPECT_DOUBLE_EQ(n.normalized[2].mmd2, 0.0);
  EXPECT_DOUBLE_EQ(n.score[1], (1.0 + 0.5 + 1.0 + 0.5) / 4.0);
}

TEST(SaliencyTable, IndependentOfWorkerCount) {
  auto spec = PlantSpec::recovery_default(3);
  spec.n_layers = 4;
  spec.n_heads_per_layer = 4;
  spec.head_dim = 8;
  spec.stable_heads = {1, 6};
  spec.decoy_heads = {3, 9, 12};
  spec.n_normal = spec.n_abnormal = 6;
  spec.n_prompts = 3;
  const auto bank = synthesize_calibration_bank(spec);
  const auto t1 = build_saliency_table(bank, {}, 11, 1);
  const auto t3 = build_saliency_table(bank, {}, 11, 3);
  ASSERT_EQ(t1.prompts.size(), 3u);
  for (std::size_t m = 0; m < 3; ++m) {
    for (std::size_t k = 0; k < t1.prompts[m].heads.size(); ++k) {
      EXPECT_EQ(t1.prompts[m].heads[k].raw, t3.prompts[m].heads[k].raw);
      EXPECT_EQ(t1.prompts[m].heads[k].score, t3.prompts[m].heads[k].score);
    }
  }
}

TEST(SaliencyTable, SingleClassBankIsRejected) {
  auto m = fixture::tiny_manifest();
  for (auto& v : m.videos) v.label = 0;
  std::vector<CalibrationFeatureRecord> records;
  for (std::size_t v = 0; v < 4; ++v) {
    for (std::size_t p = 0; p < 2; ++p) records.push_back(fixture::tiny_record(m, v, p));
  }
  const auto bank = HeadBank::in_memory(m, records);
  EXPECT_THROW(build_saliency_table(bank, {}, 0), ValidationError);
}
