#include <gtest/gtest.h>

#include "headhunt/digest.hpp"
#include "headhunt/error.hpp"
#include "headhunt/rhi.hpp"

using namespace headhunt;

namespace {
const ModelSpec kModel{"m", 2, 2, 4};
}

TEST(Robustness, SpotValues) {
  // head 0 scores 1.0 and 0.6: mu 0.8, population sigma 0.2, rss 0.8 - 0.5 * 0.2
  const auto p = robustness_profile({{1.0, 0.5, 0.5, 0.0}, {0.6, 0.5, 0.75, 0.0}}, 0.5);
  ASSERT_EQ(p.heads.size(), 4u);
  EXPECT_NEAR(p.heads[0].mu, 0.8, 1e-15);
  EXPECT_NEAR(p.heads[0].sigma, 0.2, 1e-15);
  EXPECT_NEAR(p.heads[0].rss, 0.7, 1e-15);
  EXPECT_EQ(p.heads[1].sigma, 0.0);
  EXPECT_NEAR(p.heads[2].rss, 0.625 - 0.5 * 0.125, 1e-15);
}

TEST(Robustness, SinglePromptHasZeroSpread) {
  const auto p = robustness_profile({{0.3, 0.9, 0.1, 0.2}}, 2.0);
  for (const auto& h : p.heads) {
    EXPECT_EQ(h.sigma, 0.0);
    EXPECT_EQ(h.rss, h.mu);
  }
}

TEST(Robustness, RejectsNegativeLambdaAndRaggedRows) {
  EXPECT_THROW(robustness_profile({{0.1, 0.2}}, -0.1), ValidationError);
  EXPECT_THROW(robustness_profile({{0.1, 0.2}, {0.3}}, 0.5), ValidationError);
}

TEST(Selection, DescendingRssWithIndexTieBreak) {
  const auto p = robustness_profile({{0.5, 0.9, 0.5, 0.1}}, 0.5);
  const auto e = select_experts(p, kModel, 3);
  EXPECT_EQ(e.global_indices(), (std::vector<int>{1, 0, 2}));
  EXPECT_FALSE(e.warning.has_value());
  EXPECT_EQ(e.heads[0], (HeadAddress{0, 1, 1}));
}

TEST(Selection, LambdaPenalizesUnstableHeads) {
  // head 0: 1.0 / 0.2 (mu 0.6, sigma 0.4); head 1: 0.55 / 0.55
  const std::vector<std::vector<double>> s{{1.0, 0.55, 0.0, 0.0}, {0.2, 0.55, 0.0, 0.0}};
  EXPECT_EQ(select_experts(robustness_profile(s, 0.0), kModel, 1).global_indices()[0], 0);
  EXPECT_EQ(select_experts(robustness_profile(s, 0.5), kModel, 1).global_indices()[0], 1);
}

TEST(Selection, OversizedKWarnsAndTakesAll) {
  const auto e = select_experts(robustness_profile({{0.1, 0.2, 0.3, 0.4}}, 0.5), kModel, 9);
  EXPECT_EQ(e.heads.size(), 4u);
  EXPECT_TRUE(e.warning.has_value());
  EXPECT_THROW(select_experts(robustness_profile({{0.1, 0.2, 0.3, 0.4}}, 0.5), kModel, 0), ValidationError);
}

TEST(ManifestHash, FrozenCanonicalText) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const std::vector<HeadAddress> heads{HeadAddress::from_global(kModel, 2), HeadAddress::from_global(kModel, 1)};
  EXPECT_EQ(expert_manifest_hash(kModel, heads, 0.5),
            "bf47b329bd3ee5af4edde53dbc6cf2dcc4f912d3074db0755b79cb5cb7729ca6");
  EXPECT_NE(expert_manifest_hash(kModel, heads, 0.25), expert_manifest_hash(kModel, heads, 0.5));
}
