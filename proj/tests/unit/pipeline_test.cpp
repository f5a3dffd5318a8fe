#include <gtest/gtest.h>

#include <algorithm>

#include "fixtures.hpp"
#include "headhunt/error.hpp"
#include "headhunt/metrics.hpp"
#include "headhunt/pipeline.hpp"

using namespace headhunt;

namespace {

PlantSpec compact_spec(std::uint64_t seed) {
  PlantSpec s;
  s.n_layers = 4;
  s.n_heads_per_layer = 8;
  s.head_dim = 16;
  s.stable_heads = {3, 12, 21};
  s.decoy_heads = {5, 30};
  s.n_prompts = 3;
  s.seed = seed;
  s.split = {8, 30, 4, 6, 9};
  return s;
}

PipelineConfig compact_config() {
  PipelineConfig c;
  c.top_k = 3;
  c.grid = {{0.5, 1.0, 1.5, 2.0}, {0.3, 0.5, 0.7}};
  return c;
}

}  // namespace

TEST(Pipeline, HuntFindsPlantedHeads) {
  const auto spec = compact_spec(1);
  const auto r = hunt(synthesize_calibration_bank(spec), compact_config());
  auto got = r.experts.global_indices();
  std::sort(got.begin(), got.end());
  EXPECT_EQ(got, spec.stable_heads);
  EXPECT_EQ(r.saliency.prompts.size(), 3u);
}

TEST(Pipeline, SinglePromptProfileHasRssEqualMu) {
  auto spec = compact_spec(2);
  spec.n_prompts = 1;
  spec.decoy_heads.clear();
  const auto r = hunt(synthesize_calibration_bank(spec), compact_config());
  for (const auto& h : r.profile.heads) EXPECT_EQ(h.rss, h.mu);
}

TEST(Pipeline, ScorerSeparatesTrainingData) {
  const auto spec = compact_spec(3);
  const auto bank = synthesize_calibration_bank(spec);
  const auto cfg = compact_config();
  const auto experts = hunt(bank, cfg).experts;
  const auto model = train_scorer(bank, experts, cfg);
  EXPECT_TRUE(model.training_meta.converged);
  EXPECT_EQ(model.expert_manifest_hash, experts.manifest_hash);
  const auto data = build_composite(bank, experts);
  std::vector<double> p;
  std::vector<std::uint8_t> y;
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    const Eigen::VectorXd row = data.x.row(i).transpose();
    p.push_back(predict(model, std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))));
    y.push_back(static_cast<std::uint8_t>(data.y[i]));
  }
  EXPECT_GE(roc_auc(p, y), 0.99);
}

TEST(Pipeline, DetectLocalizesPlantedWindows) {
  const auto spec = compact_spec(4);
  const auto cfg = compact_config();
  const auto calib = synthesize_calibration_bank(spec);
  const auto experts = hunt(calib, cfg).experts;
  const auto scorer = train_scorer(calib, experts, cfg);
  const auto videos = default_segment_videos(spec);
  const auto split = synthesize_segment_bank(spec, experts, videos);
  const auto locator = calibrate_locator(split, scorer, cfg, "val");
  const auto curves = detect(split, scorer, locator);
  ASSERT_EQ(curves.size(), videos.size());
  for (std::size_t i = 0; i < videos.size(); ++i) {
    if (videos[i].windows.empty()) {
      EXPECT_TRUE(curves[i].events.empty()) << videos[i].id;
      continue;
    }
    const auto w = videos[i].windows[0];
    const bool overlaps = std::any_of(curves[i].events.begin(), curves[i].events.end(),
                                      [&](const SegmentEvent& e) { return e.start < w.end && w.start < e.end; });
    EXPECT_TRUE(overlaps) << videos[i].id;
  }
}

TEST(Pipeline, StaleExpertHashIsRefusedNamingBothHashes) {
  const auto spec = compact_spec(5);
  const auto cfg = compact_config();
  const auto calib = synthesize_calibration_bank(spec);
  const auto experts = hunt(calib, cfg).experts;
  auto scorer = train_scorer(calib, experts, cfg);
  scorer.expert_manifest_hash = std::string(64, 'f');
  const auto split = synthesize_segment_bank(spec, experts, default_segment_videos(spec));
  try {
    score_segment_bank(split, scorer);
    FAIL() << "expected a refusal";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(experts.manifest_hash), std::string::npos);
    EXPECT_NE(msg.find(std::string(64, 'f')), std::string::npos);
  }
}

TEST(Pipeline, CalibrateNeedsGroundTruth) {
  const auto spec = compact_spec(6);
  const auto cfg = compact_config();
  const auto calib = synthesize_calibration_bank(spec);
  const auto experts = hunt(calib, cfg).experts;
  const auto scorer = train_scorer(calib, experts, cfg);
  const auto split = synthesize_segment_bank(spec, experts, default_segment_videos(spec));
  auto manifest = split.manifest();
  manifest.videos[0].gt_intervals.reset();
  std::vector<SegmentFeatureSequence> seqs;
  for (const auto& v : manifest.videos) seqs.push_back(split.segments(v.id));
  const auto no_gt = HeadBank::in_memory(manifest, {}, seqs);
  EXPECT_THROW(calibrate_locator(no_gt, scorer, cfg, "val"), ValidationError);
}

TEST(Pipeline, FileCommandsAndReport) {
  fixture::TempDir dir("cmds");
  const auto spec = compact_spec(7);
  auto cfg = compact_config();
  cmd_gen(spec, std::nullopt, dir / "calib");
  cmd_hunt(dir / "calib", cfg, dir / "art");
  cmd_train_scorer(dir / "calib", dir / "art" / "experts.json", cfg, dir / "art" / "scorer.json");
  cmd_gen(spec, dir / "art" / "experts.json", dir / "val");
  cmd_calibrate(dir / "val", dir / "art" / "scorer.json", cfg, dir / "art" / "locator.json");
  cmd_detect(dir / "val", dir / "art" / "scorer.json", dir / "art" / "locator.json", dir / "det");
  EXPECT_TRUE(std::filesystem::exists(dir / "det" / "curves" / "val_000.csv"));
  const auto text = cmd_report(dir / "det", dir / "val");
  EXPECT_NE(text.find("frame_auc: "), std::string::npos);
  EXPECT_NE(text.find("frame_f1: "), std::string::npos);
  const auto plain = cmd_report(dir / "det", std::nullopt);
  EXPECT_EQ(plain.find("frame_auc"), std::string::npos);
  EXPECT_EQ(locator_from_json(read_file(dir / "art" / "locator.json")).validation_split, "val");
}

TEST(Evaluate, PerfectCurve) {
  LocatorConfig cfg;
  cfg.sigma_g = 0.5;
  const auto c = locate("v", {0.0, 0.0, 1.0, 1.0, 0.0, 0.0}, cfg, 2);
  const auto r = evaluate({c}, std::vector<std::vector<Interval>>{{{4, 8}}});
  EXPECT_EQ(*r.auc, 1.0);
  EXPECT_EQ(*r.ap, 1.0);
  EXPECT_EQ(r.f1->f1, 1.0);
}
