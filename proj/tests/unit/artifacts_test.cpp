#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "headhunt/artifacts.hpp"
#include "headhunt/error.hpp"

using namespace headhunt;

namespace {

ExpertHeadSet sample_experts() {
  const ModelSpec model{"m", 2, 3, 4};
  const auto profile = robustness_profile({{0.1, 0.9, 0.4, 0.3, 0.2, 0.8}, {0.2, 0.7, 0.5, 0.3, 0.1, 0.6}}, 0.5);
  auto e = select_experts(profile, model, 3);
  e.prompt_ids = {"p0", "p1"};
  return e;
}

}  // namespace

TEST(Config, DefaultsAndRoundTrip) {
  PipelineConfig c;
  EXPECT_EQ(c.lambda, 0.5);
  EXPECT_EQ(c.top_k, 5);
  EXPECT_FALSE(c.bandwidth.has_value());
  c.bandwidth = 2.5;
  c.train_prompt = "p3";
  c.grid.sigmas = {1.0, 2.0};
  c.seed = 99;
  const auto text = config_to_json(c);
  EXPECT_EQ(config_to_json(config_from_json(text)), text);
}

TEST(Config, PartialFileKeepsBaseValues) {
  PipelineConfig base;
  base.top_k = 7;
  const auto c = config_from_json(R"({"lambda": 0.25})", base);
  EXPECT_EQ(c.lambda, 0.25);
  EXPECT_EQ(c.top_k, 7);
  EXPECT_THROW(config_from_json(R"({"lambda": -1})"), ValidationError);
  EXPECT_THROW(config_from_json("{not json"), ValidationError);
}

TEST(Experts, RoundTripAndTamperDetection) {
  const auto e = sample_experts();
  const auto text = experts_to_json(e);
  const auto back = experts_from_json(text);
  EXPECT_EQ(back.heads, e.heads);
  EXPECT_EQ(back.manifest_hash, e.manifest_hash);
  EXPECT_EQ(back.details[0].prompt_scores, e.details[0].prompt_scores);
  EXPECT_EQ(experts_to_json(back), text);

  auto tampered = text;
  const auto pos = tampered.find("\"layer\": 1");
  ASSERT_NE(pos, std::string::npos);
  tampered.replace(pos, 10, "\"layer\": 0");
  EXPECT_THROW(experts_from_json(tampered), ValidationError);

  auto relabelled = text;
  const auto lpos = relabelled.find("\"lambda\": 0.5");
  ASSERT_NE(lpos, std::string::npos);
  relabelled.replace(lpos, 13, "\"lambda\": 0.25");
  EXPECT_THROW(experts_from_json(relabelled), ValidationError);
}

TEST(Scorer, RoundTripIsExact) {
  ScorerModel m;
  m.weights = Eigen::Vector3d(0.1, -1.0 / 3.0, 2e-17);
  m.bias = -0.7;
  m.l2 = 1e-4;
  m.standardization.mean = Eigen::Vector3d(1.0, 2.0, 3.0);
  m.standardization.scale = Eigen::Vector3d(0.5, 1.0, 7.0 / 3.0);
  m.expert_manifest_hash = "abc";
  m.training_meta.iterations = 4;
  m.training_meta.converged = true;
  m.training_meta.loss_history = {0.69, 0.2};
  const auto back = scorer_from_json(scorer_to_json(m));
  EXPECT_EQ(back.weights, m.weights);
  EXPECT_EQ(back.standardization.scale, m.standardization.scale);
  EXPECT_EQ(scorer_to_json(back), scorer_to_json(m));
}

TEST(Locator, RoundTrip) {
  LocatorConfig c;
  c.sigma_g = 0.75;
  c.tau = 0.6000000000000001;
  c.grid = {{0.75}, {0.6000000000000001}};
  c.f1_surface = {{0.5}};
  c.best_f1 = 0.5;
  c.validation_split = "val";
  const auto back = locator_from_json(locator_to_json(c));
  EXPECT_EQ(back.tau, c.tau);
  EXPECT_EQ(locator_to_json(back), locator_to_json(c));
  EXPECT_THROW(locator_from_json(R"({"sigma_g": 1.0, "tau": 1.5})"), ValidationError);
}

TEST(Curves, CsvRoundTripAndEvents) {
  LocatorConfig cfg;
  const auto c = locate("v", {0.1, 0.95, 0.99, 0.97, 0.05, 0.1}, cfg, 48);
  const auto csv = curve_to_csv(c);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "segment_index,p,p_smoothed,y_hat");
  const auto back = curve_from_csv("v", csv, 48);
  EXPECT_EQ(back.p, c.p);
  EXPECT_EQ(back.p_smoothed, c.p_smoothed);
  EXPECT_EQ(back.events, c.events);

  const auto events = events_from_json(events_to_json({c}, "hash", cfg));
  ASSERT_EQ(events.videos.size(), 1u);
  EXPECT_EQ(events.videos[0].events, c.events);
  EXPECT_EQ(events.videos[0].n_segments, 6);
  EXPECT_THROW(curve_from_csv("v", "bad header\n", 48), ValidationError);
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1.0), "1");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(WriteFile, ReplacesAtomically) {
  fixture::TempDir dir("write");
  write_file(dir / "sub" / "x.txt", "one");
  write_file(dir / "sub" / "x.txt", "two");
  EXPECT_EQ(read_file(dir / "sub" / "x.txt"), "two");
  EXPECT_FALSE(std::filesystem::exists(dir / "sub" / "x.txt.tmp"));
}
