#pragma once

// Text artifacts exchanged between pipeline stages: saliency.json,
// experts.json, scorer.json, locator.json, events.json, curves/<video>.csv
// and the pipeline configuration file. Writers are deterministic: identical
// inputs give byte-identical files.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "headhunt/locator.hpp"
#include "headhunt/rhi.hpp"
#include "headhunt/saliency.hpp"
#include "headhunt/scorer.hpp"

namespace headhunt {

struct PipelineConfig {
  double lambda = kDefaultLambda;
  int top_k = kDefaultTopK;
  std::optional<double> bandwidth;  // empty: median heuristic
  double shrinkage = 0.1;
  double jitter = 1e-6;
  double l2 = 1e-4;
  double tolerance = 1e-6;
  int max_iter = 100;
  std::optional<std::string> train_prompt;  // empty: all prompts
  LocatorGrid grid = LocatorGrid::default_grid();
  std::uint64_t seed = 0;
  int workers = 1;

  SaliencyOptions saliency_options() const;
  TrainOptions train_options() const;
  void validate() const;
};

std::string config_to_json(const PipelineConfig& config);
// Keys absent from `text` keep their value from `base`.
PipelineConfig config_from_json(const std::string& text, const PipelineConfig& base = {});

std::string read_file(const std::filesystem::path& path);
// Writes via a temporary sibling and rename.
void write_file(const std::filesystem::path& path, const std::string& contents);

std::string saliency_to_json(const SaliencyTable& table);
SaliencyTable saliency_from_json(const std::string& text);

std::string experts_to_json(const ExpertHeadSet& experts);
// Recomputes and checks the manifest hash.
ExpertHeadSet experts_from_json(const std::string& text);

std::string scorer_to_json(const ScorerModel& model);
ScorerModel scorer_from_json(const std::string& text);

std::string locator_to_json(const LocatorConfig& config);
LocatorConfig locator_from_json(const std::string& text);

std::string curve_to_csv(const AnomalyCurve& curve);
// Reads p, p_smoothed and y_hat back; events are regrouped from y_hat.
AnomalyCurve curve_from_csv(const std::string& video_id, const std::string& text, int segment_frames);

std::string events_to_json(const std::vector<AnomalyCurve>& curves, const std::string& expert_hash,
                           const LocatorConfig& locator);

struct EventsFile {
  std::string expert_manifest_hash;
  double sigma_g = 0.0;
  double tau = 0.0;
  struct Video {
    std::string video_id;
    int segment_frames = kDefaultSegmentFrames;
    int n_segments = 0;
    std::vector<SegmentEvent> events;
  };
  std::vector<Video> videos;
};
EventsFile events_from_json(const std::string& text);

// Shortest round-trip decimal rendering.
std::string format_double(double v);

}  // namespace headhunt
