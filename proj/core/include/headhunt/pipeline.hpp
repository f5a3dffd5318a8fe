#pragma once

// Pipeline stages. Each stage has an in-memory form operating on banks and
// artifacts, and a cmd_* form that reads and writes the artifact files.
//
//   gen -> hunt -> train-scorer -> calibrate -> detect -> report

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "headhunt/artifacts.hpp"
#include "headhunt/headbank.hpp"
#include "headhunt/locator.hpp"
#include "headhunt/rhi.hpp"
#include "headhunt/saliency.hpp"
#include "headhunt/scorer.hpp"
#include "headhunt/synthlab.hpp"

namespace headhunt {

struct HuntResult {
  SaliencyTable saliency;
  RobustnessProfile profile;
  ExpertHeadSet experts;
};

HuntResult hunt(const HeadBank& bank, const PipelineConfig& config);
ScorerModel train_scorer(const HeadBank& bank, const ExpertHeadSet& experts, const PipelineConfig& config);

// Raw per-segment probabilities for every video of a segment bank. Refuses a
// bank whose expert manifest hash differs from the scorer's.
std::vector<ValidationVideo> score_segment_bank(const HeadBank& bank, const ScorerModel& scorer);

// Needs ground truth on every video of the bank.
LocatorConfig calibrate_locator(const HeadBank& bank, const ScorerModel& scorer,
                                const PipelineConfig& config, const std::string& split_id);

std::vector<AnomalyCurve> detect(const HeadBank& bank, const ScorerModel& scorer,
                                 const LocatorConfig& locator);

struct Report {
  std::size_t n_videos = 0;
  std::size_t n_events = 0;
  std::int64_t n_frames = 0;
  std::optional<double> auc;  // frame-level, on smoothed probabilities
  std::optional<double> ap;
  std::optional<F1Result> f1;  // frame-level, on y_hat
};

// Metrics are filled only when `truth` is given; truth[i] belongs to curves[i].
Report evaluate(const std::vector<AnomalyCurve>& curves,
                const std::optional<std::vector<std::vector<Interval>>>& truth);
std::string report_to_text(const Report& report);

// File-level commands. Paths name directories for banks and --out targets.
void cmd_gen(const PlantSpec& spec, const std::optional<std::filesystem::path>& experts_path,
             const std::filesystem::path& out);
void cmd_hunt(const std::filesystem::path& bank_dir, const PipelineConfig& config,
              const std::filesystem::path& out_dir);
void cmd_train_scorer(const std::filesystem::path& bank_dir, const std::filesystem::path& experts_path,
                      const PipelineConfig& config, const std::filesystem::path& out);
void cmd_calibrate(const std::filesystem::path& segment_bank_dir,
                   const std::filesystem::path& scorer_path, const PipelineConfig& config,
                   const std::filesystem::path& out);
void cmd_detect(const std::filesystem::path& segment_bank_dir, const std::filesystem::path& scorer_path,
                const std::filesystem::path& locator_path, const std::filesystem::path& out_dir);
// Reads events.json and curves/ from `detect_dir`; ground truth comes from
// the manifest of `bank_dir` when given. Returns the summary text.
std::string cmd_report(const std::filesystem::path& detect_dir,
                       const std::optional<std::filesystem::path>& bank_dir);

}  // namespace headhunt
