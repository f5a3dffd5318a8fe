#pragma once

// Synthetic head banks with planted structure.
//
// Every head draws its features from N(offset, noise_scale^2 I). Normal
// samples always use offset 0. Abnormal samples are offset on `signal_dims`
// coordinates of the head (a fixed, seeded choice of coordinates and signs;
// 0 means all coordinates), each coordinate moving by
//   * mean_shift * noise_scale    for stable heads, under every prompt;
//   * decoy_shift * noise_scale   for decoy heads, under their one active
//                                 prompt only (decoy i is active in prompt
//                                 i mod n_prompts);
//   * 0                            for every other head.
// All randomness is derived from `seed` and the item coordinates, so banks are
// bit-identical for identical specs.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "headhunt/headbank.hpp"
#include "headhunt/rhi.hpp"

namespace headhunt {

struct SegmentSplitSpec {
  int n_videos = 20;
  int n_segments = 50;
  int n_abnormal = 10;  // videos carrying one anomaly window
  int window_min = 8;   // segments
  int window_max = 14;
};

struct PlantSpec {
  std::string model_name = "synthetic";
  int n_layers = 32;
  int n_heads_per_layer = 16;
  int head_dim = 32;
  std::vector<int> stable_heads;
  double mean_shift = 1.5;
  std::vector<int> decoy_heads;
  double decoy_shift = 6.0;
  int signal_dims = 4;
  double noise_scale = 1.0;
  int n_normal = 20;
  int n_abnormal = 20;
  int n_prompts = 5;
  int segment_frames = kDefaultSegmentFrames;
  std::uint64_t seed = 0;
  SegmentSplitSpec split;

  ModelSpec model() const;
  void validate() const;

  // 32 x 16 heads, d_h = 32, 20 + 20 videos, 5 prompts, 5 stable heads at
  // shift 1.5 and 5 single-prompt decoys, head positions drawn from `seed`.
  static PlantSpec recovery_default(std::uint64_t seed);
};

std::string plant_spec_to_json(const PlantSpec& spec);
PlantSpec plant_spec_from_json(const std::string& text);

// Offset pattern of head k: +-1 on its signal coordinates, 0 elsewhere.
std::vector<double> plant_direction(const PlantSpec& spec, int global_index);

// Prompt index in which a head is discriminative, or -1 for all prompts
// (stable), or -2 for none.
int active_prompt(const PlantSpec& spec, int global_index);

BankManifest calibration_manifest(const PlantSpec& spec);
CalibrationFeatureRecord synthesize_record(const PlantSpec& spec, std::size_t video_index,
                                           std::size_t prompt_index);

// In-memory calibration bank (no disk I/O).
HeadBank synthesize_calibration_bank(const PlantSpec& spec);

// Writes the calibration bank plus `plant_spec.json` to `dest`.
HeadBank generate_calibration_bank(const PlantSpec& spec, const std::filesystem::path& dest);

struct SyntheticVideo {
  std::string id;
  int n_segments = 0;
  std::vector<Interval> windows;  // segment ranges, closed-open
};

// Anomaly windows for spec.split: the first n_abnormal videos get one window
// each, placed uniformly at random.
std::vector<SyntheticVideo> default_segment_videos(const PlantSpec& spec);

// Segment bank for the given videos: segments inside a window draw the
// expert-head features from the abnormal distribution of prompt 0, the rest
// from the normal one. Ground truth (in frames) rides in the manifest.
HeadBank synthesize_segment_bank(const PlantSpec& spec, const ExpertHeadSet& experts,
                                 const std::vector<SyntheticVideo>& videos);
HeadBank generate_segment_split(const PlantSpec& spec, const ExpertHeadSet& experts,
                                const std::vector<SyntheticVideo>& videos,
                                const std::filesystem::path& dest);

}  // namespace headhunt
