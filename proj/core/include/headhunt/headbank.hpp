#pragma once

// Data model and on-disk layout for per-head feature banks.
//
// A bank is a directory:
//
//   manifest.json                      model, prompts, videos (+ ground truth)
//   features/<video_id>/<prompt_id>.f32   [N_total x d_h] float32, LE, row-major
//   segments/<video_id>.f32            [T x (K*d_h)] float32, LE, row-major
//   segments/<video_id>.meta.json      {"expert_manifest_hash", "n_experts"}
//
// Calibration banks carry `features/`, expert (online) banks carry
// `segments/`. When a section is present it must be total over the manifest.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace headhunt {

inline constexpr int kBankSchemaVersion = 1;
inline constexpr int kDefaultSegmentFrames = 48;

struct ModelSpec {
  std::string name;
  int n_layers = 0;
  int n_heads_per_layer = 0;
  int head_dim = 0;

  int total_heads() const noexcept { return n_layers * n_heads_per_layer; }
  void validate() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct HeadAddress {
  int layer = 0;
  int head = 0;
  int global_index = 0;

  static HeadAddress from_global(const ModelSpec& spec, int global_index);
  static HeadAddress from_layer_head(const ModelSpec& spec, int layer, int head);

  friend bool operator==(const HeadAddress&, const HeadAddress&) = default;
};

struct PromptRecord {
  std::string id;
  std::string text;

  friend bool operator==(const PromptRecord&, const PromptRecord&) = default;
};

// Closed-open interval [start, end).
struct Interval {
  std::int64_t start = 0;
  std::int64_t end = 0;

  std::int64_t length() const noexcept { return end - start; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct VideoRecord {
  std::string id;
  int label = 0;  // 0 normal, 1 abnormal
  int n_segments = 1;
  int segment_frames = kDefaultSegmentFrames;
  // Frame intervals; present only for videos in a validation split.
  std::optional<std::vector<Interval>> gt_intervals;

  std::int64_t total_frames() const noexcept {
    return static_cast<std::int64_t>(n_segments) * segment_frames;
  }

  friend bool operator==(const VideoRecord&, const VideoRecord&) = default;
};

// First-token features of every head for one (video, prompt) pass.
struct CalibrationFeatureRecord {
  std::string video_id;
  std::string prompt_id;
  std::vector<float> features;  // row k = head with global_index k
};

// Concatenated expert-head features, one row per segment.
struct SegmentFeatureSequence {
  std::string video_id;
  std::string expert_manifest_hash;
  int n_experts = 0;
  int n_segments = 0;
  int width = 0;  // n_experts * head_dim
  std::vector<float> features;

  std::span<const float> segment(int t) const;
};

struct BankManifest {
  int schema_version = kBankSchemaVersion;
  ModelSpec model;
  std::vector<PromptRecord> prompts;
  std::vector<VideoRecord> videos;

  const VideoRecord& video(std::string_view id) const;
  const PromptRecord& prompt(std::string_view id) const;
  bool has_video(std::string_view id) const;
  bool has_prompt(std::string_view id) const;
  void validate() const;

  friend bool operator==(const BankManifest&, const BankManifest&) = default;
};

bool is_valid_identifier(std::string_view id) noexcept;

// Row k of a calibration record.
std::span<const float> slice_head(const CalibrationFeatureRecord& record,
                                  const ModelSpec& spec, int global_index);

std::string manifest_to_json(const BankManifest& manifest);
BankManifest manifest_from_json(std::string_view text);

// Raw float32 little-endian tensor files.
void write_f32_file(const std::filesystem::path& path, std::span<const float> values);
std::vector<float> read_f32_file(const std::filesystem::path& path,
                                 std::size_t expected_count);

// Single-writer bank builder. Files go to a sibling temporary directory which
// replaces `dest` on commit(); an uncommitted writer removes it on
// destruction.
class BankWriter {
 public:
  BankWriter(BankManifest manifest, std::filesystem::path dest);
  ~BankWriter();
  BankWriter(const BankWriter&) = delete;
  BankWriter& operator=(const BankWriter&) = delete;

  void add(const CalibrationFeatureRecord& record);
  void add(const SegmentFeatureSequence& sequence);
  void commit();

 private:
  BankManifest manifest_;
  std::filesystem::path dest_;
  std::filesystem::path staging_;
  std::map<std::pair<std::string, std::string>, bool> written_features_;
  std::map<std::string, bool> written_segments_;
  bool committed_ = false;
};

class HeadBank;

// Writes a complete calibration (and optionally segment) bank.
HeadBank write_bank(const BankManifest& manifest,
                    std::span<const CalibrationFeatureRecord> records,
                    const std::filesystem::path& dest,
                    std::span<const SegmentFeatureSequence> segments = {});

// Read access to a bank. Records are loaded on demand from disk, or served
// from memory for banks built with in_memory(). Immutable once constructed,
// safe to share across threads.
class HeadBank {
 public:
  static HeadBank open(const std::filesystem::path& root);
  static HeadBank in_memory(BankManifest manifest,
                            std::vector<CalibrationFeatureRecord> records,
                            std::vector<SegmentFeatureSequence> segments = {});

  const BankManifest& manifest() const noexcept { return *manifest_; }
  const ModelSpec& model() const noexcept { return manifest_->model; }
  const std::optional<std::filesystem::path>& root() const noexcept { return root_; }

  bool has_features() const noexcept { return has_features_; }
  bool has_segments() const noexcept { return has_segments_; }

  CalibrationFeatureRecord record(std::string_view video_id,
                                  std::string_view prompt_id) const;
  // All records under one prompt, in manifest video order.
  std::vector<CalibrationFeatureRecord> records_for_prompt(std::string_view prompt_id) const;
  SegmentFeatureSequence segments(std::string_view video_id) const;

  std::vector<const VideoRecord*> videos_with_label(int label) const;

 private:
  HeadBank() = default;

  std::shared_ptr<const BankManifest> manifest_;
  std::optional<std::filesystem::path> root_;
  std::shared_ptr<const std::map<std::pair<std::string, std::string>, CalibrationFeatureRecord>>
      memory_records_;
  std::shared_ptr<const std::map<std::string, SegmentFeatureSequence>> memory_segments_;
  bool has_features_ = false;
  bool has_segments_ = false;
};

HeadBank read_bank(const std::filesystem::path& root);

}  // namespace headhunt
