#include "headhunt/headbank.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "headhunt/error.hpp"
#include <nlohmann/json.hpp>

namespace headhunt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw ValidationError("short write to " + path.string());
}

void require_identifier(std::string_view id, std::string_view what) {
  if (!is_valid_identifier(id)) {
    throw ValidationError(std::string(what) + " identifier '" + std::string(id) +
                          "' must match [A-Za-z0-9_-]{1,64}");
  }
}

void require_finite(std::span<const float> values, std::string_view context) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw ValidationError("non-finite value at offset " + std::to_string(i) + " in " +
                            std::string(context));
    }
  }
}

fs::path feature_path(const fs::path& root, std::string_view video, std::string_view prompt) {
  return root / "features" / std::string(video) / (std::string(prompt) + ".f32");
}

fs::path segment_path(const fs::path& root, std::string_view video) {
  return root / "segments" / (std::string(video) + ".f32");
}

fs::path segment_meta_path(const fs::path& root, std::string_view video) {
  return root / "segments" / (std::string(video) + ".meta.json");
}

std::size_t feature_count(const ModelSpec& spec) {
  return static_cast<std::size_t>(spec.total_heads()) * static_cast<std::size_t>(spec.head_dim);
}

struct SegmentMeta {
  std::string hash;
  int n_experts = 0;
};

SegmentMeta read_segment_meta(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
    return SegmentMeta{j.at("expert_manifest_hash").get<std::string>(),
                       j.at("n_experts").get<int>()};
  } catch (const json::exception& e) {
    throw ValidationError("malformed segment metadata " + path.string() + ": " + e.what());
  }
}

}  // namespace

bool is_valid_identifier(std::string_view id) noexcept {
  if (id.empty() || id.size() > 64) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '-';
  });
}

void ModelSpec::validate() const {
  if (n_layers < 1 || n_heads_per_layer < 1 || head_dim < 1) {
    throw ValidationError("model spec requires positive n_layers, n_heads_per_layer, head_dim");
  }
}

HeadAddress HeadAddress::from_global(const ModelSpec& spec, int global_index) {
  if (global_index < 0 || global_index >= spec.total_heads()) {
    throw ValidationError("head index " + std::to_string(global_index) + " outside [0, " +
                          std::to_string(spec.total_heads()) + ")");
  }
  return {global_index / spec.n_heads_per_layer, global_index % spec.n_heads_per_layer,
          global_index};
}

HeadAddress HeadAddress::from_layer_head(const ModelSpec& spec, int layer, int head) {
  if (layer < 0 || layer >= spec.n_layers || head < 0 || head >= spec.n_heads_per_layer) {
    throw ValidationError("head (" + std::to_string(layer) + ", " + std::to_string(head) +
                          ") outside the model grid");
  }
  return {layer, head, layer * spec.n_heads_per_layer + head};
}

std::span<const float> SegmentFeatureSequence::segment(int t) const {
  if (t < 0 || t >= n_segments) {
    throw ValidationError("segment " + std::to_string(t) + " out of range for video " + video_id);
  }
  return std::span<const float>(features).subspan(static_cast<std::size_t>(t) * width, width);
}

const VideoRecord& BankManifest::video(std::string_view id) const {
  for (const auto& v : videos)
    if (v.id == id) return v;
  throw ValidationError("unknown video id '" + std::string(id) + "'");
}

const PromptRecord& BankManifest::prompt(std::string_view id) const {
  for (const auto& p : prompts)
    if (p.id == id) return p;
  throw ValidationError("unknown prompt id '" + std::string(id) + "'");
}

bool BankManifest::has_video(std::string_view id) const {
  return std::any_of(videos.begin(), videos.end(), [&](const auto& v) { return v.id == id; });
}

bool BankManifest::has_prompt(std::string_view id) const {
  return std::any_of(prompts.begin(), prompts.end(), [&](const auto& p) { return p.id == id; });
}

void BankManifest::validate() const {
  if (schema_version != kBankSchemaVersion) {
    throw ValidationError("unsupported bank schema_version " + std::to_string(schema_version));
  }
  model.validate();
  if (prompts.empty()) throw ValidationError("bank declares no prompts");
  std::set<std::string> seen;
  for (const auto& p : prompts) {
    require_identifier(p.id, "prompt");
    if (!seen.insert(p.id).second) throw ValidationError("duplicate prompt id '" + p.id + "'");
  }
  seen.clear();
  for (const auto& v : videos) {
    require_identifier(v.id, "video");
    if (!seen.insert(v.id).second) throw ValidationError("duplicate video id '" + v.id + "'");
    if (v.label != 0 && v.label != 1) {
      throw ValidationError("video '" + v.id + "' has non-binary label");
    }
    if (v.n_segments < 1 || v.segment_frames < 1) {
      throw ValidationError("video '" + v.id + "' needs n_segments >= 1 and segment_frames >= 1");
    }
    if (v.gt_intervals) {
      std::int64_t prev_end = 0;
      for (const auto& iv : *v.gt_intervals) {
        if (iv.start < prev_end || iv.end <= iv.start || iv.end > v.total_frames()) {
          throw ValidationError("video '" + v.id +
                                "' has unsorted, overlapping, empty or out-of-range intervals");
        }
        prev_end = iv.end;
      }
      if ((v.label == 1) != !v.gt_intervals->empty()) {
        throw ValidationError("video '" + v.id +
                              "': label must be 1 exactly when ground truth is non-empty");
      }
    }
  }
}

std::span<const float> slice_head(const CalibrationFeatureRecord& record, const ModelSpec& spec,
                                  int global_index) {
  if (global_index < 0 || global_index >= spec.total_heads()) {
    throw ValidationError("head index " + std::to_string(global_index) + " outside [0, " +
                          std::to_string(spec.total_heads()) + ")");
  }
  if (record.features.size() != feature_count(spec)) {
    throw ValidationError("record (" + record.video_id + ", " + record.prompt_id +
                          ") does not match the model shape");
  }
  const auto d = static_cast<std::size_t>(spec.head_dim);
  return std::span<const float>(record.features).subspan(static_cast<std::size_t>(global_index) * d, d);
}

std::string manifest_to_json(const BankManifest& m) {
  json j;
  j["schema_version"] = m.schema_version;
  j["model"] = {{"name", m.model.name},
                {"n_layers", m.model.n_layers},
                {"n_heads_per_layer", m.model.n_heads_per_layer},
                {"head_dim", m.model.head_dim}};
  j["prompts"] = json::array();
  for (const auto& p : m.prompts) j["prompts"].push_back({{"id", p.id}, {"text", p.text}});
  j["videos"] = json::array();
  for (const auto& v : m.videos) {
    json jv = {{"id", v.id},
               {"label", v.label},
               {"n_segments", v.n_segments},
               {"segment_frames", v.segment_frames}};
    if (v.gt_intervals) {
      jv["gt_intervals"] = json::array();
      for (const auto& iv : *v.gt_intervals) jv["gt_intervals"].push_back({iv.start, iv.end});
    }
    j["videos"].push_back(std::move(jv));
  }
  return j.dump(2) + "\n";
}

BankManifest manifest_from_json(std::string_view text) {
  BankManifest m;
  try {
    const json j = json::parse(text);
    m.schema_version = j.at("schema_version").get<int>();
    if (m.schema_version != kBankSchemaVersion) {
      throw ValidationError("unsupported bank schema_version " + std::to_string(m.schema_version));
    }
    const auto& jm = j.at("model");
    m.model = {jm.at("name").get<std::string>(), jm.at("n_layers").get<int>(),
               jm.at("n_heads_per_layer").get<int>(), jm.at("head_dim").get<int>()};
    for (const auto& jp : j.at("prompts")) {
      m.prompts.push_back({jp.at("id").get<std::string>(), jp.value("text", std::string{})});
    }
    for (const auto& jv : j.at("videos")) {
      VideoRecord v;
      v.id = jv.at("id").get<std::string>();
      v.label = jv.at("label").get<int>();
      v.n_segments = jv.at("n_segments").get<int>();
      v.segment_frames = jv.value("segment_frames", kDefaultSegmentFrames);
      if (jv.contains("gt_intervals")) {
        std::vector<Interval> intervals;
        for (const auto& iv : jv.at("gt_intervals")) {
          if (!iv.is_array() || iv.size() != 2) {
            throw ValidationError("gt interval of video '" + v.id + "' must be [start, end]");
          }
          intervals.push_back({iv[0].get<std::int64_t>(), iv[1].get<std::int64_t>()});
        }
        v.gt_intervals = std::move(intervals);
      }
      m.videos.push_back(std::move(v));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed manifest: ") + e.what());
  }
  m.validate();
  return m;
}

void write_f32_file(const fs::path& path, std::span<const float> values) {
  std::vector<unsigned char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    bytes[4 * i + 0] = static_cast<unsigned char>(bits & 0xffu);
    bytes[4 * i + 1] = static_cast<unsigned char>((bits >> 8) & 0xffu);
    bytes[4 * i + 2] = static_cast<unsigned char>((bits >> 16) & 0xffu);
    bytes[4 * i + 3] = static_cast<unsigned char>((bits >> 24) & 0xffu);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ValidationError("short write to " + path.string());
}

std::vector<float> read_f32_file(const fs::path& path, std::size_t expected_count) {
  std::error_code ec;
  const auto size = fs::file_size(path, ec);
  if (ec) throw ValidationError("missing tensor file " + path.string());
  if (size != expected_count * 4) {
    throw ValidationError("size mismatch for " + path.string() + ": expected " +
                          std::to_string(expected_count * 4) + " bytes, found " +
                          std::to_string(size));
  }
  std::vector<unsigned char> bytes(size);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (static_cast<std::size_t>(in.gcount()) != size) {
    throw ValidationError("truncated tensor file " + path.string());
  }
  std::vector<float> values(expected_count);
  for (std::size_t i = 0; i < expected_count; ++i) {
    const std::uint32_t bits = static_cast<std::uint32_t>(bytes[4 * i]) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
    values[i] = std::bit_cast<float>(bits);
  }
  return values;
}

// ---------------------------------------------------------------------------
// BankWriter

BankWriter::BankWriter(BankManifest manifest, fs::path dest)
    : manifest_(std::move(manifest)), dest_(std::move(dest)) {
  manifest_.validate();
  const auto parent = dest_.has_parent_path() ? dest_.parent_path() : fs::path(".");
  fs::create_directories(parent);
  staging_ = parent / (dest_.filename().string() + ".staging");
  fs::remove_all(staging_);
  fs::create_directories(staging_);
}

BankWriter::~BankWriter() {
  if (!committed_) {
    std::error_code ec;
    fs::remove_all(staging_, ec);
  }
}

void BankWriter::add(const CalibrationFeatureRecord& record) {
  const std::string where = "record (video " + record.video_id + ", prompt " + record.prompt_id + ")";
  if (!manifest_.has_video(record.video_id)) {
    throw ValidationError(where + ": unknown video id '" + record.video_id + "'");
  }
  if (!manifest_.has_prompt(record.prompt_id)) {
    throw ValidationError(where + ": unknown prompt id '" + record.prompt_id + "'");
  }
  if (record.features.size() != feature_count(manifest_.model)) {
    throw ValidationError(where + ": expected " + std::to_string(feature_count(manifest_.model)) +
                          " values, got " + std::to_string(record.features.size()));
  }
  require_finite(record.features, where);
  auto key = std::make_pair(record.video_id, record.prompt_id);
  if (written_features_.contains(key)) throw ValidationError(where + ": written twice");
  const auto path = feature_path(staging_, record.video_id, record.prompt_id);
  fs::create_directories(path.parent_path());
  write_f32_file(path, record.features);
  written_features_[key] = true;
}

void BankWriter::add(const SegmentFeatureSequence& seq) {
  const std::string where = "segment sequence (video " + seq.video_id + ")";
  if (!manifest_.has_video(seq.video_id)) {
    throw ValidationError(where + ": unknown video id '" + seq.video_id + "'");
  }
  const auto& video = manifest_.video(seq.video_id);
  if (seq.n_segments != video.n_segments) {
    throw ValidationError(where + ": has " + std::to_string(seq.n_segments) +
                          " segments, manifest declares " + std::to_string(video.n_segments));
  }
  if (seq.n_experts < 1 || seq.width != seq.n_experts * manifest_.model.head_dim ||
      seq.features.size() != static_cast<std::size_t>(seq.n_segments) * seq.width) {
    throw ValidationError(where + ": shape does not match n_experts x head_dim");
  }
  if (seq.expert_manifest_hash.empty()) throw ValidationError(where + ": missing expert hash");
  require_finite(seq.features, where);
  if (written_segments_.contains(seq.video_id)) throw ValidationError(where + ": written twice");
  fs::create_directories(staging_ / "segments");
  write_f32_file(segment_path(staging_, seq.video_id), seq.features);
  json meta = {{"expert_manifest_hash", seq.expert_manifest_hash}, {"n_experts", seq.n_experts}};
  write_text(segment_meta_path(staging_, seq.video_id), meta.dump(2) + "\n");
  written_segments_[seq.video_id] = true;
}

void BankWriter::commit() {
  if (committed_) return;
  if (written_features_.empty() && written_segments_.empty()) {
    throw ValidationError("bank has neither feature records nor segment sequences");
  }
  if (!written_features_.empty()) {
    for (const auto& v : manifest_.videos) {
      for (const auto& p : manifest_.prompts) {
        if (!written_features_.contains({v.id, p.id})) {
          throw ValidationError("missing record for (video " + v.id + ", prompt " + p.id + ")");
        }
      }
    }
  }
  if (!written_segments_.empty()) {
    for (const auto& v : manifest_.videos) {
      if (!written_segments_.contains(v.id)) {
        throw ValidationError("missing segment sequence for video " + v.id);
      }
    }
  }
  write_text(staging_ / "manifest.json", manifest_to_json(manifest_));
  fs::remove_all(dest_);
  fs::rename(staging_, dest_);
  committed_ = true;
}

HeadBank write_bank(const BankManifest& manifest,
                    std::span<const CalibrationFeatureRecord> records, const fs::path& dest,
                    std::span<const SegmentFeatureSequence> segments) {
  BankWriter writer(manifest, dest);
  for (const auto& r : records) writer.add(r);
  for (const auto& s : segments) writer.add(s);
  writer.commit();
  return HeadBank::open(dest);
}

// ---------------------------------------------------------------------------
// HeadBank

HeadBank HeadBank::open(const fs::path& root) {
  HeadBank bank;
  bank.root_ = root;
  bank.manifest_ = std::make_shared<const BankManifest>(manifest_from_json(read_text(root / "manifest.json")));
  const auto& m = *bank.manifest_;

  const auto features_dir = root / "features";
  if (fs::is_directory(features_dir)) {
    bank.has_features_ = true;
    const auto expected = feature_count(m.model) * 4;
    for (const auto& v : m.videos) {
      for (const auto& p : m.prompts) {
        const auto path = feature_path(root, v.id, p.id);
        std::error_code ec;
        const auto size = fs::file_size(path, ec);
        if (ec) throw ValidationError("manifest declares missing tensor file " + path.string());
        if (size != expected) {
          throw ValidationError("size mismatch for " + path.string() + ": expected " +
                                std::to_string(expected) + " bytes, found " + std::to_string(size));
        }
      }
    }
    for (const auto& entry : fs::recursive_directory_iterator(features_dir)) {
      if (!entry.is_regular_file()) continue;
      const auto rel = fs::relative(entry.path(), features_dir);
      const auto video = rel.begin()->string();
      const auto prompt = entry.path().stem().string();
      if (std::distance(rel.begin(), rel.end()) != 2 || entry.path().extension() != ".f32" ||
          !m.has_video(video) || !m.has_prompt(prompt)) {
        throw ValidationError("tensor file not declared in manifest: " + entry.path().string());
      }
    }
  }

  const auto segments_dir = root / "segments";
  if (fs::is_directory(segments_dir)) {
    bank.has_segments_ = true;
    for (const auto& v : m.videos) {
      const auto meta = read_segment_meta(segment_meta_path(root, v.id));
      if (meta.n_experts < 1) throw ValidationError("segment metadata for " + v.id + " has n_experts < 1");
      const auto expected = static_cast<std::uintmax_t>(v.n_segments) * meta.n_experts *
                            m.model.head_dim * 4;
      std::error_code ec;
      const auto path = segment_path(root, v.id);
      const auto size = fs::file_size(path, ec);
      if (ec) throw ValidationError("manifest declares missing segment file " + path.string());
      if (size != expected) {
        throw ValidationError("size mismatch for " + path.string() + ": expected " +
                              std::to_string(expected) + " bytes, found " + std::to_string(size));
      }
    }
    for (const auto& entry : fs::directory_iterator(segments_dir)) {
      const auto name = entry.path().filename().string();
      std::string video;
      if (name.ends_with(".meta.json")) {
        video = name.substr(0, name.size() - 10);
      } else if (name.ends_with(".f32")) {
        video = name.substr(0, name.size() - 4);
      }
      if (video.empty() || !m.has_video(video)) {
        throw ValidationError("segment file not declared in manifest: " + entry.path().string());
      }
    }
  }

  if (!bank.has_features_ && !bank.has_segments_) {
    throw ValidationError("bank at " + root.string() + " has neither features/ nor segments/");
  }
  return bank;
}

HeadBank HeadBank::in_memory(BankManifest manifest, std::vector<CalibrationFeatureRecord> records,
                             std::vector<SegmentFeatureSequence> segments) {
  manifest.validate();
  HeadBank bank;
  auto recs = std::make_shared<std::map<std::pair<std::string, std::string>, CalibrationFeatureRecord>>();
  for (auto& r : records) {
    const std::string where = "record (video " + r.video_id + ", prompt " + r.prompt_id + ")";
    if (!manifest.has_video(r.video_id) || !manifest.has_prompt(r.prompt_id)) {
      throw ValidationError(where + ": unknown video or prompt id");
    }
    if (r.features.size() != feature_count(manifest.model)) {
      throw ValidationError(where + ": shape does not match the model");
    }
    require_finite(r.features, where);
    auto key = std::make_pair(r.video_id, r.prompt_id);
    recs->emplace(std::move(key), std::move(r));
  }
  if (!recs->empty() && recs->size() != manifest.videos.size() * manifest.prompts.size()) {
    throw ValidationError("in-memory bank is not total over (video, prompt)");
  }
  auto segs = std::make_shared<std::map<std::string, SegmentFeatureSequence>>();
  for (auto& s : segments) {
    const auto& v = manifest.video(s.video_id);
    if (s.n_segments != v.n_segments ||
        s.features.size() != static_cast<std::size_t>(s.n_segments) * s.width) {
      throw ValidationError("segment sequence for " + s.video_id + " has the wrong shape");
    }
    auto id = s.video_id;
    segs->emplace(std::move(id), std::move(s));
  }
  bank.has_features_ = !recs->empty();
  bank.has_segments_ = !segs->empty();
  bank.memory_records_ = std::move(recs);
  bank.memory_segments_ = std::move(segs);
  bank.manifest_ = std::make_shared<const BankManifest>(std::move(manifest));
  return bank;
}

CalibrationFeatureRecord HeadBank::record(std::string_view video_id,
                                          std::string_view prompt_id) const {
  if (!manifest_->has_video(video_id)) {
    throw ValidationError("unknown video id '" + std::string(video_id) + "'");
  }
  if (!manifest_->has_prompt(prompt_id)) {
    throw ValidationError("unknown prompt id '" + std::string(prompt_id) + "'");
  }
  if (!has_features_) throw ValidationError("bank has no calibration features");
  if (memory_records_) {
    return memory_records_->at({std::string(video_id), std::string(prompt_id)});
  }
  CalibrationFeatureRecord r;
  r.video_id = video_id;
  r.prompt_id = prompt_id;
  r.features = read_f32_file(feature_path(*root_, video_id, prompt_id), feature_count(model()));
  require_finite(r.features, "record (video " + r.video_id + ", prompt " + r.prompt_id + ")");
  return r;
}

std::vector<CalibrationFeatureRecord> HeadBank::records_for_prompt(std::string_view prompt_id) const {
  std::vector<CalibrationFeatureRecord> out;
  out.reserve(manifest_->videos.size());
  for (const auto& v : manifest_->videos) out.push_back(record(v.id, prompt_id));
  return out;
}

SegmentFeatureSequence HeadBank::segments(std::string_view video_id) const {
  const auto& v = manifest_->video(video_id);
  if (!has_segments_) throw ValidationError("bank has no segment sequences");
  if (memory_segments_) return memory_segments_->at(std::string(video_id));
  const auto meta = read_segment_meta(segment_meta_path(*root_, video_id));
  SegmentFeatureSequence s;
  s.video_id = v.id;
  s.expert_manifest_hash = meta.hash;
  s.n_experts = meta.n_experts;
  s.n_segments = v.n_segments;
  s.width = meta.n_experts * model().head_dim;
  s.features = read_f32_file(segment_path(*root_, video_id),
                             static_cast<std::size_t>(s.n_segments) * s.width);
  require_finite(s.features, "segment sequence (video " + s.video_id + ")");
  return s;
}

std::vector<const VideoRecord*> HeadBank::videos_with_label(int label) const {
  std::vector<const VideoRecord*> out;
  for (const auto& v : manifest_->videos)
    if (v.label == label) out.push_back(&v);
  return out;
}

HeadBank read_bank(const fs::path& root) { return HeadBank::open(root); }

}  // namespace headhunt
