#include "headhunt/synthlab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "headhunt/error.hpp"
#include "headhunt/random.hpp"
#include <nlohmann/json.hpp>

namespace headhunt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kDirectionStream = 1;
constexpr std::uint64_t kRecordStream = 2;
constexpr std::uint64_t kSegmentStream = 3;
constexpr std::uint64_t kLayoutStream = 4;
constexpr std::uint64_t kWindowStream = 5;

std::string numbered(const char* prefix, std::size_t i) {
  std::string digits = std::to_string(i);
  if (digits.size() < 3) digits.insert(0, 3 - digits.size(), '0');
  return prefix + digits;
}

std::string prompt_id(std::size_t m) { return "p" + std::to_string(m); }

// Abnormal-class offset of head k under prompt m, in noise units.
double shift_for(const PlantSpec& spec, int k, std::size_t m) {
  const int active = active_prompt(spec, k);
  if (active == -1) return spec.mean_shift;
  if (active >= 0 && static_cast<std::size_t>(active) == m) return spec.decoy_shift;
  return 0.0;
}

void fill_head(const PlantSpec& spec, Rng& rng, double shift, const std::vector<double>* direction,
               float* out) {
  for (int j = 0; j < spec.head_dim; ++j) {
    double v = spec.noise_scale * rng.normal();
    if (shift != 0.0) v += shift * spec.noise_scale * (*direction)[static_cast<std::size_t>(j)];
    out[j] = static_cast<float>(v);
  }
}

std::vector<std::vector<double>> planted_directions(const PlantSpec& spec) {
  std::vector<std::vector<double>> dirs(static_cast<std::size_t>(spec.model().total_heads()));
  for (int k : spec.stable_heads) dirs[k] = plant_direction(spec, k);
  for (int k : spec.decoy_heads) dirs[k] = plant_direction(spec, k);
  return dirs;
}

}  // namespace

ModelSpec PlantSpec::model() const { return {model_name, n_layers, n_heads_per_layer, head_dim}; }

void PlantSpec::validate() const {
  model().validate();
  const int total = model().total_heads();
  std::set<int> stable(stable_heads.begin(), stable_heads.end());
  std::set<int> decoy(decoy_heads.begin(), decoy_heads.end());
  if (stable.size() != stable_heads.size() || decoy.size() != decoy_heads.size()) {
    throw ValidationError("plant spec lists a head twice");
  }
  for (int k : stable) {
    if (k < 0 || k >= total) throw ValidationError("stable head index out of range");
    if (decoy.contains(k)) {
      throw ValidationError("head " + std::to_string(k) + " is both stable and decoy");
    }
  }
  for (int k : decoy) {
    if (k < 0 || k >= total) throw ValidationError("decoy head index out of range");
  }
  if (n_normal < 2 || n_abnormal < 2) throw ValidationError("plant spec needs >= 2 videos per class");
  if (n_prompts < 1) throw ValidationError("plant spec needs at least one prompt");
  if (!(noise_scale > 0.0)) throw ValidationError("noise_scale must be positive");
  if (!std::isfinite(mean_shift) || !std::isfinite(decoy_shift)) {
    throw ValidationError("shifts must be finite");
  }
  if (segment_frames < 1) throw ValidationError("segment_frames must be positive");
  if (signal_dims < 0 || signal_dims > head_dim) {
    throw ValidationError("signal_dims must lie in [0, head_dim]");
  }
  if (split.n_videos < 1 || split.n_segments < 1 || split.n_abnormal < 0 ||
      split.n_abnormal > split.n_videos || split.window_min < 1 ||
      split.window_max < split.window_min || split.window_max > split.n_segments) {
    throw ValidationError("invalid segment split parameters");
  }
}

PlantSpec PlantSpec::recovery_default(std::uint64_t seed) {
  PlantSpec spec;
  spec.seed = seed;
  Rng rng(derive_seed(seed, {kLayoutStream}));
  const int total = spec.model().total_heads();
  std::vector<int> heads(static_cast<std::size_t>(total));
  for (int k = 0; k < total; ++k) heads[k] = k;
  // Partial Fisher-Yates: the first ten positions become the planted heads.
  for (int i = 0; i < 10; ++i) {
    const auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(total - i)));
    std::swap(heads[i], heads[j]);
  }
  spec.stable_heads.assign(heads.begin(), heads.begin() + 5);
  spec.decoy_heads.assign(heads.begin() + 5, heads.begin() + 10);
  std::sort(spec.stable_heads.begin(), spec.stable_heads.end());
  std::sort(spec.decoy_heads.begin(), spec.decoy_heads.end());
  return spec;
}

std::string plant_spec_to_json(const PlantSpec& s) {
  json j = {{"model_name", s.model_name},
            {"n_layers", s.n_layers},
            {"n_heads_per_layer", s.n_heads_per_layer},
            {"head_dim", s.head_dim},
            {"stable_heads", s.stable_heads},
            {"mean_shift", s.mean_shift},
            {"decoy_heads", s.decoy_heads},
            {"decoy_shift", s.decoy_shift},
            {"signal_dims", s.signal_dims},
            {"noise_scale", s.noise_scale},
            {"n_normal", s.n_normal},
            {"n_abnormal", s.n_abnormal},
            {"n_prompts", s.n_prompts},
            {"segment_frames", s.segment_frames},
            {"seed", s.seed},
            {"split",
             {{"n_videos", s.split.n_videos},
              {"n_segments", s.split.n_segments},
              {"n_abnormal", s.split.n_abnormal},
              {"window_min", s.split.window_min},
              {"window_max", s.split.window_max}}}};
  return j.dump(2) + "\n";
}

PlantSpec plant_spec_from_json(const std::string& text) {
  PlantSpec s;
  try {
    const json j = json::parse(text);
    if (j.contains("recovery_default_seed")) {
      s = PlantSpec::recovery_default(j.at("recovery_default_seed").get<std::uint64_t>());
    }
    s.model_name = j.value("model_name", s.model_name);
    s.n_layers = j.value("n_layers", s.n_layers);
    s.n_heads_per_layer = j.value("n_heads_per_layer", s.n_heads_per_layer);
    s.head_dim = j.value("head_dim", s.head_dim);
    s.stable_heads = j.value("stable_heads", s.stable_heads);
    s.mean_shift = j.value("mean_shift", s.mean_shift);
    s.decoy_heads = j.value("decoy_heads", s.decoy_heads);
    s.decoy_shift = j.value("decoy_shift", s.decoy_shift);
    s.signal_dims = j.value("signal_dims", s.signal_dims);
    s.noise_scale = j.value("noise_scale", s.noise_scale);
    s.n_normal = j.value("n_normal", s.n_normal);
    s.n_abnormal = j.value("n_abnormal", s.n_abnormal);
    s.n_prompts = j.value("n_prompts", s.n_prompts);
    s.segment_frames = j.value("segment_frames", s.segment_frames);
    s.seed = j.value("seed", s.seed);
    if (j.contains("split")) {
      const auto& js = j.at("split");
      s.split.n_videos = js.value("n_videos", s.split.n_videos);
      s.split.n_segments = js.value("n_segments", s.split.n_segments);
      s.split.n_abnormal = js.value("n_abnormal", s.split.n_abnormal);
      s.split.window_min = js.value("window_min", s.split.window_min);
      s.split.window_max = js.value("window_max", s.split.window_max);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed plant spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::vector<double> plant_direction(const PlantSpec& spec, int global_index) {
  Rng rng(derive_seed(spec.seed, {kDirectionStream, static_cast<std::uint64_t>(global_index)}));
  const int d = spec.head_dim;
  const int r = spec.signal_dims == 0 ? d : spec.signal_dims;
  std::vector<int> coords(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) coords[j] = j;
  for (int i = 0; i < r; ++i) {
    const auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(d - i)));
    std::swap(coords[i], coords[j]);
  }
  std::vector<double> pattern(static_cast<std::size_t>(d), 0.0);
  for (int i = 0; i < r; ++i) pattern[coords[i]] = (rng.next_u64() >> 63) ? 1.0 : -1.0;
  return pattern;
}

int active_prompt(const PlantSpec& spec, int global_index) {
  if (std::find(spec.stable_heads.begin(), spec.stable_heads.end(), global_index) !=
      spec.stable_heads.end()) {
    return -1;
  }
  const auto it = std::find(spec.decoy_heads.begin(), spec.decoy_heads.end(), global_index);
  if (it != spec.decoy_heads.end()) {
    return static_cast<int>((it - spec.decoy_heads.begin()) % spec.n_prompts);
  }
  return -2;
}

BankManifest calibration_manifest(const PlantSpec& spec) {
  BankManifest m;
  m.model = spec.model();
  for (int p = 0; p < spec.n_prompts; ++p) {
    m.prompts.push_back({prompt_id(static_cast<std::size_t>(p)),
                         "Synthetic prompt " + std::to_string(p) + ": is there an anomaly?"});
  }
  for (int i = 0; i < spec.n_normal; ++i) {
    m.videos.push_back({numbered("normal_", static_cast<std::size_t>(i)), 0, 1, spec.segment_frames, {}});
  }
  for (int i = 0; i < spec.n_abnormal; ++i) {
    m.videos.push_back(
        {numbered("abnormal_", static_cast<std::size_t>(i)), 1, 1, spec.segment_frames, {}});
  }
  return m;
}

CalibrationFeatureRecord synthesize_record(const PlantSpec& spec, std::size_t video_index,
                                           std::size_t prompt_index) {
  spec.validate();
  const auto manifest = calibration_manifest(spec);
  const auto& video = manifest.videos.at(video_index);
  const auto dirs = planted_directions(spec);
  CalibrationFeatureRecord r;
  r.video_id = video.id;
  r.prompt_id = prompt_id(prompt_index);
  const int total = spec.model().total_heads();
  r.features.resize(static_cast<std::size_t>(total) * static_cast<std::size_t>(spec.head_dim));
  Rng rng(derive_seed(spec.seed, {kRecordStream, video_index, prompt_index}));
  for (int k = 0; k < total; ++k) {
    const double shift = video.label == 1 ? shift_for(spec, k, prompt_index) : 0.0;
    fill_head(spec, rng, shift, &dirs[k], r.features.data() + static_cast<std::size_t>(k) * spec.head_dim);
  }
  return r;
}

HeadBank synthesize_calibration_bank(const PlantSpec& spec) {
  spec.validate();
  auto manifest = calibration_manifest(spec);
  std::vector<CalibrationFeatureRecord> records;
  records.reserve(manifest.videos.size() * manifest.prompts.size());
  for (std::size_t v = 0; v < manifest.videos.size(); ++v) {
    for (std::size_t p = 0; p < manifest.prompts.size(); ++p) {
      records.push_back(synthesize_record(spec, v, p));
    }
  }
  return HeadBank::in_memory(std::move(manifest), std::move(records));
}

HeadBank generate_calibration_bank(const PlantSpec& spec, const fs::path& dest) {
  spec.validate();
  const auto manifest = calibration_manifest(spec);
  {
    BankWriter writer(manifest, dest);
    for (std::size_t v = 0; v < manifest.videos.size(); ++v) {
      for (std::size_t p = 0; p < manifest.prompts.size(); ++p) {
        writer.add(synthesize_record(spec, v, p));
      }
    }
    writer.commit();
  }
  std::ofstream(dest / "plant_spec.json", std::ios::binary) << plant_spec_to_json(spec);
  return HeadBank::open(dest);
}

std::vector<SyntheticVideo> default_segment_videos(const PlantSpec& spec) {
  spec.validate();
  std::vector<SyntheticVideo> videos;
  Rng rng(derive_seed(spec.seed, {kWindowStream}));
  for (int i = 0; i < spec.split.n_videos; ++i) {
    SyntheticVideo v{numbered("val_", static_cast<std::size_t>(i)), spec.split.n_segments, {}};
    if (i < spec.split.n_abnormal) {
      const int span = spec.split.window_max - spec.split.window_min + 1;
      const int len = spec.split.window_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(span)));
      const int start = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.split.n_segments - len + 1)));
      v.windows.push_back({start, start + len});
    }
    videos.push_back(std::move(v));
  }
  return videos;
}

HeadBank synthesize_segment_bank(const PlantSpec& spec, const ExpertHeadSet& experts,
                                 const std::vector<SyntheticVideo>& videos) {
  spec.validate();
  if (!(experts.model == spec.model())) {
    throw ValidationError("expert set does not match the plant spec's model");
  }
  if (experts.heads.empty()) throw ValidationError("expert set is empty");
  if (videos.empty()) throw ValidationError("segment split has no videos");

  BankManifest manifest;
  manifest.model = spec.model();
  manifest.prompts.push_back({prompt_id(0), "Synthetic prompt 0: is there an anomaly?"});
  const auto dirs = planted_directions(spec);
  const auto indices = experts.global_indices();
  const int width = static_cast<int>(indices.size()) * spec.head_dim;

  std::vector<SegmentFeatureSequence> sequences;
  for (std::size_t vi = 0; vi < videos.size(); ++vi) {
    const auto& v = videos[vi];
    if (v.n_segments < 1) throw ValidationError("video " + v.id + " has no segments");
    std::int64_t prev_end = 0;
    std::vector<Interval> gt;
    for (const auto& w : v.windows) {
      if (w.start < prev_end || w.end <= w.start || w.end > v.n_segments) {
        throw ValidationError("anomaly window [" + std::to_string(w.start) + ", " +
                              std::to_string(w.end) + ") of video " + v.id +
                              " is outside [0, " + std::to_string(v.n_segments) +
                              ") or overlaps another");
      }
      prev_end = w.end;
      gt.push_back({w.start * spec.segment_frames, w.end * spec.segment_frames});
    }
    manifest.videos.push_back({v.id, v.windows.empty() ? 0 : 1, v.n_segments, spec.segment_frames, gt});

    SegmentFeatureSequence seq;
    seq.video_id = v.id;
    seq.expert_manifest_hash = experts.manifest_hash;
    seq.n_experts = static_cast<int>(indices.size());
    seq.n_segments = v.n_segments;
    seq.width = width;
    seq.features.resize(static_cast<std::size_t>(v.n_segments) * static_cast<std::size_t>(width));
    for (int t = 0; t < v.n_segments; ++t) {
      const bool abnormal = std::any_of(v.windows.begin(), v.windows.end(),
                                        [t](const Interval& w) { return t >= w.start && t < w.end; });
      Rng rng(derive_seed(spec.seed, {kSegmentStream, vi, static_cast<std::uint64_t>(t)}));
      float* row = seq.features.data() + static_cast<std::size_t>(t) * width;
      for (std::size_t e = 0; e < indices.size(); ++e) {
        const int k = indices[e];
        const double shift = abnormal ? shift_for(spec, k, 0) : 0.0;
        fill_head(spec, rng, shift, &dirs[k], row + e * static_cast<std::size_t>(spec.head_dim));
      }
    }
    sequences.push_back(std::move(seq));
  }
  return HeadBank::in_memory(std::move(manifest), {}, std::move(sequences));
}

HeadBank generate_segment_split(const PlantSpec& spec, const ExpertHeadSet& experts,
                                const std::vector<SyntheticVideo>& videos, const fs::path& dest) {
  const auto bank = synthesize_segment_bank(spec, experts, videos);
  {
    BankWriter writer(bank.manifest(), dest);
    for (const auto& v : bank.manifest().videos) writer.add(bank.segments(v.id));
    writer.commit();
  }
  std::ofstream(dest / "plant_spec.json", std::ios::binary) << plant_spec_to_json(spec);
  return HeadBank::open(dest);
}

}  // namespace headhunt
