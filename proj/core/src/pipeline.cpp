#include "headhunt/pipeline.hpp"

#include <cmath>
#include <cstdio>

#include "headhunt/error.hpp"
#include "headhunt/metrics.hpp"

namespace headhunt {

namespace fs = std::filesystem;

HuntResult hunt(const HeadBank& bank, const PipelineConfig& config) {
  config.validate();
  if (!bank.has_features()) throw ValidationError("hunt needs a calibration bank with features/");
  HuntResult r;
  r.saliency = build_saliency_table(bank, config.saliency_options(), config.seed, config.workers);
  r.profile = robustness_profile(r.saliency, config.lambda);
  r.experts = select_experts(r.profile, bank.model(), config.top_k);
  return r;
}

ScorerModel train_scorer(const HeadBank& bank, const ExpertHeadSet& experts, const PipelineConfig& config) {
  config.validate();
  if (!(experts.model == bank.model())) {
    throw ValidationError("expert set model '" + experts.model.name + "' does not match bank model '" +
                          bank.model().name + "'");
  }
  auto model = train(build_composite(bank, experts, config.train_prompt), config.train_options());
  model.expert_manifest_hash = experts.manifest_hash;
  return model;
}

std::vector<ValidationVideo> score_segment_bank(const HeadBank& bank, const ScorerModel& scorer) {
  if (!bank.has_segments()) throw ValidationError("bank has no segments/ section");
  std::vector<ValidationVideo> out;
  for (const auto& v : bank.manifest().videos) {
    const auto seq = bank.segments(v.id);
    if (seq.expert_manifest_hash != scorer.expert_manifest_hash) {
      throw ValidationError("stale expert set: segments of " + v.id + " carry expert manifest hash " +
                            seq.expert_manifest_hash + " but the scorer was trained for " +
                            scorer.expert_manifest_hash);
    }
    out.push_back({v.id, predict_sequence(scorer, seq), v.segment_frames,
                   v.gt_intervals.value_or(std::vector<Interval>{})});
  }
  return out;
}

LocatorConfig calibrate_locator(const HeadBank& bank, const ScorerModel& scorer,
                                const PipelineConfig& config, const std::string& split_id) {
  config.validate();
  for (const auto& v : bank.manifest().videos) {
    if (!v.gt_intervals) throw ValidationError("video " + v.id + " has no ground truth; not a validation split");
  }
  const auto videos = score_segment_bank(bank, scorer);
  return calibrate(videos, config.grid, split_id, config.workers);
}

std::vector<AnomalyCurve> detect(const HeadBank& bank, const ScorerModel& scorer,
                                 const LocatorConfig& locator) {
  std::vector<AnomalyCurve> curves;
  for (auto& v : score_segment_bank(bank, scorer)) {
    curves.push_back(locate(v.video_id, std::move(v.p), locator, v.segment_frames));
  }
  return curves;
}

Report evaluate(const std::vector<AnomalyCurve>& curves,
                const std::optional<std::vector<std::vector<Interval>>>& truth) {
  Report r;
  r.n_videos = curves.size();
  for (const auto& c : curves) {
    r.n_events += c.events.size();
    r.n_frames += static_cast<std::int64_t>(c.p.size()) * c.segment_frames;
  }
  if (!truth) return r;
  if (truth->size() != curves.size()) throw ValidationError("ground truth count differs from curve count");

  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  std::vector<FrameSequence> frames;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& c = curves[i];
    const auto s = expand_to_frames(std::span<const double>(c.p_smoothed), c.segment_frames);
    const auto mask = interval_mask((*truth)[i], static_cast<std::int64_t>(s.size()));
    scores.insert(scores.end(), s.begin(), s.end());
    labels.insert(labels.end(), mask.begin(), mask.end());
    frames.push_back({expand_to_frames(std::span<const std::uint8_t>(c.y_hat), c.segment_frames),
                      (*truth)[i]});
  }
  bool any_pos = false, any_neg = false;
  for (auto l : labels) (l ? any_pos : any_neg) = true;
  if (any_pos && any_neg) r.auc = roc_auc(scores, labels);
  if (any_pos) r.ap = average_precision(scores, labels);
  r.f1 = frame_f1(frames);
  return r;
}

std::string report_to_text(const Report& r) {
  auto fixed = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  std::string out = "videos: " + std::to_string(r.n_videos) + "\n" +
                    "frames: " + std::to_string(r.n_frames) + "\n" +
                    "events: " + std::to_string(r.n_events) + "\n";
  if (r.auc) out += "frame_auc: " + fixed(*r.auc) + "\n";
  if (r.ap) out += "frame_ap: " + fixed(*r.ap) + "\n";
  if (r.f1) {
    out += "frame_f1: " + fixed(r.f1->f1) + (r.f1->degenerate ? " (no positive frames)" : "") + "\n";
    out += "tp/fp/fn: " + std::to_string(r.f1->tp) + "/" + std::to_string(r.f1->fp) + "/" +
           std::to_string(r.f1->fn) + "\n";
  }
  return out;
}

void cmd_gen(const PlantSpec& spec, const std::optional<fs::path>& experts_path, const fs::path& out) {
  if (experts_path) {
    const auto experts = experts_from_json(read_file(*experts_path));
    generate_segment_split(spec, experts, default_segment_videos(spec), out);
  } else {
    generate_calibration_bank(spec, out);
  }
}

void cmd_hunt(const fs::path& bank_dir, const PipelineConfig& config, const fs::path& out_dir) {
  const auto r = hunt(HeadBank::open(bank_dir), config);
  write_file(out_dir / "saliency.json", saliency_to_json(r.saliency));
  write_file(out_dir / "experts.json", experts_to_json(r.experts));
}

void cmd_train_scorer(const fs::path& bank_dir, const fs::path& experts_path, const PipelineConfig& config,
                      const fs::path& out) {
  const auto experts = experts_from_json(read_file(experts_path));
  write_file(out, scorer_to_json(train_scorer(HeadBank::open(bank_dir), experts, config)));
}

void cmd_calibrate(const fs::path& segment_bank_dir, const fs::path& scorer_path,
                   const PipelineConfig& config, const fs::path& out) {
  const auto scorer = scorer_from_json(read_file(scorer_path));
  const auto split = segment_bank_dir.filename().empty() ? segment_bank_dir.parent_path().filename()
                                                          : segment_bank_dir.filename();
  write_file(out, locator_to_json(calibrate_locator(HeadBank::open(segment_bank_dir), scorer, config,
                                                    split.string())));
}

void cmd_detect(const fs::path& segment_bank_dir, const fs::path& scorer_path,
                const fs::path& locator_path, const fs::path& out_dir) {
  const auto scorer = scorer_from_json(read_file(scorer_path));
  const auto locator = locator_from_json(read_file(locator_path));
  const auto curves = detect(HeadBank::open(segment_bank_dir), scorer, locator);
  for (const auto& c : curves) write_file(out_dir / "curves" / (c.video_id + ".csv"), curve_to_csv(c));
  write_file(out_dir / "events.json", events_to_json(curves, scorer.expert_manifest_hash, locator));
}

std::string cmd_report(const fs::path& detect_dir, const std::optional<fs::path>& bank_dir) {
  const auto events = events_from_json(read_file(detect_dir / "events.json"));
  std::vector<AnomalyCurve> curves;
  for (const auto& v : events.videos) {
    if (!is_valid_identifier(v.video_id)) throw ValidationError("invalid video id '" + v.video_id + "'");
    auto c = curve_from_csv(v.video_id, read_file(detect_dir / "curves" / (v.video_id + ".csv")),
                            v.segment_frames);
    if (static_cast<int>(c.p.size()) != v.n_segments || c.events != v.events) {
      throw ValidationError("curve file of " + v.video_id + " disagrees with events.json");
    }
    curves.push_back(std::move(c));
  }
  std::optional<std::vector<std::vector<Interval>>> truth;
  if (bank_dir) {
    const auto manifest = manifest_from_json(read_file(*bank_dir / "manifest.json"));
    truth.emplace();
    for (const auto& c : curves) {
      const auto& v = manifest.video(c.video_id);
      if (!v.gt_intervals) throw ValidationError("video " + c.video_id + " has no ground truth");
      if (v.n_segments != static_cast<int>(c.p.size()) || v.segment_frames != c.segment_frames) {
        throw ValidationError("video " + c.video_id + " has a different length in the bank");
      }
      truth->push_back(*v.gt_intervals);
    }
  }
  return report_to_text(evaluate(curves, truth));
}

}  // namespace headhunt
