#include "headhunt/artifacts.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "headhunt/error.hpp"
#include <nlohmann/json.hpp>

namespace headhunt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json scores_json(const SaliencyScores& s) {
  return {{"lda", s.lda}, {"kl", s.kl}, {"mmd2", s.mmd2}, {"nmi", s.nmi}};
}

SaliencyScores scores_from(const json& j) {
  return {j.at("lda").get<double>(), j.at("kl").get<double>(), j.at("mmd2").get<double>(),
          j.at("nmi").get<double>()};
}

json model_json(const ModelSpec& m) {
  return {{"name", m.name},
          {"n_layers", m.n_layers},
          {"n_heads_per_layer", m.n_heads_per_layer},
          {"head_dim", m.head_dim}};
}

ModelSpec model_from(const json& j) {
  return {j.at("name").get<std::string>(), j.at("n_layers").get<int>(),
          j.at("n_heads_per_layer").get<int>(), j.at("head_dim").get<int>()};
}

json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vector_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

template <typename Fn>
auto parse_artifact(const std::string& text, const char* what, Fn&& fn) {
  try {
    return fn(json::parse(text));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed ") + what + ": " + e.what());
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

SaliencyOptions PipelineConfig::saliency_options() const {
  SaliencyOptions o;
  o.regularization = {shrinkage, jitter};
  o.kernel.bandwidth = bandwidth;
  return o;
}

TrainOptions PipelineConfig::train_options() const { return {l2, tolerance, max_iter}; }

void PipelineConfig::validate() const {
  if (!(lambda >= 0.0)) throw ValidationError("lambda must be non-negative");
  if (top_k < 1) throw ValidationError("top-k must be at least 1");
  if (bandwidth && !(*bandwidth > 0.0)) throw ValidationError("bandwidth must be positive");
  if (shrinkage < 0.0 || shrinkage > 1.0 || jitter < 0.0) {
    throw ValidationError("shrinkage must lie in [0, 1] and jitter must be non-negative");
  }
  if (l2 < 0.0 || !(tolerance > 0.0) || max_iter < 1) throw ValidationError("invalid scorer options");
  if (workers < 1) throw ValidationError("workers must be at least 1");
}

std::string config_to_json(const PipelineConfig& c) {
  json j = {{"lambda", c.lambda},
            {"top_k", c.top_k},
            {"bandwidth", c.bandwidth ? json(*c.bandwidth) : json("median-heuristic")},
            {"shrinkage", c.shrinkage},
            {"jitter", c.jitter},
            {"l2", c.l2},
            {"tolerance", c.tolerance},
            {"max_iter", c.max_iter},
            {"train_prompt", c.train_prompt ? json(*c.train_prompt) : json(nullptr)},
            {"grid", {{"sigmas", c.grid.sigmas}, {"taus", c.grid.taus}}},
            {"seed", c.seed},
            {"workers", c.workers}};
  return j.dump(2) + "\n";
}

PipelineConfig config_from_json(const std::string& text, const PipelineConfig& base) {
  return parse_artifact(text, "config", [&](const json& j) {
    PipelineConfig c = base;
    c.lambda = j.value("lambda", c.lambda);
    c.top_k = j.value("top_k", c.top_k);
    if (j.contains("bandwidth")) {
      const auto& b = j.at("bandwidth");
      if (b.is_string()) {
        if (b.get<std::string>() != "median-heuristic") {
          throw ValidationError("bandwidth must be a number or \"median-heuristic\"");
        }
        c.bandwidth.reset();
      } else {
        c.bandwidth = b.get<double>();
      }
    }
    c.shrinkage = j.value("shrinkage", c.shrinkage);
    c.jitter = j.value("jitter", c.jitter);
    c.l2 = j.value("l2", c.l2);
    c.tolerance = j.value("tolerance", c.tolerance);
    c.max_iter = j.value("max_iter", c.max_iter);
    if (j.contains("train_prompt")) {
      const auto& p = j.at("train_prompt");
      c.train_prompt = p.is_null() ? std::nullopt : std::optional<std::string>(p.get<std::string>());
    }
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      if (g.contains("sigmas")) c.grid.sigmas = g.at("sigmas").get<std::vector<double>>();
      if (g.contains("taus")) c.grid.taus = g.at("taus").get<std::vector<double>>();
    }
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
    c.validate();
    return c;
  });
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const auto tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << contents;
    if (!out) throw ValidationError("short write to " + path.string());
  }
  fs::rename(tmp, path);
}

std::string saliency_to_json(const SaliencyTable& table) {
  json j = json::object();
  for (const auto& p : table.prompts) {
    json heads = json::array();
    for (const auto& h : p.heads) {
      heads.push_back({{"global_index", h.global_index},
                       {"raw", scores_json(h.raw)},
                       {"normalized", scores_json(h.normalized)},
                       {"score", h.score}});
    }
    j[p.prompt_id] = std::move(heads);
  }
  return j.dump(1) + "\n";
}

SaliencyTable saliency_from_json(const std::string& text) {
  return parse_artifact(text, "saliency table", [](const json& j) {
    SaliencyTable t;
    for (const auto& [prompt, heads] : j.items()) {
      PromptSaliency p{prompt, {}};
      for (const auto& h : heads) {
        p.heads.push_back({h.at("global_index").get<int>(), scores_from(h.at("raw")),
                           scores_from(h.at("normalized")), h.at("score").get<double>()});
      }
      t.prompts.push_back(std::move(p));
    }
    return t;
  });
}

std::string experts_to_json(const ExpertHeadSet& e) {
  json heads = json::array();
  for (std::size_t i = 0; i < e.heads.size(); ++i) {
    const auto& a = e.heads[i];
    json raw = json::object();
    json per_prompt = json::object();
    if (i < e.details.size()) {
      const auto& d = e.details[i];
      for (std::size_t m = 0; m < e.prompt_ids.size(); ++m) {
        if (m < d.prompt_raw.size()) raw[e.prompt_ids[m]] = scores_json(d.prompt_raw[m]);
        if (m < d.prompt_scores.size()) per_prompt[e.prompt_ids[m]] = d.prompt_scores[m];
      }
    }
    json h = {{"layer", a.layer}, {"head", a.head}, {"global_index", a.global_index},
              {"raw_scores_per_prompt", raw}, {"scores_per_prompt", per_prompt}};
    if (i < e.details.size()) {
      h["mu"] = e.details[i].mu;
      h["sigma"] = e.details[i].sigma;
      h["rss"] = e.details[i].rss;
    }
    heads.push_back(std::move(h));
  }
  json j = {{"lambda", e.lambda},
            {"k", e.k_requested},
            {"model", model_json(e.model)},
            {"prompts", e.prompt_ids},
            {"heads", heads},
            {"manifest_hash", e.manifest_hash}};
  if (e.warning) j["warning"] = *e.warning;
  return j.dump(2) + "\n";
}

ExpertHeadSet experts_from_json(const std::string& text) {
  auto e = parse_artifact(text, "experts file", [](const json& j) {
    ExpertHeadSet e;
    e.lambda = j.at("lambda").get<double>();
    e.k_requested = j.at("k").get<int>();
    e.model = model_from(j.at("model"));
    e.model.validate();
    e.prompt_ids = j.value("prompts", std::vector<std::string>{});
    e.manifest_hash = j.at("manifest_hash").get<std::string>();
    if (j.contains("warning")) e.warning = j.at("warning").get<std::string>();
    for (const auto& h : j.at("heads")) {
      const auto addr = HeadAddress::from_layer_head(e.model, h.at("layer").get<int>(),
                                                     h.at("head").get<int>());
      if (addr.global_index != h.at("global_index").get<int>()) {
        throw ValidationError("experts file: global_index disagrees with (layer, head)");
      }
      e.heads.push_back(addr);
      HeadRobustness d;
      d.global_index = addr.global_index;
      d.mu = h.value("mu", 0.0);
      d.sigma = h.value("sigma", 0.0);
      d.rss = h.value("rss", 0.0);
      for (const auto& p : e.prompt_ids) {
        if (h.contains("raw_scores_per_prompt") && h["raw_scores_per_prompt"].contains(p)) {
          d.prompt_raw.push_back(scores_from(h["raw_scores_per_prompt"][p]));
        }
        if (h.contains("scores_per_prompt") && h["scores_per_prompt"].contains(p)) {
          d.prompt_scores.push_back(h["scores_per_prompt"][p].get<double>());
        }
      }
      e.details.push_back(std::move(d));
    }
    return e;
  });
  const auto expected = expert_manifest_hash(e.model, e.heads, e.lambda);
  if (expected != e.manifest_hash) {
    throw ValidationError("experts file hash " + e.manifest_hash +
                          " does not match its contents (expected " + expected + ")");
  }
  return e;
}

std::string scorer_to_json(const ScorerModel& m) {
  const auto& t = m.training_meta;
  json j = {{"weights", vector_json(m.weights)},
            {"bias", m.bias},
            {"l2", m.l2},
            {"standardization",
             {{"mean", vector_json(m.standardization.mean)},
              {"scale", vector_json(m.standardization.scale)}}},
            {"expert_manifest_hash", m.expert_manifest_hash},
            {"training_meta",
             {{"iterations", t.iterations},
              {"initial_loss", t.initial_loss},
              {"final_loss", t.final_loss},
              {"gradient_norm", t.gradient_norm},
              {"converged", t.converged},
              {"loss_history", t.loss_history},
              {"warnings", t.warnings}}}};
  return j.dump(2) + "\n";
}

ScorerModel scorer_from_json(const std::string& text) {
  return parse_artifact(text, "scorer file", [](const json& j) {
    ScorerModel m;
    m.weights = vector_from(j.at("weights"));
    m.bias = j.at("bias").get<double>();
    m.l2 = j.at("l2").get<double>();
    m.standardization.mean = vector_from(j.at("standardization").at("mean"));
    m.standardization.scale = vector_from(j.at("standardization").at("scale"));
    m.expert_manifest_hash = j.at("expert_manifest_hash").get<std::string>();
    const auto& t = j.at("training_meta");
    m.training_meta.iterations = t.at("iterations").get<int>();
    m.training_meta.initial_loss = t.value("initial_loss", 0.0);
    m.training_meta.final_loss = t.at("final_loss").get<double>();
    m.training_meta.gradient_norm = t.value("gradient_norm", 0.0);
    m.training_meta.converged = t.at("converged").get<bool>();
    m.training_meta.loss_history = t.value("loss_history", std::vector<double>{});
    m.training_meta.warnings = t.value("warnings", std::vector<std::string>{});
    if (m.standardization.mean.size() != m.weights.size() ||
        m.standardization.scale.size() != m.weights.size()) {
      throw ValidationError("scorer file: standardization length differs from weights");
    }
    if (!m.weights.allFinite() || !std::isfinite(m.bias) ||
        !(m.standardization.scale.array() > 0.0).all()) {
      throw ValidationError("scorer file: non-finite weights or non-positive scales");
    }
    return m;
  });
}

std::string locator_to_json(const LocatorConfig& c) {
  json j = {{"sigma_g", c.sigma_g},
            {"tau", c.tau},
            {"grid", {{"sigmas", c.grid.sigmas}, {"taus", c.grid.taus}}},
            {"f1_surface", c.f1_surface},
            {"best_f1", c.best_f1},
            {"validation_split", c.validation_split},
            {"averaging", c.averaging}};
  return j.dump(2) + "\n";
}

LocatorConfig locator_from_json(const std::string& text) {
  return parse_artifact(text, "locator file", [](const json& j) {
    LocatorConfig c;
    c.sigma_g = j.at("sigma_g").get<double>();
    c.tau = j.at("tau").get<double>();
    if (j.contains("grid")) {
      c.grid.sigmas = j["grid"].value("sigmas", std::vector<double>{});
      c.grid.taus = j["grid"].value("taus", std::vector<double>{});
    }
    c.f1_surface = j.value("f1_surface", std::vector<std::vector<double>>{});
    c.best_f1 = j.value("best_f1", 0.0);
    c.validation_split = j.value("validation_split", std::string{});
    c.averaging = j.value("averaging", std::string("micro"));
    c.validate();
    return c;
  });
}

std::string curve_to_csv(const AnomalyCurve& c) {
  std::string out = "segment_index,p,p_smoothed,y_hat\n";
  for (std::size_t t = 0; t < c.p.size(); ++t) {
    out += std::to_string(t) + "," + format_double(c.p[t]) + "," + format_double(c.p_smoothed[t]) +
           "," + std::to_string(static_cast<int>(c.y_hat[t])) + "\n";
  }
  return out;
}

AnomalyCurve curve_from_csv(const std::string& video_id, const std::string& text, int segment_frames) {
  AnomalyCurve c;
  c.video_id = video_id;
  c.segment_frames = segment_frames;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "segment_index,p,p_smoothed,y_hat") {
    throw ValidationError("curve file for " + video_id + " has an unexpected header");
  }
  std::size_t expected = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string a, b, s, y;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, s, ',') ||
        !std::getline(row, y)) {
      throw ValidationError("malformed curve row in " + video_id + ": " + line);
    }
    try {
      if (std::stoul(a) != expected) throw ValidationError("curve rows out of order in " + video_id);
      c.p.push_back(std::stod(b));
      c.p_smoothed.push_back(std::stod(s));
      c.y_hat.push_back(static_cast<std::uint8_t>(std::stoi(y) != 0));
    } catch (const std::logic_error&) {
      throw ValidationError("malformed curve row in " + video_id + ": " + line);
    }
    ++expected;
  }
  c.events = group_events(c.y_hat);
  c.frame_spans = event_frame_spans(c.events, segment_frames);
  return c;
}

std::string events_to_json(const std::vector<AnomalyCurve>& curves, const std::string& expert_hash,
                           const LocatorConfig& locator) {
  json videos = json::array();
  for (const auto& c : curves) {
    json events = json::array();
    for (std::size_t i = 0; i < c.events.size(); ++i) {
      events.push_back({{"start_segment", c.events[i].start},
                        {"end_segment", c.events[i].end},
                        {"start_frame", c.frame_spans[i].start},
                        {"end_frame", c.frame_spans[i].end}});
    }
    videos.push_back({{"video_id", c.video_id},
                      {"segment_frames", c.segment_frames},
                      {"n_segments", c.p.size()},
                      {"events", events}});
  }
  json j = {{"expert_manifest_hash", expert_hash},
            {"sigma_g", locator.sigma_g},
            {"tau", locator.tau},
            {"videos", videos}};
  return j.dump(2) + "\n";
}

EventsFile events_from_json(const std::string& text) {
  return parse_artifact(text, "events file", [](const json& j) {
    EventsFile f;
    f.expert_manifest_hash = j.at("expert_manifest_hash").get<std::string>();
    f.sigma_g = j.at("sigma_g").get<double>();
    f.tau = j.at("tau").get<double>();
    for (const auto& v : j.at("videos")) {
      EventsFile::Video video;
      video.video_id = v.at("video_id").get<std::string>();
      video.segment_frames = v.at("segment_frames").get<int>();
      video.n_segments = v.at("n_segments").get<int>();
      for (const auto& e : v.at("events")) {
        video.events.push_back({e.at("start_segment").get<int>(), e.at("end_segment").get<int>()});
      }
      f.videos.push_back(std::move(video));
    }
    return f;
  });
}

}  // namespace headhunt
