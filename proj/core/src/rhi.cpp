#include "headhunt/rhi.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include "headhunt/digest.hpp"
#include "headhunt/error.hpp"

namespace headhunt {

namespace {

void fill_statistics(HeadRobustness& h, double lambda) {
  const double m = static_cast<double>(h.prompt_scores.size());
  double sum = 0.0;
  for (double s : h.prompt_scores) sum += s;
  h.mu = sum / m;
  double sq = 0.0;
  for (double s : h.prompt_scores) sq += (s - h.mu) * (s - h.mu);
  h.sigma = std::sqrt(sq / m);
  h.rss = h.mu - lambda * h.sigma;
}

void require_lambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ValidationError("lambda must be a finite non-negative number");
  }
}

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

RobustnessProfile robustness_profile(const SaliencyTable& table, double lambda) {
  require_lambda(lambda);
  if (table.prompts.empty()) throw ValidationError("saliency table has no prompts");
  RobustnessProfile profile;
  profile.lambda = lambda;

  std::map<int, HeadRobustness> by_head;
  for (const auto& h : table.prompts.front().heads) {
    const auto [it, fresh] = by_head.try_emplace(h.global_index);
    it->second.global_index = h.global_index;
    if (!fresh) {
      throw ValidationError("duplicate head " + std::to_string(h.global_index) + " in prompt " +
                            table.prompts.front().prompt_id);
    }
  }
  if (by_head.empty()) throw ValidationError("saliency table has no heads");

  for (const auto& p : table.prompts) {
    profile.prompt_ids.push_back(p.prompt_id);
    if (p.heads.size() != by_head.size()) {
      throw ValidationError("prompt " + p.prompt_id + " scores " + std::to_string(p.heads.size()) +
                            " heads, expected " + std::to_string(by_head.size()));
    }
    for (const auto& h : p.heads) {
      auto it = by_head.find(h.global_index);
      if (it == by_head.end()) {
        throw ValidationError("head " + std::to_string(h.global_index) + " of prompt " + p.prompt_id +
                              " is missing from prompt " + table.prompts.front().prompt_id);
      }
      if (it->second.prompt_scores.size() != profile.prompt_ids.size() - 1) {
        throw ValidationError("head " + std::to_string(h.global_index) +
                              " appears twice under prompt " + p.prompt_id);
      }
      it->second.prompt_scores.push_back(h.score);
      it->second.prompt_raw.push_back(h.raw);
    }
  }
  for (auto& [k, h] : by_head) {
    fill_statistics(h, lambda);
    profile.heads.push_back(std::move(h));
  }
  return profile;
}

RobustnessProfile robustness_profile(const std::vector<std::vector<double>>& scores, double lambda) {
  require_lambda(lambda);
  if (scores.empty() || scores.front().empty()) {
    throw ValidationError("score matrix needs at least one prompt and one head");
  }
  RobustnessProfile profile;
  profile.lambda = lambda;
  const auto n_heads = scores.front().size();
  for (std::size_t m = 0; m < scores.size(); ++m) {
    if (scores[m].size() != n_heads) throw ValidationError("ragged per-prompt score matrix");
    profile.prompt_ids.push_back("p" + std::to_string(m));
  }
  for (std::size_t k = 0; k < n_heads; ++k) {
    HeadRobustness h;
    h.global_index = static_cast<int>(k);
    for (const auto& row : scores) h.prompt_scores.push_back(row[k]);
    fill_statistics(h, lambda);
    profile.heads.push_back(std::move(h));
  }
  return profile;
}

std::vector<int> ExpertHeadSet::global_indices() const {
  std::vector<int> out;
  out.reserve(heads.size());
  for (const auto& h : heads) out.push_back(h.global_index);
  return out;
}

bool ranks_before(const HeadRobustness& a, const HeadRobustness& b) noexcept {
  if (a.rss != b.rss) return a.rss > b.rss;
  return a.global_index < b.global_index;
}

ExpertHeadSet select_experts(const RobustnessProfile& profile, const ModelSpec& model, int k) {
  if (k < 1) throw ValidationError("top-K must be at least 1");
  model.validate();
  ExpertHeadSet set;
  set.model = model;
  set.lambda = profile.lambda;
  set.k_requested = k;
  set.prompt_ids = profile.prompt_ids;

  std::vector<const HeadRobustness*> ranked;
  ranked.reserve(profile.heads.size());
  for (const auto& h : profile.heads) {
    if (!std::isfinite(h.rss)) throw NumericalError("non-finite robust score for head " +
                                                    std::to_string(h.global_index));
    ranked.push_back(&h);
  }
  std::sort(ranked.begin(), ranked.end(),
            [](const auto* a, const auto* b) { return ranks_before(*a, *b); });

  const auto available = static_cast<int>(ranked.size());
  if (k > available) {
    set.warning = "requested top-" + std::to_string(k) + " but only " + std::to_string(available) +
                  " heads exist; selecting all";
  }
  const int take = std::min(k, available);
  for (int i = 0; i < take; ++i) {
    set.heads.push_back(HeadAddress::from_global(model, ranked[i]->global_index));
    set.details.push_back(*ranked[i]);
  }
  set.manifest_hash = expert_manifest_hash(model, set.heads, set.lambda);
  return set;
}

std::string expert_manifest_hash(const ModelSpec& model, const std::vector<HeadAddress>& heads,
                                 double lambda) {
  std::string canonical = "headhunt-experts-v1\n";
  canonical += "model=" + model.name + "\n";
  canonical += "n_layers=" + std::to_string(model.n_layers) + "\n";
  canonical += "n_heads_per_layer=" + std::to_string(model.n_heads_per_layer) + "\n";
  canonical += "head_dim=" + std::to_string(model.head_dim) + "\n";
  canonical += "lambda=" + shortest(lambda) + "\n";
  canonical += "heads=";
  for (std::size_t i = 0; i < heads.size(); ++i) {
    if (i) canonical += ",";
    canonical += std::to_string(heads[i].layer) + ":" + std::to_string(heads[i].head);
  }
  canonical += "\n";
  return sha256_hex(canonical);
}

}  // namespace headhunt
