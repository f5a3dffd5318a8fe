#pragma once

// Robust head identification: mean and spread of each head's per-prompt
// saliency, the penalized robust score mu - lambda * sigma, and top-K
// selection of the consensus expert heads.

#include <optional>
#include <string>
#include <vector>

#include "headhunt/headbank.hpp"
#include "headhunt/saliency.hpp"

namespace headhunt {

inline constexpr double kDefaultLambda = 0.5;
inline constexpr int kDefaultTopK = 5;

struct HeadRobustness {
  int global_index = 0;
  double mu = 0.0;
  double sigma = 0.0;  // population standard deviation over prompts
  double rss = 0.0;
  std::vector<double> prompt_scores;          // S(k, p_m), profile prompt order
  std::vector<SaliencyScores> prompt_raw;     // raw metrics, same order
};

struct RobustnessProfile {
  double lambda = kDefaultLambda;
  std::vector<std::string> prompt_ids;
  std::vector<HeadRobustness> heads;  // ascending global_index
};

// Requires every prompt of the table to score exactly the same set of heads.
RobustnessProfile robustness_profile(const SaliencyTable& table, double lambda);

// Same statistics from precomputed per-prompt scores: scores[m][k] is the
// score of head k under prompt m.
RobustnessProfile robustness_profile(const std::vector<std::vector<double>>& scores, double lambda);

struct ExpertHeadSet {
  ModelSpec model;
  std::vector<HeadAddress> heads;       // descending RSS, ascending index on ties
  std::vector<HeadRobustness> details;  // parallel to `heads`
  std::vector<std::string> prompt_ids;
  double lambda = kDefaultLambda;
  int k_requested = kDefaultTopK;
  std::string manifest_hash;
  std::optional<std::string> warning;

  std::vector<int> global_indices() const;
};

// Ranking order: RSS descending, then global_index ascending.
bool ranks_before(const HeadRobustness& a, const HeadRobustness& b) noexcept;

ExpertHeadSet select_experts(const RobustnessProfile& profile, const ModelSpec& model, int k);

// SHA-256 over a canonical text rendering of (model, heads, lambda).
std::string expert_manifest_hash(const ModelSpec& model, const std::vector<HeadAddress>& heads,
                                 double lambda);

}  // namespace headhunt
