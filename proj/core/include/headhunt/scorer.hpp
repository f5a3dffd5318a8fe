#pragma once

// Logistic-regression anomaly scorer over concatenated expert-head features.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "headhunt/headbank.hpp"
#include "headhunt/rhi.hpp"

namespace headhunt {

struct LabeledSet {
  Eigen::MatrixXd x;  // one composite vector per row
  Eigen::VectorXd y;  // 0 / 1
  std::vector<std::string> sample_ids;
};

// Expert rows of one record, concatenated in expert order.
std::vector<double> composite_features(const CalibrationFeatureRecord& record,
                                       const ModelSpec& model, std::span<const int> expert_indices);

// One sample per (video, prompt) record, labelled with the video label. When
// `prompt_id` is set only that prompt's records are used.
LabeledSet build_composite(const HeadBank& bank, const ExpertHeadSet& experts,
                           const std::optional<std::string>& prompt_id = std::nullopt);

struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardization fit(const Eigen::MatrixXd& x);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

// Mean binary cross-entropy plus (l2 / 2) |w|^2 over parameters
// theta = [w; b]. The bias is not penalized.
class LogisticObjective {
 public:
  LogisticObjective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double l2);

  double value(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const;
  Eigen::MatrixXd hessian(const Eigen::VectorXd& theta) const;
  Eigen::Index dim() const noexcept { return x_.cols() + 1; }

 private:
  Eigen::VectorXd logits(const Eigen::VectorXd& theta) const;

  const Eigen::MatrixXd& x_;
  const Eigen::VectorXd& y_;
  double l2_;
};

struct TrainOptions {
  double l2 = 1e-4;
  double tolerance = 1e-6;  // on the gradient norm
  int max_iterations = 100;
};

struct TrainingMeta {
  int iterations = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double gradient_norm = 0.0;
  bool converged = false;
  std::vector<double> loss_history;
  std::vector<std::string> warnings;
};

struct ScorerModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  double l2 = 0.0;
  Standardization standardization;
  std::string expert_manifest_hash;
  TrainingMeta training_meta;

  Eigen::Index dim() const noexcept { return weights.size(); }
};

// Damped Newton iterations with Armijo backtracking on standardized
// features. `initial` (length dim + 1) defaults to zeros.
ScorerModel train(const LabeledSet& data, const TrainOptions& options,
                  const std::optional<Eigen::VectorXd>& initial = std::nullopt);

double sigmoid(double logit) noexcept;

// Probability in (0, 1) for one raw (unstandardized) composite vector.
double predict(const ScorerModel& model, std::span<const double> features);
double predict(const ScorerModel& model, std::span<const float> features);

// Probabilities for every segment of a sequence.
std::vector<double> predict_sequence(const ScorerModel& model, const SegmentFeatureSequence& seq);

}  // namespace headhunt
