#include "headhunt/scorer.hpp"

#include <cmath>
#include <limits>

#include "headhunt/error.hpp"

namespace headhunt {

namespace {

double softplus(double z) noexcept { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double logit_of(const ScorerModel& model, auto features) {
  if (static_cast<Eigen::Index>(features.size()) != model.dim()) {
    throw ValidationError("feature vector has " + std::to_string(features.size()) +
                          " entries, scorer expects " + std::to_string(model.dim()));
  }
  double z = model.bias;
  for (Eigen::Index j = 0; j < model.dim(); ++j) {
    const double v = static_cast<double>(features[static_cast<std::size_t>(j)]);
    if (!std::isfinite(v)) throw ValidationError("non-finite feature passed to the scorer");
    z += model.weights[j] * (v - model.standardization.mean[j]) / model.standardization.scale[j];
  }
  return z;
}

}  // namespace

std::vector<double> composite_features(const CalibrationFeatureRecord& record, const ModelSpec& model,
                                       std::span<const int> expert_indices) {
  std::vector<double> z;
  z.reserve(expert_indices.size() * static_cast<std::size_t>(model.head_dim));
  for (int k : expert_indices) {
    for (float v : slice_head(record, model, k)) z.push_back(static_cast<double>(v));
  }
  return z;
}

LabeledSet build_composite(const HeadBank& bank, const ExpertHeadSet& experts,
                           const std::optional<std::string>& prompt_id) {
  if (!(experts.model == bank.model())) {
    throw ValidationError("expert set was selected for model '" + experts.model.name +
                          "' with a different shape than the bank's model '" + bank.model().name + "'");
  }
  if (experts.heads.empty()) throw ValidationError("expert set is empty");
  const auto indices = experts.global_indices();
  const auto& manifest = bank.manifest();
  std::vector<std::string> prompts;
  if (prompt_id) {
    manifest.prompt(*prompt_id);
    prompts.push_back(*prompt_id);
  } else {
    for (const auto& p : manifest.prompts) prompts.push_back(p.id);
  }
  const auto width = static_cast<Eigen::Index>(indices.size()) * manifest.model.head_dim;
  const auto n = static_cast<Eigen::Index>(prompts.size() * manifest.videos.size());
  LabeledSet out{Eigen::MatrixXd(n, width), Eigen::VectorXd(n), {}};
  Eigen::Index row = 0;
  for (const auto& p : prompts) {
    for (const auto& v : manifest.videos) {
      const auto z = composite_features(bank.record(v.id, p), manifest.model, indices);
      for (Eigen::Index j = 0; j < width; ++j) out.x(row, j) = z[static_cast<std::size_t>(j)];
      out.y[row] = v.label;
      out.sample_ids.push_back(v.id + "/" + p);
      ++row;
    }
  }
  return out;
}

Standardization Standardization::fit(const Eigen::MatrixXd& x) {
  Standardization s;
  s.mean = x.colwise().mean().transpose();
  s.scale.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - s.mean[j]).square().mean();
    const double sd = std::sqrt(var);
    s.scale[j] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

Eigen::MatrixXd Standardization::apply(const Eigen::MatrixXd& x) const {
  return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

LogisticObjective::LogisticObjective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double l2)
    : x_(x), y_(y), l2_(l2) {
  if (x.rows() != y.size()) throw ValidationError("feature and label counts differ");
}

Eigen::VectorXd LogisticObjective::logits(const Eigen::VectorXd& theta) const {
  const Eigen::Index d = x_.cols();
  return (x_ * theta.head(d)).array() + theta[d];
}

double LogisticObjective::value(const Eigen::VectorXd& theta) const {
  const Eigen::Index d = x_.cols();
  const Eigen::VectorXd z = logits(theta);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) sum += softplus(z[i]) - y_[i] * z[i];
  return sum / static_cast<double>(z.size()) + 0.5 * l2_ * theta.head(d).squaredNorm();
}

Eigen::VectorXd LogisticObjective::gradient(const Eigen::VectorXd& theta) const {
  const Eigen::Index d = x_.cols();
  const Eigen::VectorXd z = logits(theta);
  Eigen::VectorXd r(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) r[i] = sigmoid(z[i]) - y_[i];
  const double inv_n = 1.0 / static_cast<double>(z.size());
  Eigen::VectorXd g(d + 1);
  g.head(d) = x_.transpose() * r * inv_n + l2_ * theta.head(d);
  g[d] = r.sum() * inv_n;
  return g;
}

Eigen::MatrixXd LogisticObjective::hessian(const Eigen::VectorXd& theta) const {
  const Eigen::Index d = x_.cols();
  const Eigen::Index n = x_.rows();
  const Eigen::VectorXd z = logits(theta);
  Eigen::MatrixXd xa(n, d + 1);
  xa.leftCols(d) = x_;
  xa.col(d).setOnes();
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = sigmoid(z[i]);
    w[i] = p * (1.0 - p);
  }
  Eigen::MatrixXd h = xa.transpose() * w.asDiagonal() * xa / static_cast<double>(n);
  h.diagonal().head(d).array() += l2_;
  return h;
}

double sigmoid(double z) noexcept {
  double p;
  if (z >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-z));
  } else {
    const double e = std::exp(z);
    p = e / (1.0 + e);
  }
  return std::clamp(p, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

ScorerModel train(const LabeledSet& data, const TrainOptions& options,
                  const std::optional<Eigen::VectorXd>& initial) {
  const Eigen::Index n = data.x.rows();
  const Eigen::Index d = data.x.cols();
  if (n == 0 || d == 0) throw ValidationError("training set is empty");
  if (data.y.size() != n) throw ValidationError("feature and label counts differ");
  if (options.l2 < 0.0 || !(options.tolerance > 0.0) || options.max_iterations < 1) {
    throw ValidationError("invalid training options");
  }
  Eigen::Index positives = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (data.y[i] != 0.0 && data.y[i] != 1.0) throw ValidationError("labels must be 0 or 1");
    positives += data.y[i] == 1.0;
  }
  if (positives == 0 || positives == n) {
    throw ValidationError("training data contains a single class");
  }
  if (!data.x.allFinite()) throw ValidationError("training data contains non-finite features");

  ScorerModel model;
  model.l2 = options.l2;
  model.standardization = Standardization::fit(data.x);
  const Eigen::MatrixXd xs = model.standardization.apply(data.x);
  auto& meta = model.training_meta;

  if (options.l2 == 0.0) {
    Eigen::MatrixXd xa(n, d + 1);
    xa.leftCols(d) = xs;
    xa.col(d).setOnes();
    const auto rank = Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(xa).rank();
    if (n <= d || rank < d + 1) {
      meta.warnings.push_back("l2 = 0 with rank-deficient design (rank " + std::to_string(rank) +
                              " for " + std::to_string(d + 1) +
                              " parameters); the optimum is not unique");
    }
  }

  const LogisticObjective objective(xs, data.y, options.l2);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
  if (initial) {
    if (initial->size() != d + 1) throw ValidationError("initial parameter vector has wrong length");
    theta = *initial;
  }

  double loss = objective.value(theta);
  if (!std::isfinite(loss)) throw NumericalError("non-finite loss at iteration 0");
  meta.initial_loss = loss;
  meta.loss_history.push_back(loss);
  Eigen::VectorXd grad = objective.gradient(theta);

  int it = 0;
  for (; it < options.max_iterations; ++it) {
    if (grad.norm() < options.tolerance) {
      meta.converged = true;
      break;
    }
    Eigen::VectorXd step;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(objective.hessian(theta));
    if (ldlt.info() == Eigen::Success) step = -ldlt.solve(grad);
    if (step.size() != theta.size() || !step.allFinite() || step.dot(grad) >= 0.0) step = -grad;

    const double slope = step.dot(grad);
    double t = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt, t *= 0.5) {
      const Eigen::VectorXd candidate = theta + t * step;
      const double cand_loss = objective.value(candidate);
      if (!std::isfinite(cand_loss)) continue;
      if (cand_loss <= loss + 1e-4 * t * slope) {
        theta = candidate;
        loss = cand_loss;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    if (!std::isfinite(loss)) {
      throw NumericalError("training diverged at iteration " + std::to_string(it + 1));
    }
    meta.loss_history.push_back(loss);
    grad = objective.gradient(theta);
    if (!grad.allFinite()) {
      throw NumericalError("non-finite gradient at iteration " + std::to_string(it + 1));
    }
  }
  if (!meta.converged && grad.norm() < options.tolerance) meta.converged = true;
  meta.iterations = it;
  meta.final_loss = loss;
  meta.gradient_norm = grad.norm();
  model.weights = theta.head(d);
  model.bias = theta[d];
  return model;
}

double predict(const ScorerModel& model, std::span<const double> features) {
  return sigmoid(logit_of(model, features));
}

double predict(const ScorerModel& model, std::span<const float> features) {
  return sigmoid(logit_of(model, features));
}

std::vector<double> predict_sequence(const ScorerModel& model, const SegmentFeatureSequence& seq) {
  std::vector<double> p;
  p.reserve(static_cast<std::size_t>(seq.n_segments));
  for (int t = 0; t < seq.n_segments; ++t) p.push_back(predict(model, seq.segment(t)));
  return p;
}

}  // namespace headhunt
