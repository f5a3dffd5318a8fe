#pragma once

// Per-head discriminability between normal and abnormal feature sets.
//
// Sample sets are Eigen matrices with one sample per row. All statistics are
// computed in double precision regardless of storage precision.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "headhunt/headbank.hpp"
#include "headhunt/kmeans.hpp"

namespace headhunt {

using SampleMatrix = Eigen::MatrixXd;

// Shrinkage towards a scaled identity, (1 - a) S + a (tr(S)/d) I, followed by
// `jitter` on the diagonal.
struct Regularization {
  double shrinkage = 0.1;
  double jitter = 1e-6;
};

Eigen::MatrixXd regularize(const Eigen::MatrixXd& matrix, const Regularization& reg);

// Sum over both classes of the centered outer products.
Eigen::MatrixXd within_class_scatter(const SampleMatrix& normal, const SampleMatrix& abnormal);

// Fisher separability (mu_a - mu_n)^T S_W^-1 (mu_a - mu_n), with S_W the
// regularized sum of class scatter matrices. Applied through a Cholesky solve.
double lda_score(const SampleMatrix& normal, const SampleMatrix& abnormal,
                 const Regularization& reg = {});

struct GaussianClassModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // regularized, symmetric positive-definite
  double shrinkage_alpha = 0.0;
  double jitter = 0.0;

  // Sample mean and unbiased covariance (divisor n - 1), then regularized.
  static GaussianClassModel fit(const SampleMatrix& samples, const Regularization& reg = {});
  // Uses the given moments; the covariance is symmetrized and regularized.
  static GaussianClassModel from_moments(Eigen::VectorXd mean, const Eigen::MatrixXd& covariance,
                                         const Regularization& reg = {0.0, 0.0});

  Eigen::Index dim() const noexcept { return mean.size(); }
};

// D_KL(p || q) for Gaussians, closed form.
double gaussian_kl(const GaussianClassModel& p, const GaussianClassModel& q);

// 0.5 * (KL(a || n) + KL(n || a)). Exactly symmetric in its arguments.
double symmetrized_kl(const GaussianClassModel& normal, const GaussianClassModel& abnormal);

// Squared-exponential kernel k(x, y) = exp(-|x - y|^2 / (2 h^2)). An empty
// bandwidth selects the median heuristic over the pooled sample.
struct KernelSpec {
  std::optional<double> bandwidth;

  static KernelSpec median_heuristic() { return {}; }
  static KernelSpec fixed(double h) { return {h}; }
  bool is_median_heuristic() const noexcept { return !bandwidth.has_value(); }
};

// Median pairwise Euclidean distance over the pooled points, 1.0 if zero.
double median_heuristic_bandwidth(const SampleMatrix& a, const SampleMatrix& b);
double resolve_bandwidth(const SampleMatrix& a, const SampleMatrix& b, const KernelSpec& kernel);

// Biased (V-statistic) squared MMD with diagonal terms included. Clamped to
// be non-negative; bit-identical under swapping the two sets.
double mmd2(const SampleMatrix& normal, const SampleMatrix& abnormal, const KernelSpec& kernel);

struct NmiResult {
  double value = 0.0;
  bool degenerate = false;  // all pooled points identical
};

// Clusters the pooled features with seeded 2-means and compares the
// clustering to the class labels.
NmiResult nmi_score(const SampleMatrix& normal, const SampleMatrix& abnormal, std::uint64_t seed,
                    const KMeansOptions& options = {});

struct SaliencyScores {
  double lda = 0.0;
  double kl = 0.0;
  double mmd2 = 0.0;
  double nmi = 0.0;

  static constexpr int kMetricCount = 4;
  double metric(int i) const;
  double& metric(int i);

  friend bool operator==(const SaliencyScores&, const SaliencyScores&) = default;
};

struct SaliencyOptions {
  Regularization regularization;
  KernelSpec kernel;
  KMeansOptions kmeans;
};

struct ClassSamples {
  SampleMatrix normal;
  SampleMatrix abnormal;
};

// Head `global_index` of every record, split by the owning video's label.
ClassSamples collect_head_samples(std::span<const CalibrationFeatureRecord> records,
                                  const BankManifest& manifest, int global_index);

SaliencyScores compute_saliency(const ClassSamples& samples, const SaliencyOptions& options,
                                std::uint64_t seed);

// All four metrics for one head under one prompt, reading from the bank.
SaliencyScores head_saliency(const HeadBank& bank, int global_index, const std::string& prompt_id,
                             const SaliencyOptions& options, std::uint64_t seed);

struct NormalizedSaliency {
  std::vector<SaliencyScores> normalized;  // per head, each metric in [0, 1]
  std::vector<double> score;               // mean of the four normalized metrics
};

// Min-max normalization of each metric across heads; a metric with zero range
// contributes 0.5 to every head.
NormalizedSaliency normalize_and_average(std::span<const SaliencyScores> raw);

struct HeadSaliency {
  int global_index = 0;
  SaliencyScores raw;
  SaliencyScores normalized;
  double score = 0.0;
};

struct PromptSaliency {
  std::string prompt_id;
  std::vector<HeadSaliency> heads;
};

struct SaliencyTable {
  std::vector<PromptSaliency> prompts;

  const PromptSaliency& prompt(const std::string& id) const;
};

// Seed used for the k-means restarts of one (prompt, head) cell.
std::uint64_t saliency_cell_seed(std::uint64_t base, std::size_t prompt_index, int global_index);

// Scores every head under every prompt of the bank. Cells are evaluated on
// `workers` threads; the table does not depend on the worker count.
SaliencyTable build_saliency_table(const HeadBank& bank, const SaliencyOptions& options,
                                   std::uint64_t seed, int workers = 1);

}  // namespace headhunt
