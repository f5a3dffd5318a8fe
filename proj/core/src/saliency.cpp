#include "headhunt/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "headhunt/error.hpp"
#include "headhunt/parallel.hpp"
#include "headhunt/random.hpp"

namespace headhunt {

namespace {

void require_same_dim(const SampleMatrix& a, const SampleMatrix& b) {
  if (a.cols() != b.cols()) {
    throw ValidationError("sample dimensions differ: " + std::to_string(a.cols()) + " vs " +
                          std::to_string(b.cols()));
  }
}

Eigen::MatrixXd scatter(const SampleMatrix& x) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  return centered.transpose() * centered;
}

// Total order on sample sets so that symmetric metrics can evaluate their
// arguments in a fixed order.
bool set_precedes(const SampleMatrix& a, const SampleMatrix& b) {
  if (a.rows() != b.rows()) return a.rows() < b.rows();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (a(i, j) != b(i, j)) return a(i, j) < b(i, j);
    }
  }
  return false;
}

double kernel_mean(const SampleMatrix& x, const SampleMatrix& y, double inv_two_h2) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < y.rows(); ++j) {
      const double k = std::exp(-(x.row(i) - y.row(j)).squaredNorm() * inv_two_h2);
      if (!std::isfinite(k)) throw NumericalError("non-finite kernel value in MMD");
      sum += k;
    }
  }
  return sum / (static_cast<double>(x.rows()) * static_cast<double>(y.rows()));
}

Eigen::LLT<Eigen::MatrixXd> cholesky(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string(what) + " is not positive-definite after regularization");
  }
  return llt;
}

SaliencyScores compute_cell(const SampleMatrix& normal, const SampleMatrix& abnormal,
                            const SaliencyOptions& options, std::uint64_t seed) {
  SaliencyScores s;
  s.lda = lda_score(normal, abnormal, options.regularization);
  s.kl = symmetrized_kl(GaussianClassModel::fit(normal, options.regularization),
                        GaussianClassModel::fit(abnormal, options.regularization));
  s.mmd2 = mmd2(normal, abnormal, options.kernel);
  s.nmi = nmi_score(normal, abnormal, seed, options.kmeans).value;
  return s;
}

ClassSamples gather(std::span<const CalibrationFeatureRecord> records, std::span<const int> labels,
                    const ModelSpec& model, int global_index) {
  const Eigen::Index d = model.head_dim;
  const auto n_abnormal = std::count(labels.begin(), labels.end(), 1);
  const auto n_normal = static_cast<Eigen::Index>(labels.size()) - n_abnormal;
  ClassSamples out{SampleMatrix(n_normal, d), SampleMatrix(n_abnormal, d)};
  Eigen::Index in = 0, ia = 0;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto row = slice_head(records[r], model, global_index);
    auto& target = labels[r] == 1 ? out.abnormal : out.normal;
    const Eigen::Index i = labels[r] == 1 ? ia++ : in++;
    for (Eigen::Index j = 0; j < d; ++j) target(i, j) = static_cast<double>(row[j]);
  }
  return out;
}

void require_class_sizes(const ClassSamples& s) {
  if (s.normal.rows() < 2 || s.abnormal.rows() < 2) {
    throw ValidationError("saliency needs at least 2 normal and 2 abnormal samples (got " +
                          std::to_string(s.normal.rows()) + " normal, " +
                          std::to_string(s.abnormal.rows()) + " abnormal)");
  }
}

}  // namespace

Eigen::MatrixXd regularize(const Eigen::MatrixXd& m, const Regularization& reg) {
  if (reg.shrinkage < 0.0 || reg.shrinkage > 1.0 || reg.jitter < 0.0) {
    throw ValidationError("shrinkage must lie in [0, 1] and jitter must be non-negative");
  }
  const auto d = m.rows();
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  const double target = sym.trace() / static_cast<double>(d);
  Eigen::MatrixXd out = (1.0 - reg.shrinkage) * sym;
  out.diagonal().array() += reg.shrinkage * target + reg.jitter;
  return out;
}

Eigen::MatrixXd within_class_scatter(const SampleMatrix& normal, const SampleMatrix& abnormal) {
  require_same_dim(normal, abnormal);
  return scatter(normal) + scatter(abnormal);
}

double lda_score(const SampleMatrix& normal, const SampleMatrix& abnormal, const Regularization& reg) {
  require_same_dim(normal, abnormal);
  if (normal.rows() < 2 || abnormal.rows() < 2) {
    throw ValidationError("LDA score needs at least 2 samples per class");
  }
  const Eigen::VectorXd delta = (abnormal.colwise().mean() - normal.colwise().mean()).transpose();
  const auto llt = cholesky(regularize(within_class_scatter(normal, abnormal), reg),
                            "within-class scatter");
  const double score = delta.dot(llt.solve(delta));
  if (!std::isfinite(score)) throw NumericalError("non-finite LDA score");
  return std::max(0.0, score);
}

GaussianClassModel GaussianClassModel::fit(const SampleMatrix& samples, const Regularization& reg) {
  if (samples.rows() < 2) throw ValidationError("Gaussian fit needs at least 2 samples");
  GaussianClassModel model;
  model.mean = samples.colwise().mean().transpose();
  model.covariance = regularize(scatter(samples) / static_cast<double>(samples.rows() - 1), reg);
  model.shrinkage_alpha = reg.shrinkage;
  model.jitter = reg.jitter;
  return model;
}

GaussianClassModel GaussianClassModel::from_moments(Eigen::VectorXd mean,
                                                    const Eigen::MatrixXd& covariance,
                                                    const Regularization& reg) {
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size()) {
    throw ValidationError("covariance shape does not match mean");
  }
  GaussianClassModel model;
  model.mean = std::move(mean);
  model.covariance = regularize(covariance, reg);
  model.shrinkage_alpha = reg.shrinkage;
  model.jitter = reg.jitter;
  return model;
}

double gaussian_kl(const GaussianClassModel& p, const GaussianClassModel& q) {
  if (p.dim() != q.dim()) throw ValidationError("Gaussian models differ in dimension");
  const auto llt_p = cholesky(p.covariance, "covariance");
  const auto llt_q = cholesky(q.covariance, "covariance");
  const Eigen::VectorXd delta = q.mean - p.mean;
  const double trace_term = llt_q.solve(p.covariance).trace();
  const double quad = delta.dot(llt_q.solve(delta));
  const double logdet_p = 2.0 * llt_p.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double logdet_q = 2.0 * llt_q.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double kl =
      0.5 * (trace_term + quad - static_cast<double>(p.dim()) + logdet_q - logdet_p);
  if (!std::isfinite(kl)) throw NumericalError("non-finite KL divergence");
  return kl;
}

double symmetrized_kl(const GaussianClassModel& normal, const GaussianClassModel& abnormal) {
  const double forward = gaussian_kl(abnormal, normal);
  const double backward = gaussian_kl(normal, abnormal);
  return std::max(0.0, 0.5 * (forward + backward));
}

double median_heuristic_bandwidth(const SampleMatrix& a, const SampleMatrix& b) {
  require_same_dim(a, b);
  SampleMatrix pooled(a.rows() + b.rows(), a.cols());
  pooled << a, b;
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(pooled.rows() * (pooled.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < pooled.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < pooled.rows(); ++j) {
      dist.push_back((pooled.row(i) - pooled.row(j)).norm());
    }
  }
  if (dist.empty()) return 1.0;
  std::sort(dist.begin(), dist.end());
  const std::size_t m = dist.size();
  const double median = m % 2 == 1 ? dist[m / 2] : 0.5 * (dist[m / 2 - 1] + dist[m / 2]);
  return median > 0.0 ? median : 1.0;
}

double resolve_bandwidth(const SampleMatrix& a, const SampleMatrix& b, const KernelSpec& kernel) {
  if (kernel.is_median_heuristic()) return median_heuristic_bandwidth(a, b);
  const double h = *kernel.bandwidth;
  if (!(h > 0.0) || !std::isfinite(h)) throw ValidationError("kernel bandwidth must be positive");
  return h;
}

double mmd2(const SampleMatrix& normal, const SampleMatrix& abnormal, const KernelSpec& kernel) {
  require_same_dim(normal, abnormal);
  if (normal.rows() == 0 || abnormal.rows() == 0) throw ValidationError("MMD needs non-empty classes");
  const bool keep = !set_precedes(abnormal, normal);
  const SampleMatrix& x = keep ? normal : abnormal;
  const SampleMatrix& y = keep ? abnormal : normal;
  const double h = resolve_bandwidth(x, y, kernel);
  const double inv = 1.0 / (2.0 * h * h);
  const double value = kernel_mean(x, x, inv) + kernel_mean(y, y, inv) - 2.0 * kernel_mean(x, y, inv);
  if (!std::isfinite(value)) throw NumericalError("non-finite MMD estimate");
  return std::max(0.0, value);
}

NmiResult nmi_score(const SampleMatrix& normal, const SampleMatrix& abnormal, std::uint64_t seed,
                    const KMeansOptions& options) {
  require_same_dim(normal, abnormal);
  const Eigen::Index n = normal.rows() + abnormal.rows();
  if (n < 2) throw ValidationError("NMI needs at least 2 pooled points");
  SampleMatrix pooled(n, normal.cols());
  pooled << normal, abnormal;
  bool identical = true;
  for (Eigen::Index i = 1; i < n && identical; ++i) identical = pooled.row(i) == pooled.row(0);
  if (identical) return {0.0, true};

  std::vector<int> truth(static_cast<std::size_t>(n), 0);
  std::fill(truth.begin() + normal.rows(), truth.end(), 1);
  KMeansOptions opts = options;
  opts.clusters = 2;
  const auto clustering = kmeans(pooled, opts, seed);
  return {normalized_mutual_information(truth, clustering.labels), false};
}

double SaliencyScores::metric(int i) const {
  switch (i) {
    case 0: return lda;
    case 1: return kl;
    case 2: return mmd2;
    case 3: return nmi;
  }
  throw ValidationError("metric index out of range");
}

double& SaliencyScores::metric(int i) {
  switch (i) {
    case 0: return lda;
    case 1: return kl;
    case 2: return mmd2;
    case 3: return nmi;
  }
  throw ValidationError("metric index out of range");
}

ClassSamples collect_head_samples(std::span<const CalibrationFeatureRecord> records,
                                  const BankManifest& manifest, int global_index) {
  std::vector<int> labels;
  labels.reserve(records.size());
  for (const auto& r : records) labels.push_back(manifest.video(r.video_id).label);
  return gather(records, labels, manifest.model, global_index);
}

SaliencyScores compute_saliency(const ClassSamples& samples, const SaliencyOptions& options,
                                std::uint64_t seed) {
  require_class_sizes(samples);
  return compute_cell(samples.normal, samples.abnormal, options, seed);
}

SaliencyScores head_saliency(const HeadBank& bank, int global_index, const std::string& prompt_id,
                             const SaliencyOptions& options, std::uint64_t seed) {
  const auto records = bank.records_for_prompt(prompt_id);
  return compute_saliency(collect_head_samples(records, bank.manifest(), global_index), options, seed);
}

NormalizedSaliency normalize_and_average(std::span<const SaliencyScores> raw) {
  if (raw.size() < 2) throw ValidationError("normalization needs at least 2 heads");
  NormalizedSaliency out;
  out.normalized.resize(raw.size());
  out.score.assign(raw.size(), 0.0);
  for (int m = 0; m < SaliencyScores::kMetricCount; ++m) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& s : raw) {
      const double v = s.metric(m);
      if (!std::isfinite(v)) throw NumericalError("non-finite raw saliency score");
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double range = hi - lo;
    for (std::size_t k = 0; k < raw.size(); ++k) {
      out.normalized[k].metric(m) = range > 0.0 ? (raw[k].metric(m) - lo) / range : 0.5;
    }
  }
  for (std::size_t k = 0; k < raw.size(); ++k) {
    const auto& n = out.normalized[k];
    out.score[k] = (n.lda + n.kl + n.mmd2 + n.nmi) / 4.0;
  }
  return out;
}

const PromptSaliency& SaliencyTable::prompt(const std::string& id) const {
  for (const auto& p : prompts)
    if (p.prompt_id == id) return p;
  throw ValidationError("saliency table has no prompt '" + id + "'");
}

std::uint64_t saliency_cell_seed(std::uint64_t base, std::size_t prompt_index, int global_index) {
  return derive_seed(base, {0x5a11e5cull, prompt_index, static_cast<std::uint64_t>(global_index)});
}

SaliencyTable build_saliency_table(const HeadBank& bank, const SaliencyOptions& options,
                                   std::uint64_t seed, int workers) {
  if (!bank.has_features()) throw ValidationError("bank has no calibration features");
  const auto& manifest = bank.manifest();
  const int n_heads = manifest.model.total_heads();
  SaliencyTable table;
  for (std::size_t m = 0; m < manifest.prompts.size(); ++m) {
    const auto& prompt_id = manifest.prompts[m].id;
    const auto records = bank.records_for_prompt(prompt_id);
    std::vector<int> labels;
    for (const auto& r : records) labels.push_back(manifest.video(r.video_id).label);

    std::vector<SaliencyScores> raw(static_cast<std::size_t>(n_heads));
    parallel_for(raw.size(), workers, [&](std::size_t k) {
      const auto samples = gather(records, labels, manifest.model, static_cast<int>(k));
      require_class_sizes(samples);
      raw[k] = compute_cell(samples.normal, samples.abnormal, options,
                            saliency_cell_seed(seed, m, static_cast<int>(k)));
    });

    const auto norm = normalize_and_average(raw);
    PromptSaliency ps{prompt_id, {}};
    ps.heads.reserve(raw.size());
    for (int k = 0; k < n_heads; ++k) {
      ps.heads.push_back({k, raw[k], norm.normalized[k], norm.score[k]});
    }
    table.prompts.push_back(std::move(ps));
  }
  return table;
}

}  // namespace headhunt
