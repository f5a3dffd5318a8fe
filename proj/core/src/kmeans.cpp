#include "headhunt/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "headhunt/error.hpp"
#include "headhunt/random.hpp"

namespace headhunt {

namespace {

double squared_distance(const Eigen::MatrixXd& points, Eigen::Index row,
                        const Eigen::MatrixXd& centroids, Eigen::Index c) {
  return (points.row(row) - centroids.row(c)).squaredNorm();
}

Eigen::MatrixXd seed_centroids(const Eigen::MatrixXd& points, int k, Rng& rng) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd centroids(k, points.cols());
  centroids.row(0) = points.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  std::vector<double> nearest(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points, i, centroids, c - 1));
      total += nearest[i];
    }
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      chosen = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += nearest[i];
        if (acc > target && nearest[i] > 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centroids.row(c) = points.row(chosen);
  }
  return centroids;
}

KMeansResult lloyd(const Eigen::MatrixXd& points, Eigen::MatrixXd centroids, int max_iterations) {
  const Eigen::Index n = points.rows();
  const Eigen::Index k = centroids.rows();
  KMeansResult result;
  result.labels.assign(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = squared_distance(points, i, centroids, 0);
      for (Eigen::Index c = 1; c < k; ++c) {
        const double d = squared_distance(points, i, centroids, c);
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      if (result.labels[i] != best) {
        result.labels[i] = best;
        changed = true;
      }
    }
    result.iterations = it + 1;
    if (!changed) {
      result.converged = true;
      break;
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(result.labels[i]) += points.row(i);
      ++counts[result.labels[i]];
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      // Empty clusters keep their previous centroid.
      if (counts[c] > 0) centroids.row(c) = sums.row(c) / static_cast<double>(counts[c]);
    }
  }
  result.inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    result.inertia += squared_distance(points, i, centroids, result.labels[i]);
  }
  result.centroids = std::move(centroids);
  return result;
}

double entropy(const std::map<int, std::size_t>& counts, double n) {
  double h = 0.0;
  for (const auto& [label, c] : counts) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, const KMeansOptions& options, std::uint64_t seed) {
  if (options.clusters < 1 || options.restarts < 1 || options.max_iterations < 1) {
    throw ValidationError("k-means options must be positive");
  }
  if (points.rows() < options.clusters) {
    throw ValidationError("k-means needs at least as many points as clusters");
  }
  Rng rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < options.restarts; ++r) {
    auto result = lloyd(points, seed_centroids(points, options.clusters, rng), options.max_iterations);
    if (result.inertia < best.inertia) best = std::move(result);
  }
  return best;
}

double normalized_mutual_information(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ValidationError("label vectors differ in length");
  if (a.empty()) throw ValidationError("empty label vectors");
  const double n = static_cast<double>(a.size());
  std::map<int, std::size_t> ca, cb;
  std::map<std::pair<int, int>, std::size_t> joint;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++ca[a[i]];
    ++cb[b[i]];
    ++joint[{a[i], b[i]}];
  }
  const double ha = entropy(ca, n);
  const double hb = entropy(cb, n);
  if (ca.size() < 2 || cb.size() < 2) return 0.0;
  double mi = 0.0;
  for (const auto& [key, c] : joint) {
    const double pij = static_cast<double>(c) / n;
    const double pi = static_cast<double>(ca[key.first]) / n;
    const double pj = static_cast<double>(cb[key.second]) / n;
    mi += pij * std::log(pij / (pi * pj));
  }
  const double nmi = mi / std::sqrt(ha * hb);
  return std::clamp(nmi, 0.0, 1.0);
}

}  // namespace headhunt
