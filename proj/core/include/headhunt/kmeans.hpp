#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace headhunt {

struct KMeansOptions {
  int clusters = 2;
  int restarts = 10;
  int max_iterations = 300;
};

struct KMeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;  // clusters x dim
  double inertia = 0.0;       // within-cluster sum of squares
  int iterations = 0;
  bool converged = false;
};

// Lloyd's algorithm with k-means++ seeding; the restart with the lowest
// inertia wins (earliest restart on ties). Rows of `points` are samples.
// Iteration stops when assignments no longer change.
KMeansResult kmeans(const Eigen::MatrixXd& points, const KMeansOptions& options,
                    std::uint64_t seed);

// I(a, b) / sqrt(H(a) H(b)) with natural logarithms. Returns 0 when either
// labeling has a single class.
double normalized_mutual_information(std::span<const int> a, std::span<const int> b);

}  // namespace headhunt
