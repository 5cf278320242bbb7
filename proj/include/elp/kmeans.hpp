#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "elp/matrix.hpp"

namespace elp::cluster {

struct KMeansConfig {
  std::size_t k = 20;
  std::uint64_t seed = 1;
  std::size_t max_iter = 100;
  double tol = 1e-6;       // stop when the largest centroid shift drops below
  std::size_t restarts = 5;
};

struct KMeansResult {
  Matrix centroids;                     // k x dim
  std::vector<std::size_t> assignment;  // per input row, lowest id wins ties
  double objective = 0.0;               // sum of squared distances
  std::size_t iterations = 0;           // of the winning restart
};

double squared_distance(std::span<const double> a, std::span<const double> b);

// Index of the closest centroid; equal distances go to the lowest id.
std::size_t nearest_centroid(const Matrix& centroids,
                             std::span<const double> point);

// Lloyd's algorithm with k-means++ seeding, restarted `restarts` times with
// derived seeds; the restart with the lowest final objective wins. After
// Lloyd converges, single-point moves that lower the objective are applied
// until none remain, which escapes local minima Lloyd cannot. Empty clusters
// are repaired by stealing the point farthest from its centroid. The
// objective is checked to be non-increasing every Lloyd iteration.
KMeansResult kmeans_fit(const Matrix& points, const KMeansConfig& cfg);

// Mean silhouette coefficient of a clustering; singleton clusters score 0.
double silhouette_score(const Matrix& points,
                        std::span<const std::size_t> assignment,
                        std::size_t k);

}  // namespace elp::cluster
