#include "elp/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace elp::cluster {

namespace {

// One k-means++ seeded Lloyd run.
KMeansResult lloyd_run(const Matrix& points, const KMeansConfig& cfg,
                       Rng rng) {
  const std::size_t n = points.rows;
  const std::size_t k = cfg.k;

  // k-means++: first centroid uniform, then proportional to squared distance
  // from the chosen set.
  Matrix centroids(k, points.cols);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t first = static_cast<std::size_t>(rng.uniform_int(n));
  std::copy_n(points.row(first).begin(), points.cols,
              centroids.row(0).begin());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i],
                       squared_distance(points.row(i), centroids.row(c - 1)));
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(rng.uniform_int(n));
    }
    std::copy_n(points.row(pick).begin(), points.cols,
                centroids.row(c).begin());
  }

  KMeansResult res;
  res.centroids = std::move(centroids);
  res.assignment.assign(n, 0);

  auto run_lloyd = [&]() {
    double prev_objective = std::numeric_limits<double>::infinity();
    for (std::size_t iter = 0; iter < cfg.max_iter; ++iter) {
      res.iterations = iter + 1;

      double objective = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        res.assignment[i] = nearest_centroid(res.centroids, points.row(i));
        objective += squared_distance(points.row(i),
                                      res.centroids.row(res.assignment[i]));
      }
      if (objective >
          prev_objective + 1e-9 * std::max(1.0, std::abs(prev_objective)))
        throw Error("kmeans: objective increased between iterations");
      prev_objective = objective;
      res.objective = objective;

      // Update step.
      Matrix next(res.centroids.rows, res.centroids.cols);
      std::vector<std::size_t> counts(k, 0);
      for (std::size_t i = 0; i < n; ++i) {
        auto dst = next.row(res.assignment[i]);
        auto src = points.row(i);
        for (std::size_t j = 0; j < points.cols; ++j) dst[j] += src[j];
        ++counts[res.assignment[i]];
      }
      for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) continue;
        auto row = next.row(c);
        for (std::size_t j = 0; j < points.cols; ++j)
          row[j] /= static_cast<double>(counts[c]);
      }

      // Empty-cluster repair: each empty cluster takes the point currently
      // farthest from its own centroid.
      std::vector<bool> stolen(n, false);
      for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] != 0) continue;
        std::size_t far = SIZE_MAX;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (stolen[i] || counts[res.assignment[i]] <= 1) continue;
          double d = squared_distance(points.row(i),
                                      res.centroids.row(res.assignment[i]));
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        if (far == SIZE_MAX) break;  // fewer distinct points than clusters
        stolen[far] = true;
        --counts[res.assignment[far]];
        counts[c] = 1;
        std::copy_n(points.row(far).begin(), points.cols,
                    next.row(c).begin());
        // The donor cluster's mean still includes the stolen point for this
        // iteration; the next assignment pass sorts that out.
        prev_objective = std::numeric_limits<double>::infinity();
      }

      double max_shift = 0.0;
      for (std::size_t c = 0; c < k; ++c)
        max_shift = std::max(
            max_shift, std::sqrt(squared_distance(res.centroids.row(c),
                                                  next.row(c))));
      res.centroids = std::move(next);
      if (max_shift < cfg.tol) break;
    }
  };

  // Single-point move refinement: moving x from cluster a (size na) to b
  // changes the objective by nb/(nb+1)*d(x,mb) - na/(na-1)*d(x,ma), which
  // can be negative even when Lloyd has converged. Sweeps until no move
  // improves, updating means incrementally.
  auto refine_moves = [&]() {
    std::vector<std::size_t> counts(k, 0);
    Matrix means(res.centroids.rows, res.centroids.cols);
    for (std::size_t i = 0; i < n; ++i) {
      res.assignment[i] = nearest_centroid(res.centroids, points.row(i));
      auto dst = means.row(res.assignment[i]);
      auto src = points.row(i);
      for (std::size_t j = 0; j < points.cols; ++j) dst[j] += src[j];
      ++counts[res.assignment[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) return false;  // repair owns this case
      auto row = means.row(c);
      for (std::size_t j = 0; j < points.cols; ++j)
        row[j] /= static_cast<double>(counts[c]);
    }

    bool any_move = false;
    for (std::size_t sweep = 0; sweep < cfg.max_iter; ++sweep) {
      bool moved = false;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = res.assignment[i];
        if (counts[a] <= 1) continue;
        const double na = static_cast<double>(counts[a]);
        const double gain =
            na / (na - 1.0) * squared_distance(points.row(i), means.row(a));
        std::size_t best = a;
        double best_cost = gain;
        for (std::size_t b = 0; b < k; ++b) {
          if (b == a) continue;
          const double nb = static_cast<double>(counts[b]);
          const double cost = nb / (nb + 1.0) *
                              squared_distance(points.row(i), means.row(b));
          if (cost + 1e-12 < best_cost) {
            best_cost = cost;
            best = b;
          }
        }
        if (best == a) continue;

        auto x = points.row(i);
        auto ma = means.row(a);
        auto mb = means.row(best);
        const double na1 = static_cast<double>(counts[a] - 1);
        const double nb1 = static_cast<double>(counts[best] + 1);
        for (std::size_t j = 0; j < points.cols; ++j) {
          ma[j] += (ma[j] - x[j]) / na1;
          mb[j] += (x[j] - mb[j]) / nb1;
        }
        --counts[a];
        ++counts[best];
        res.assignment[i] = best;
        moved = true;
        any_move = true;
      }
      if (!moved) break;
    }
    if (any_move) res.centroids = means;
    return any_move;
  };

  run_lloyd();
  for (int round = 0; round < 3; ++round) {
    if (!refine_moves()) break;
    run_lloyd();
  }

  // Final assignment against the last centroids.
  double objective = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    res.assignment[i] = nearest_centroid(res.centroids, points.row(i));
    objective += squared_distance(points.row(i),
                                  res.centroids.row(res.assignment[i]));
  }
  res.objective = objective;
  return res;
}

}  // namespace

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::size_t nearest_centroid(const Matrix& centroids,
                             std::span<const double> point) {
  if (centroids.rows == 0) throw Error("nearest_centroid: no centroids");
  if (point.size() != centroids.cols)
    throw Error("nearest_centroid: dimension mismatch: point " +
                std::to_string(point.size()) + ", centroids " +
                std::to_string(centroids.cols));
  std::size_t best = 0;
  double best_d = squared_distance(centroids.row(0), point);
  for (std::size_t c = 1; c < centroids.rows; ++c) {
    double d = squared_distance(centroids.row(c), point);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

KMeansResult kmeans_fit(const Matrix& points, const KMeansConfig& cfg) {
  if (cfg.k < 2) throw Error("kmeans: k must be at least 2");
  if (points.rows < cfg.k)
    throw Error("kmeans: " + std::to_string(points.rows) +
                " points cannot fill " + std::to_string(cfg.k) + " clusters");
  if (cfg.restarts == 0) throw Error("kmeans: restarts must be positive");
  if (cfg.tol <= 0.0) throw Error("kmeans: tol must be positive");

  Rng base = make_rng(cfg.seed);
  KMeansResult best;
  bool have_best = false;
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    KMeansResult run = lloyd_run(points, cfg, base.child(r + 1));
    if (!have_best || run.objective < best.objective) {
      best = std::move(run);
      have_best = true;
    }
  }
  return best;
}

double silhouette_score(const Matrix& points,
                        std::span<const std::size_t> assignment,
                        std::size_t k) {
  const std::size_t n = points.rows;
  if (assignment.size() != n)
    throw Error("silhouette: assignment size mismatch");
  if (k < 2) throw Error("silhouette: need at least 2 clusters");

  std::vector<std::size_t> counts(k, 0);
  for (std::size_t a : assignment) {
    if (a >= k) throw Error("silhouette: assignment id out of range");
    ++counts[a];
  }

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (counts[assignment[i]] <= 1) continue;  // singleton scores 0
    std::vector<double> mean_dist(k, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      mean_dist[assignment[j]] +=
          std::sqrt(squared_distance(points.row(i), points.row(j)));
    }
    double a_i = mean_dist[assignment[i]] /
                 static_cast<double>(counts[assignment[i]] - 1);
    double b_i = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c == assignment[i] || counts[c] == 0) continue;
      b_i = std::min(b_i, mean_dist[c] / static_cast<double>(counts[c]));
    }
    if (!std::isfinite(b_i)) continue;  // single nonempty cluster
    total += (b_i - a_i) / std::max(a_i, b_i);
  }
  return total / static_cast<double>(n);
}

}  // namespace elp::cluster
