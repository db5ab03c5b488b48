#include "modgraph/errors.hpp"
#include "modgraph/parallel.hpp"
#include "modgraph/spectral.hpp"

#include <limits>
#include <random>

namespace modgraph {

namespace {

struct Run {
  std::vector<int> assignment;
  Eigen::MatrixXd centroids;
  double inertia = 0.0;
  int iterations = 0;
};

Eigen::MatrixXd plus_plus_seeds(const Eigen::MatrixXd& points, int k,
                                std::mt19937_64& rng) {
  const Eigen::Index n = points.cols();
  Eigen::MatrixXd centroids(points.rows(), k);
  std::uniform_int_distribution<Eigen::Index> any(0, n - 1);
  centroids.col(0) = points.col(any(rng));

  Eigen::VectorXd nearest =
      (points.colwise() - centroids.col(0)).colwise().squaredNorm().transpose();
  for (int c = 1; c < k; ++c) {
    Eigen::Index chosen = 0;
    const double total = nearest.sum();
    if (total > 0.0) {
      std::discrete_distribution<Eigen::Index> weighted(nearest.data(),
                                                        nearest.data() + n);
      chosen = weighted(rng);
    } else {
      chosen = any(rng);
    }
    centroids.col(c) = points.col(chosen);
    nearest = nearest.cwiseMin(
        (points.colwise() - centroids.col(c)).colwise().squaredNorm().transpose());
  }
  return centroids;
}

// Moves the farthest-from-centroid point of a multi-member cluster into each
// empty cluster. Returns true if anything moved.
bool fill_empty_clusters(const Eigen::MatrixXd& points, Eigen::MatrixXd& centroids,
                         std::vector<int>& assignment, std::vector<int>& sizes) {
  bool moved = false;
  const int k = static_cast<int>(sizes.size());
  for (int c = 0; c < k; ++c) {
    if (sizes[c] > 0) continue;
    Eigen::Index farthest = -1;
    double best = -1.0;
    for (Eigen::Index i = 0; i < points.cols(); ++i) {
      if (sizes[assignment[i]] <= 1) continue;
      const double d = (points.col(i) - centroids.col(assignment[i])).squaredNorm();
      if (d > best) {
        best = d;
        farthest = i;
      }
    }
    if (farthest < 0) {
      throw DegenerateInputError("k-means cannot fill an empty cluster");
    }
    --sizes[assignment[farthest]];
    assignment[farthest] = c;
    sizes[c] = 1;
    centroids.col(c) = points.col(farthest);
    moved = true;
  }
  return moved;
}

Run lloyd(const Eigen::MatrixXd& points, int k, std::mt19937_64& rng,
          const KMeansOptions& opt) {
  const Eigen::Index n = points.cols();
  Run run;
  run.centroids = plus_plus_seeds(points, k, rng);
  run.assignment.assign(n, -1);
  double previous = std::numeric_limits<double>::infinity();

  for (int iter = 1; iter <= opt.max_iterations; ++iter) {
    run.iterations = iter;
    bool changed = false;
    std::vector<int> sizes(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      int best_c = 0;
      double best_d = (points.col(i) - run.centroids.col(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (points.col(i) - run.centroids.col(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best_c = c;
        }
      }
      changed |= run.assignment[i] != best_c;
      run.assignment[i] = best_c;
      ++sizes[best_c];
    }
    changed |= fill_empty_clusters(points, run.centroids, run.assignment, sizes);

    run.centroids.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      run.centroids.col(run.assignment[i]) += points.col(i);
    }
    for (int c = 0; c < k; ++c) run.centroids.col(c) /= sizes[c];

    run.inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      run.inertia += (points.col(i) - run.centroids.col(run.assignment[i])).squaredNorm();
    }
    if (!changed || previous - run.inertia <= opt.relative_tolerance * previous) break;
    previous = run.inertia;
  }
  return run;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                    const KMeansOptions& options) {
  if (k < 1 || k > points.cols()) {
    throw ContractViolation("k-means needs 1 <= k <= number of points (k = " +
                            std::to_string(k) + ", points = " +
                            std::to_string(points.cols()) + ")");
  }
  if (options.restarts < 1 || options.max_iterations < 1) {
    throw ContractViolation("k-means needs at least one restart and iteration");
  }
  if (!points.allFinite()) throw ContractViolation("k-means points must be finite");

  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < options.restarts; ++r) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    Run run = lloyd(points, k, rng, options);
    if (run.inertia < best.inertia) {
      best.partition = {std::move(run.assignment), k};
      best.centroids = std::move(run.centroids);
      best.inertia = run.inertia;
      best.iterations = run.iterations;
      best.best_restart = r;
    }
  }
  return best;
}

}  // namespace modgraph
