#pragma once

#include "modgraph/graph.hpp"
#include "modgraph/network.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>

namespace modgraph {

/// L_norm = D^{-1} (D - A) as an operator, together with its symmetric
/// similarity transform L_sym = D^{-1/2} (D - A) D^{-1/2}. If (lambda, v)
/// is an eigenpair of L_sym then (lambda, D^{-1/2} v) is one of L_norm.
class NormalizedLaplacian {
 public:
  /// Throws ContractViolation if any degree is not strictly positive.
  explicit NormalizedLaplacian(const WeightedGraph& g);

  int size() const { return static_cast<int>(inv_sqrt_degree_.size()); }

  /// L_norm * x
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  /// L_sym * x
  Eigen::VectorXd apply_symmetric(const Eigen::VectorXd& x) const;
  /// D^{-1/2} A D^{-1/2} * X, the operator whose top eigenvectors are the
  /// bottom eigenvectors of L_sym (L_sym = I - M).
  Eigen::MatrixXd apply_similarity(const Eigen::MatrixXd& x) const;

  Eigen::MatrixXd dense_symmetric() const;

  /// D^{-1/2} v
  Eigen::VectorXd to_random_walk(const Eigen::VectorXd& v) const;
  /// D^{1/2} u
  Eigen::VectorXd to_symmetric(const Eigen::VectorXd& u) const;

 private:
  Eigen::VectorXd inv_sqrt_degree_;
  SparseAdjacency normalized_adjacency_;  // D^{-1/2} A D^{-1/2}
};

enum class EigenSolverKind { kAuto, kDense, kKrylov };

std::string to_string(EigenSolverKind kind);
EigenSolverKind parse_eigen_solver(const std::string& name);

struct EigenSolverOptions {
  EigenSolverKind kind = EigenSolverKind::kAuto;
  /// Residual bound ||L_norm u - lambda u|| <= tol ||u|| for every pair.
  double tol = 1e-8;
  /// kAuto picks the dense solver up to this many vertices.
  int dense_max_vertices = 600;
  /// Krylov basis size (0 picks a default from k and N).
  int krylov_basis = 0;
  int max_restarts = 2000;
};

/// The k least eigenpairs of L_norm. Row j of `vectors` is eigenvector u_j
/// (unit Euclidean norm); column n is the embedding y_n of vertex n.
struct SpectralEmbedding {
  Eigen::MatrixXd vectors;       // k x N
  Eigen::VectorXd eigenvalues;   // nondecreasing, clamped at 0
  double max_residual = 0.0;     // max_j ||L_norm u_j - lambda_j u_j||
  std::string solver;            // "dense" or "krylov"
  int iterations = 0;            // Krylov restarts (0 for dense)

  int k() const { return static_cast<int>(vectors.rows()); }
};

/// Throws SolverError (with the achieved residual) if the Krylov path fails
/// to converge within its budget, ContractViolation for k outside [1, N].
SpectralEmbedding smallest_eigenvectors(const WeightedGraph& g, int k,
                                        const EigenSolverOptions& options = {},
                                        std::uint64_t seed = 0);

struct KMeansOptions {
  int restarts = 10;
  int max_iterations = 300;
  /// Stop when the inertia improves by less than this fraction.
  double relative_tolerance = 1e-6;
};

struct KMeansResult {
  Partition partition;
  Eigen::MatrixXd centroids;  // dim x k
  double inertia = 0.0;
  int iterations = 0;         // Lloyd iterations of the winning restart
  int best_restart = 0;
};

/// Lloyd's algorithm with k-means++ seeding on the columns of `points`,
/// keeping the restart with least inertia. Nearest-centroid ties go to the
/// lowest cluster index. A cluster that empties is re-seeded with the point
/// farthest from its centroid (taken from a cluster with more than one
/// member), so every returned cluster is nonempty.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                    const KMeansOptions& options = {});

struct SpectralOptions {
  EigenSolverOptions eigen;
  KMeansOptions kmeans;
};

struct ClusteringResult {
  Partition partition;
  double ncut_value = 0.0;
  SpectralEmbedding embedding;
  double kmeans_inertia = 0.0;
  int kmeans_iterations = 0;
  std::uint64_t seed = 0;
};

/// Normalized spectral clustering of an existing graph.
ClusteringResult cluster_graph(const WeightedGraph& g, int k, std::uint64_t seed,
                               const SpectralOptions& options = {});

/// network_to_graph followed by cluster_graph. The reported n-cut is
/// recomputed from the returned partition.
ClusteringResult cluster_network(const LayeredNetwork& net, int k,
                                 std::uint64_t seed,
                                 const SpectralOptions& options = {});

/// JSON document with the n-cut, eigenvalues, per-vertex assignment, seed
/// and solver diagnostics.
std::string clustering_to_json(const WeightedGraph& g, const ClusteringResult& r);

}  // namespace modgraph
