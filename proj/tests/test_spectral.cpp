#include "modgraph/errors.hpp"
#include "modgraph/spectral.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

#include <doctest.h>
#include <json.hpp>

#include <random>

using namespace modgraph;

namespace {

WeightedGraph two_vertex(double w) {
  SparseAdjacency a(2, 2);
  std::vector<Eigen::Triplet<double>> t{{0, 1, w}, {1, 0, w}};
  a.setFromTriplets(t.begin(), t.end());
  return WeightedGraph::from_adjacency(a, {0, 1});
}

// Two disjoint sub-networks packed block-diagonally into one network.
LayeredNetwork block_diagonal(const LayeredNetwork& a, const LayeredNetwork& b) {
  std::vector<int> dims;
  for (int l = 0; l < a.num_layers(); ++l) dims.push_back(a.layer_dims[l] + b.layer_dims[l]);
  LayeredNetwork net = make_zero_network(dims);
  for (int l = 0; l < a.num_weight_layers(); ++l) {
    net.weights[l].topLeftCorner(a.weights[l].rows(), a.weights[l].cols()) = a.weights[l];
    net.weights[l].bottomRightCorner(b.weights[l].rows(), b.weights[l].cols()) = b.weights[l];
  }
  return net;
}

}  // namespace

TEST_CASE("normalized Laplacian annihilates constants") {
  const WeightedGraph g = network_to_graph(testutil::random_network({5, 4, 3}, 1));
  const NormalizedLaplacian lap(g);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(g.num_vertices());
  CHECK(lap.apply(ones).norm() < 1e-14);

  // L_norm = D^{-1/2} L_sym D^{1/2}, applied to a random vector.
  const Eigen::VectorXd x = Eigen::VectorXd::Random(g.num_vertices());
  const Eigen::VectorXd via_sym = lap.to_random_walk(lap.apply_symmetric(lap.to_symmetric(x)));
  CHECK((lap.apply(x) - via_sym).norm() < 1e-12);

  const Eigen::MatrixXd l = oracle::symmetric_laplacian(oracle::dense(g));
  CHECK((lap.dense_symmetric() - l).norm() < 1e-12);
  CHECK((lap.apply_symmetric(x) - l * x).norm() < 1e-12);
}

TEST_CASE("single edge graph has eigenvalues 0 and 2 for any weight") {
  for (double w : {0.01, 1.0, 250.0}) {
    const SpectralEmbedding e = smallest_eigenvectors(two_vertex(w), 2);
    CHECK(e.eigenvalues(0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(e.eigenvalues(1) == doctest::Approx(2.0).epsilon(1e-12));
    const auto jac = oracle::jacobi_eigenvalues(oracle::symmetric_laplacian(
        oracle::dense(two_vertex(w))));
    CHECK(jac[0] == doctest::Approx(0.0));
    CHECK(jac[1] == doctest::Approx(2.0));
  }
}

TEST_CASE("k = 1 returns the constant eigenvector") {
  const WeightedGraph g = network_to_graph(testutil::random_network({4, 3, 2}, 2));
  const SpectralEmbedding e = smallest_eigenvectors(g, 1);
  CHECK(e.eigenvalues(0) < 1e-10);
  const Eigen::VectorXd u = e.vectors.row(0).transpose();
  CHECK((u.array() - u(0)).abs().maxCoeff() < 1e-10);
  CHECK(u.norm() == doctest::Approx(1.0));
}

TEST_CASE("two components give a double zero eigenvalue and two embedding points") {
  const LayeredNetwork net = block_diagonal(testutil::random_network({3, 3, 2}, 3),
                                            testutil::random_network({2, 3, 2}, 4));
  const WeightedGraph g = network_to_graph(net);
  const SpectralEmbedding e = smallest_eigenvectors(g, 2);
  CHECK(e.eigenvalues(0) <= 1e-8);
  CHECK(e.eigenvalues(1) <= 1e-8);

  std::vector<int> component(g.num_vertices());
  for (int v = 0; v < g.num_vertices(); ++v) {
    const NeuronId id = g.neurons()[v];
    component[v] = id.index >= (id.layer == 0 ? 3 : (id.layer == 1 ? 3 : 2));
  }
  for (int v = 0; v < g.num_vertices(); ++v) {
    for (int w = 0; w < g.num_vertices(); ++w) {
      const double d = (e.vectors.col(v) - e.vectors.col(w)).norm();
      if (component[v] == component[w]) {
        CHECK(d < 1e-8);
      } else {
        CHECK(d > 1e-3);
      }
    }
  }

  const ClusteringResult r = cluster_network(net, 2, 5);
  CHECK(r.ncut_value == 0.0);
  CHECK(oracle::same_clustering(r.partition.assignment, component));
}

TEST_CASE("eigenvalues match a Jacobi oracle on small graphs") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const LayeredNetwork net = oracle::planted_two_block({2, 2, 2}, 0.1, seed);
    const WeightedGraph g = network_to_graph(net);
    const auto want = oracle::jacobi_eigenvalues(oracle::symmetric_laplacian(oracle::dense(g)));
    const SpectralEmbedding e = smallest_eigenvectors(g, 4);
    for (int j = 0; j < 4; ++j) {
      CHECK(e.eigenvalues(j) == doctest::Approx(want[j]).epsilon(1e-8));
    }
  }
}

TEST_CASE("embedding invariants: residuals, order, transform") {
  const WeightedGraph g = network_to_graph(testutil::random_network({12, 9, 9, 5}, 6));
  const NormalizedLaplacian lap(g);
  const SpectralEmbedding e = smallest_eigenvectors(g, 4);
  for (int j = 0; j < 4; ++j) {
    const Eigen::VectorXd u = e.vectors.row(j).transpose();
    const double lambda = e.eigenvalues(j);
    CHECK(lambda >= 0.0);
    if (j > 0) CHECK(lambda >= e.eigenvalues(j - 1));
    CHECK((lap.apply(u) - lambda * u).norm() <= 1e-8 * u.norm());
    const Eigen::VectorXd v = lap.to_symmetric(u);
    CHECK((lap.apply_symmetric(v) - lambda * v).norm() <= 1e-8 * v.norm());
  }
  CHECK(e.max_residual <= 1e-8);
}

TEST_CASE("Krylov and dense solvers agree") {
  const WeightedGraph g = network_to_graph(make_glorot_network({120, 64, 64, 64, 10}, 7));
  EigenSolverOptions dense;
  dense.kind = EigenSolverKind::kDense;
  EigenSolverOptions krylov;
  krylov.kind = EigenSolverKind::kKrylov;
  for (int k : {1, 2, 4, 7}) {
    CAPTURE(k);
    const SpectralEmbedding a = smallest_eigenvectors(g, k, dense);
    const SpectralEmbedding b = smallest_eigenvectors(g, k, krylov, 3);
    CHECK(b.solver == "krylov");
    CHECK(b.max_residual <= 1e-8);
    for (int j = 0; j < k; ++j) {
      CHECK(b.eigenvalues(j) == doctest::Approx(a.eigenvalues(j)).epsilon(1e-9));
    }
  }
}

TEST_CASE("Krylov handles a repeated zero eigenvalue") {
  const LayeredNetwork net = block_diagonal(make_glorot_network({30, 20, 10}, 1),
                                            make_glorot_network({30, 20, 10}, 2));
  const WeightedGraph g = network_to_graph(net);
  EigenSolverOptions krylov;
  krylov.kind = EigenSolverKind::kKrylov;
  const SpectralEmbedding e = smallest_eigenvectors(g, 3, krylov, 9);
  CHECK(e.eigenvalues(0) < 1e-8);
  CHECK(e.eigenvalues(1) < 1e-8);
  CHECK(e.eigenvalues(2) > 1e-3);
}

TEST_CASE("solver argument checks") {
  const WeightedGraph g = two_vertex(1.0);
  CHECK_THROWS_AS(smallest_eigenvectors(g, 0), ContractViolation);
  CHECK_THROWS_AS(smallest_eigenvectors(g, 3), ContractViolation);
  CHECK(parse_eigen_solver("krylov") == EigenSolverKind::kKrylov);
  CHECK_THROWS_AS(parse_eigen_solver("lobpcg"), ValidationError);
}

TEST_CASE("k-means recovers duplicate groups with zero inertia") {
  Eigen::MatrixXd pts(2, 9);
  pts << 0, 0, 0, 5, 5, 5, 0, 0, 0,
         0, 0, 0, 0, 0, 0, 5, 5, 5;
  const KMeansResult r = kmeans(pts, 3, 1);
  CHECK(r.inertia == 0.0);
  CHECK(oracle::same_clustering(r.partition.assignment, {0, 0, 0, 1, 1, 1, 2, 2, 2}));
}

TEST_CASE("k-means on identical points keeps every cluster nonempty") {
  const Eigen::MatrixXd pts = Eigen::MatrixXd::Ones(3, 6);
  const KMeansResult r = kmeans(pts, 2, 4);
  for (int s : r.partition.cluster_sizes()) CHECK(s > 0);
  CHECK(r.inertia == 0.0);
}

TEST_CASE("k-means matches the exhaustive two-partition optimum") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd pts(2, 8);
    for (int i = 0; i < 8; ++i) {
      const double cx = i < 4 ? 0.0 : 4.0;
      pts(0, i) = cx + noise(rng);
      pts(1, i) = noise(rng);
    }
    const auto [sse, assign] = oracle::best_two_means(pts);
    const KMeansResult r = kmeans(pts, 2, static_cast<std::uint64_t>(trial));
    CHECK(r.inertia == doctest::Approx(sse).epsilon(1e-12));
    CHECK(oracle::same_clustering(r.partition.assignment, assign));
  }
}

TEST_CASE("k-means argument checks") {
  const Eigen::MatrixXd pts = Eigen::MatrixXd::Random(2, 4);
  CHECK_THROWS_AS(kmeans(pts, 5, 0), ContractViolation);
  CHECK_THROWS_AS(kmeans(pts, 0, 0), ContractViolation);
  Eigen::MatrixXd bad = pts;
  bad(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(kmeans(bad, 2, 0), ContractViolation);
}

TEST_CASE("spectral n-cut on planted graphs equals the exhaustive minimum") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const LayeredNetwork net = oracle::planted_two_block({2, 4, 2, 2}, 0.1, seed);
    const WeightedGraph g = network_to_graph(net);
    REQUIRE(g.num_vertices() == 10);
    const ClusteringResult r = cluster_graph(g, 2, seed);
    CHECK(r.ncut_value == doctest::Approx(oracle::min_two_way_ncut(oracle::dense(g)))
                              .epsilon(1e-12));
  }
}

TEST_CASE("clustering results are deterministic and self-consistent") {
  const LayeredNetwork net = make_glorot_network({50, 30, 30, 10}, 12);
  const WeightedGraph g = network_to_graph(net);
  const ClusteringResult a = cluster_network(net, 4, 77);
  const ClusteringResult b = cluster_network(net, 4, 77);
  CHECK(a.partition == b.partition);
  CHECK(a.ncut_value == b.ncut_value);
  CHECK(a.ncut_value == ncut(g, a.partition));
  CHECK(a.embedding.k() == 4);

  const auto doc = nlohmann::json::parse(clustering_to_json(g, a));
  CHECK(doc["ncut"].get<double>() == a.ncut_value);
  CHECK(doc["seed"].get<std::uint64_t>() == 77);
  CHECK(doc["assignment"].size() == static_cast<std::size_t>(g.num_vertices()));
  CHECK(doc["eigenvalues"].size() == 4);
  CHECK(doc["diagnostics"]["eigensolver"] == "dense");
}

TEST_CASE("clustering is invariant to weight scaling") {
  const LayeredNetwork net = make_glorot_network({40, 20, 20, 10}, 21);
  const ClusteringResult base = cluster_network(net, 4, 8);
  for (double c : {0.01, 100.0}) {
    const ClusteringResult r = cluster_network(scale_weights(net, c), 4, 8);
    CHECK(r.partition == base.partition);
    CHECK(r.ncut_value == doctest::Approx(base.ncut_value).epsilon(1e-12));
  }
}
