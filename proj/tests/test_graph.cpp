#include "modgraph/errors.hpp"
#include "modgraph/graph.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace modgraph;

namespace {

// Path a - b - c - d with the given weights; each vertex in its own layer.
WeightedGraph path4(double w01, double w12, double w23) {
  std::vector<Eigen::Triplet<double>> t;
  auto add = [&](int i, int j, double w) {
    if (w == 0.0) return;
    t.emplace_back(i, j, w);
    t.emplace_back(j, i, w);
  };
  add(0, 1, w01);
  add(1, 2, w12);
  add(2, 3, w23);
  SparseAdjacency a(4, 4);
  a.setFromTriplets(t.begin(), t.end());
  return WeightedGraph::from_adjacency(a, {0, 1, 2, 3});
}

// Direct evaluation of sum_i W(X_i, not X_i) / vol(X_i) on a dense matrix.
double dense_ncut(const Eigen::MatrixXd& a, const std::vector<int>& assign, int k) {
  double total = 0.0;
  for (int c = 0; c < k; ++c) {
    double cut = 0.0;
    double vol = 0.0;
    for (int i = 0; i < a.rows(); ++i) {
      if (assign[i] != c) continue;
      for (int j = 0; j < a.cols(); ++j) {
        vol += a(i, j);
        if (assign[j] != c) cut += a(i, j);
      }
    }
    total += cut / vol;
  }
  return total;
}

// Dense |W| block adjacency of a network, without any dead-neuron removal.
Eigen::MatrixXd dense_adjacency(const LayeredNetwork& net) {
  int n = 0;
  std::vector<int> offset;
  for (int d : net.layer_dims) {
    offset.push_back(n);
    n += d;
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int l = 0; l < net.num_weight_layers(); ++l) {
    const Eigen::MatrixXd w = net.weights[l].cwiseAbs();
    a.block(offset[l], offset[l + 1], w.rows(), w.cols()) = w;
    a.block(offset[l + 1], offset[l], w.cols(), w.rows()) = w.transpose();
  }
  return a;
}

}  // namespace

TEST_CASE("volume on the 4-vertex path") {
  const WeightedGraph g = path4(1, 1, 1);
  CHECK(g.degrees()(0) == 1);
  CHECK(g.degrees()(1) == 2);
  CHECK(volume(g, make_vertex_set(4, std::vector<int>{1, 2})) == 4);
  CHECK(volume(g, VertexSet(4, false)) == 0);
  CHECK(volume(g, VertexSet(4, true)) == doctest::Approx(2 * g.total_edge_weight()));
}

TEST_CASE("cut weight and n-cut on two components joined by a light edge") {
  const WeightedGraph g = path4(1, 0.1, 1);
  const VertexSet x = make_vertex_set(4, std::vector<int>{0, 1});
  const VertexSet y = make_vertex_set(4, std::vector<int>{2, 3});
  CHECK(cut_weight(g, x, y) == doctest::Approx(0.1));
  CHECK(cut_weight(g, x, y) + 2.0 == doctest::Approx(volume(g, x)));
  CHECK_THROWS_AS(cut_weight(g, x, x), ContractViolation);

  const Partition p{{0, 0, 1, 1}, 2};
  CHECK(ncut(g, p) == doctest::Approx(0.1 / 2.1 + 0.1 / 2.1).epsilon(1e-14));
  CHECK(ncut(g, p) == doctest::Approx(0.095238).epsilon(1e-5));
  CHECK(ncut(g, Partition{{0, 0, 0, 0}, 1}) == 0.0);
}

TEST_CASE("n-cut is zero without crossing edges") {
  std::vector<Eigen::Triplet<double>> t{{0, 1, 1.0}, {1, 0, 1.0}, {2, 3, 1.0}, {3, 2, 1.0}};
  SparseAdjacency a(4, 4);
  a.setFromTriplets(t.begin(), t.end());
  const WeightedGraph g = WeightedGraph::from_adjacency(a, {0, 1, 0, 1});
  const Partition p{{0, 0, 1, 1}, 2};
  CHECK(ncut(g, p) == 0.0);
  CHECK(stub_failure_probability(g, p, 10000, 3) == 0.0);
}

TEST_CASE("degenerate partitions are rejected") {
  const WeightedGraph g = path4(1, 1, 1);
  CHECK_THROWS_AS(ncut(g, Partition{{0, 0, 0, 0}, 2}), DegenerateInputError);
}

TEST_CASE("from_adjacency checks its invariants") {
  SparseAdjacency a(3, 3);
  std::vector<Eigen::Triplet<double>> asym{{0, 1, 1.0}, {1, 0, 2.0}, {1, 2, 1.0}, {2, 1, 1.0}};
  a.setFromTriplets(asym.begin(), asym.end());
  CHECK_THROWS_AS(WeightedGraph::from_adjacency(a, {0, 1, 2}), ValidationError);

  std::vector<Eigen::Triplet<double>> skip{{0, 1, 1.0}, {1, 0, 1.0}, {0, 2, 1.0}, {2, 0, 1.0}};
  a.setFromTriplets(skip.begin(), skip.end());
  CHECK_THROWS_AS(WeightedGraph::from_adjacency(a, {0, 1, 2}), ValidationError);

  std::vector<Eigen::Triplet<double>> isolated{{0, 1, 1.0}, {1, 0, 1.0}};
  a.setFromTriplets(isolated.begin(), isolated.end());
  CHECK_THROWS_AS(WeightedGraph::from_adjacency(a, {0, 1, 2}), ValidationError);
}

TEST_CASE("full-width network keeps every neuron") {
  const LayeredNetwork net = make_glorot_network({784, 256, 256, 256, 256, 10}, 9);
  const WeightedGraph g = network_to_graph(net);
  CHECK(g.num_vertices() == 784 + 4 * 256 + 10);
}

TEST_CASE("graph construction uses absolute weights and ignores biases") {
  LayeredNetwork net = make_zero_network({2, 2});
  net.weights[0] << -0.5, 0.25, 1.0, 2.0;
  net.biases[0] << 100.0, -7.0;
  const WeightedGraph g = network_to_graph(net);
  REQUIRE(g.num_vertices() == 4);
  CHECK(g.adjacency().coeff(0, 2) == 0.5);
  CHECK(g.adjacency().coeff(2, 0) == 0.5);
  CHECK(g.degrees()(2) == doctest::Approx(1.5));

  LayeredNetwork no_bias = net;
  no_bias.biases.clear();
  CHECK(network_to_graph(no_bias).adjacency().isApprox(g.adjacency()));
}

TEST_CASE("neurons without nonzero weights are removed") {
  LayeredNetwork net = testutil::random_network({3, 3, 3, 2}, 4);
  net.weights[0].col(1).setZero();
  net.weights[1].row(1).setZero();
  const WeightedGraph g = network_to_graph(net);
  CHECK(g.vertex_of({1, 1}) == -1);
  CHECK(g.vertex_of({1, 2}) == g.vertex_of({1, 0}) + 1);
  CHECK(g.num_vertices() == 3 + 3 + 3 + 2 - 1);
  CHECK(g.neurons()[g.vertex_of({2, 0})] == NeuronId{2, 0});

  // A chain broken in the middle keeps both halves.
  LayeredNetwork chain = make_zero_network({1, 1, 1, 2});
  chain.weights[0](0, 0) = 1.0;
  chain.weights[2](0, 0) = 1.0;
  chain.weights[2](0, 1) = 1.0;
  const WeightedGraph gc = network_to_graph(chain);
  CHECK(gc.num_vertices() == 5);
  for (int v = 0; v < gc.num_vertices(); ++v) CHECK(gc.degree(v) > 0);
}

TEST_CASE("an all-zero network is degenerate") {
  CHECK_THROWS_AS(network_to_graph(make_zero_network({3, 2, 2})), DegenerateInputError);
}

TEST_CASE("graph properties on random sparse networks") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    LayeredNetwork net = testutil::random_network({6, 5, 4, 3}, trial);
    std::bernoulli_distribution drop(0.5);
    for (auto& w : net.weights) {
      for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (drop(rng)) w.data()[i] = 0.0;
      }
    }
    WeightedGraph g;
    try {
      g = network_to_graph(net);
    } catch (const DegenerateInputError&) {
      continue;
    }
    const Eigen::MatrixXd a = Eigen::MatrixXd(g.adjacency());
    CHECK(a.isApprox(a.transpose()));
    CHECK(a.diagonal().isZero());
    CHECK(a.minCoeff() >= 0.0);
    for (int v = 0; v < g.num_vertices(); ++v) {
      CHECK(g.degree(v) == doctest::Approx(a.row(v).sum()).epsilon(1e-14));
      CHECK(g.degree(v) > 0);
    }
    for (int i = 0; i < g.num_vertices(); ++i) {
      for (int j = 0; j < g.num_vertices(); ++j) {
        if (a(i, j) != 0.0) CHECK(std::abs(g.layer_of()[i] - g.layer_of()[j]) == 1);
      }
    }
    // Layer-major ordering.
    for (int v = 1; v < g.num_vertices(); ++v) {
      CHECK(g.neurons()[v - 1] < g.neurons()[v]);
    }

    // n-cut against the dense definition, on random partitions.
    std::uniform_int_distribution<int> pick(0, 2);
    std::vector<int> assign(g.num_vertices());
    for (int& c : assign) c = pick(rng);
    const Partition p{assign, 3};
    bool ok = true;
    for (int c : p.cluster_sizes()) ok = ok && c > 0;
    if (!ok) continue;
    const double got = ncut(g, p);
    CHECK(got == doctest::Approx(dense_ncut(a, assign, 3)).epsilon(1e-12));
    CHECK(got >= 0.0);
    CHECK(got < 3.0);
  }
}

TEST_CASE("n-cut is invariant to weight scaling") {
  const LayeredNetwork net = testutil::random_network({8, 6, 6, 4}, 5);
  const WeightedGraph g = network_to_graph(net);
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> pick(0, 3);
  std::vector<int> assign(g.num_vertices());
  for (int& c : assign) c = pick(rng);
  const Partition p{assign, 4};
  for (double c : {1e-3, 0.5, 7.0, 1e4}) {
    const WeightedGraph gs = network_to_graph(scale_weights(net, c));
    CHECK(Eigen::MatrixXd(gs.adjacency()).isApprox(c * Eigen::MatrixXd(g.adjacency()), 1e-14));
    CHECK(ncut(gs, p) == doctest::Approx(ncut(g, p)).epsilon(1e-12));
  }
}

TEST_CASE("dense-oracle n-cut of an intact network graph") {
  const LayeredNetwork net = testutil::random_network({4, 3, 2}, 8);
  const WeightedGraph g = network_to_graph(net);
  const Eigen::MatrixXd a = dense_adjacency(net);
  CHECK(Eigen::MatrixXd(g.adjacency()).isApprox(a));
  const std::vector<int> assign{0, 1, 0, 1, 0, 1, 0, 1, 1};
  CHECK(ncut(g, Partition{assign, 2}) == doctest::Approx(dense_ncut(a, assign, 2)));
}

TEST_CASE("stub sampling converges to n-cut over k") {
  const WeightedGraph g = path4(1, 0.1, 1);
  const Partition p{{0, 0, 1, 1}, 2};
  const double est = stub_failure_probability(g, p, 1'000'000, 17);
  CHECK(std::abs(est - 0.095238095238 / 2) <= 4 * std::sqrt(0.25 / 1e6));
  CHECK(stub_failure_probability(g, Partition{{0, 0, 0, 0}, 1}, 1000, 1) == 0.0);
}

TEST_CASE("partition CSV round-trip") {
  const LayeredNetwork net = testutil::random_network({3, 2, 2}, 1);
  const WeightedGraph g = network_to_graph(net);
  const Partition p{{0, 1, 2, 0, 1, 2, 0}, 3};
  std::stringstream s;
  write_partition_csv(s, g, p);
  CHECK(s.str().rfind("layer,neuron_index,cluster\n", 0) == 0);
  const NeuronAssignment back = read_partition_csv(s);
  CHECK(back.k == 3);
  CHECK(back.neurons == g.neurons());
  CHECK(back.clusters == p.assignment);

  std::stringstream bad("layer,cluster\n0,1\n");
  CHECK_THROWS_AS(read_partition_csv(bad), ValidationError);
}
