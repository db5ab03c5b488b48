#pragma once

#include "modgraph/network.hpp"

#include <Eigen/Sparse>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace modgraph {

/// Position of a neuron inside a LayeredNetwork.
struct NeuronId {
  int layer = 0;
  int index = 0;

  auto operator<=>(const NeuronId&) const = default;
};

using SparseAdjacency = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Undirected graph of a network: one vertex per surviving neuron, edge
/// weights |w| between adjacent layers.
///
/// Vertices are numbered layer-major (all surviving input neurons first, in
/// neuron order, then the first hidden layer, ...). Every vertex has strictly
/// positive degree and the adjacency is symmetric with a zero diagonal.
class WeightedGraph {
 public:
  /// Builds a graph from an explicit symmetric adjacency. `layer_of[v]` is
  /// the layer of vertex v; `neurons` (optional) gives each vertex's origin.
  /// Throws ValidationError if any invariant fails.
  static WeightedGraph from_adjacency(SparseAdjacency adjacency,
                                      std::vector<int> layer_of,
                                      std::vector<NeuronId> neurons = {});

  int num_vertices() const { return static_cast<int>(degrees_.size()); }
  const SparseAdjacency& adjacency() const { return adjacency_; }
  const Eigen::VectorXd& degrees() const { return degrees_; }
  double degree(int v) const { return degrees_(v); }
  const std::vector<int>& layer_of() const { return layer_of_; }
  const std::vector<NeuronId>& neurons() const { return neurons_; }

  /// Vertex of a neuron, or -1 if that neuron was removed as dead.
  int vertex_of(NeuronId id) const;

  /// Sum of all edge weights (each undirected edge counted once).
  double total_edge_weight() const;

 private:
  SparseAdjacency adjacency_;
  Eigen::VectorXd degrees_;
  std::vector<int> layer_of_;
  std::vector<NeuronId> neurons_;
  std::vector<std::vector<int>> vertex_lookup_;  // [layer][neuron] -> vertex
};

/// Converts a network to its graph. Biases are ignored. Neurons with no
/// nonzero incident weight are removed repeatedly until none remain.
/// Throws DegenerateInputError when nothing survives.
WeightedGraph network_to_graph(const LayeredNetwork& net);

/// Total assignment of vertices to clusters 0..k-1.
struct Partition {
  std::vector<int> assignment;
  int k = 1;

  int size() const { return static_cast<int>(assignment.size()); }
  std::vector<int> cluster_sizes() const;
  /// Vertex indices of cluster c, ascending.
  std::vector<int> members(int c) const;

  bool operator==(const Partition&) const = default;
};

/// Membership mask over the vertices of a graph.
using VertexSet = std::vector<bool>;

VertexSet make_vertex_set(int num_vertices, std::span<const int> members);

double volume(const WeightedGraph& g, const VertexSet& x);

/// W(X, Y). Throws ContractViolation if X and Y intersect.
double cut_weight(const WeightedGraph& g, const VertexSet& x, const VertexSet& y);

/// Sum over clusters of W(X_i, complement) / vol(X_i). This omits the
/// conventional factor of two, so values lie in [0, k).
/// Throws DegenerateInputError on an empty or zero-volume cluster.
double ncut(const WeightedGraph& g, const Partition& p);

/// Monte-Carlo estimate of the stub-sampling failure probability: choose a
/// cluster uniformly, then a stub attached to it with probability
/// proportional to its weight; failure means the stub's edge leaves the
/// cluster. Converges to ncut(g, p) / k.
double stub_failure_probability(const WeightedGraph& g, const Partition& p,
                                std::int64_t num_samples, std::uint64_t seed);

/// CSV with header "layer,neuron_index,cluster", one row per vertex.
void write_partition_csv(std::ostream& out, const WeightedGraph& g,
                         const Partition& p);

/// Neuron-level view of a partition CSV, as read back from disk.
struct NeuronAssignment {
  std::vector<NeuronId> neurons;
  std::vector<int> clusters;
  int k = 0;
};

NeuronAssignment read_partition_csv(std::istream& in);

}  // namespace modgraph
