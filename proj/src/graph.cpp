#include "modgraph/graph.hpp"

#include "modgraph/errors.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

namespace modgraph {

namespace {

void check_partition(const WeightedGraph& g, const Partition& p) {
  if (p.k < 1) throw ContractViolation("partition needs k >= 1");
  if (p.size() != g.num_vertices()) {
    throw ContractViolation("partition covers " + std::to_string(p.size()) +
                            " vertices, graph has " +
                            std::to_string(g.num_vertices()));
  }
  for (int c : p.assignment) {
    if (c < 0 || c >= p.k) {
      throw ContractViolation("cluster index " + std::to_string(c) +
                              " outside [0, " + std::to_string(p.k) + ")");
    }
  }
}

std::vector<double> cluster_volumes(const WeightedGraph& g, const Partition& p) {
  std::vector<double> vol(p.k, 0.0);
  for (int v = 0; v < g.num_vertices(); ++v) vol[p.assignment[v]] += g.degree(v);
  return vol;
}

void check_nondegenerate(const Partition& p, const std::vector<double>& vol) {
  const auto sizes = p.cluster_sizes();
  for (int c = 0; c < p.k; ++c) {
    if (sizes[c] == 0) {
      throw DegenerateInputError("cluster " + std::to_string(c) + " is empty");
    }
    if (!(vol[c] > 0.0)) {
      throw DegenerateInputError("cluster " + std::to_string(c) +
                                 " has zero volume");
    }
  }
}

}  // namespace

WeightedGraph WeightedGraph::from_adjacency(SparseAdjacency adjacency,
                                            std::vector<int> layer_of,
                                            std::vector<NeuronId> neurons) {
  const auto n = adjacency.rows();
  if (n == 0) throw DegenerateInputError("graph has no vertices");
  if (adjacency.cols() != n) throw ValidationError("adjacency is not square");
  if (static_cast<Eigen::Index>(layer_of.size()) != n) {
    throw ValidationError("layer_of must have one entry per vertex");
  }
  if (neurons.empty()) {
    neurons.reserve(n);
    std::vector<int> next_index;
    for (int layer : layer_of) {
      if (layer < 0) throw ValidationError("negative layer index");
      if (static_cast<int>(next_index.size()) <= layer) next_index.resize(layer + 1, 0);
      neurons.push_back({layer, next_index[layer]++});
    }
  }
  if (static_cast<Eigen::Index>(neurons.size()) != n) {
    throw ValidationError("neurons must have one entry per vertex");
  }

  adjacency.prune(0.0);
  adjacency.makeCompressed();
  const SparseAdjacency transposed = adjacency.transpose();
  if (SparseAdjacency(adjacency - transposed).norm() != 0.0) {
    throw ValidationError("adjacency is not symmetric");
  }

  WeightedGraph g;
  g.degrees_ = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (SparseAdjacency::InnerIterator it(adjacency, i); it; ++it) {
      if (it.col() == i) throw ValidationError("adjacency has a nonzero diagonal");
      if (!(it.value() > 0.0) || !std::isfinite(it.value())) {
        throw ValidationError("edge weights must be finite and nonnegative");
      }
      if (std::abs(layer_of[i] - layer_of[it.col()]) != 1) {
        throw ValidationError("edge joins vertices " + std::to_string(i) +
                              " and " + std::to_string(it.col()) +
                              " in non-adjacent layers");
      }
      g.degrees_(i) += it.value();
    }
    if (!(g.degrees_(i) > 0.0)) {
      throw ValidationError("vertex " + std::to_string(i) + " has zero degree");
    }
  }
  g.adjacency_ = std::move(adjacency);
  g.layer_of_ = std::move(layer_of);
  g.neurons_ = std::move(neurons);
  for (Eigen::Index v = 0; v < n; ++v) {
    const NeuronId id = g.neurons_[v];
    if (id.index < 0) throw ValidationError("negative neuron index");
    if (static_cast<int>(g.vertex_lookup_.size()) <= id.layer) {
      g.vertex_lookup_.resize(id.layer + 1);
    }
    auto& row = g.vertex_lookup_[id.layer];
    if (static_cast<int>(row.size()) <= id.index) row.resize(id.index + 1, -1);
    row[id.index] = static_cast<int>(v);
  }
  return g;
}

int WeightedGraph::vertex_of(NeuronId id) const {
  if (id.layer < 0 || id.layer >= static_cast<int>(vertex_lookup_.size())) return -1;
  const auto& row = vertex_lookup_[id.layer];
  if (id.index < 0 || id.index >= static_cast<int>(row.size())) return -1;
  return row[id.index];
}

double WeightedGraph::total_edge_weight() const { return degrees_.sum() / 2.0; }

WeightedGraph network_to_graph(const LayeredNetwork& net) {
  net.validate();
  const int layers = net.num_layers();

  std::vector<std::vector<char>> alive(layers);
  for (int l = 0; l < layers; ++l) alive[l].assign(net.layer_dims[l], 1);

  // A neuron survives while it has a nonzero weight to a surviving neighbour.
  // Removing one neuron can strand another, so iterate to a fixed point.
  for (bool changed = true; changed;) {
    changed = false;
    for (int l = 0; l < layers; ++l) {
      for (int i = 0; i < net.layer_dims[l]; ++i) {
        if (!alive[l][i]) continue;
        bool connected = false;
        if (l + 1 < layers) {
          const auto& w = net.weights[l];
          for (int j = 0; j < net.layer_dims[l + 1] && !connected; ++j) {
            connected = alive[l + 1][j] && w(i, j) != 0.0;
          }
        }
        if (l > 0) {
          const auto& w = net.weights[l - 1];
          for (int j = 0; j < net.layer_dims[l - 1] && !connected; ++j) {
            connected = alive[l - 1][j] && w(j, i) != 0.0;
          }
        }
        if (!connected) {
          alive[l][i] = 0;
          changed = true;
        }
      }
    }
  }

  std::vector<int> layer_of;
  std::vector<NeuronId> neurons;
  std::vector<std::vector<int>> vertex(layers);
  for (int l = 0; l < layers; ++l) {
    vertex[l].assign(net.layer_dims[l], -1);
    for (int i = 0; i < net.layer_dims[l]; ++i) {
      if (!alive[l][i]) continue;
      vertex[l][i] = static_cast<int>(layer_of.size());
      layer_of.push_back(l);
      neurons.push_back({l, i});
    }
  }
  if (layer_of.empty()) {
    throw DegenerateInputError("network has no neuron with a nonzero weight");
  }

  std::vector<Eigen::Triplet<double>> triplets;
  for (int l = 0; l + 1 < layers; ++l) {
    const auto& w = net.weights[l];
    for (int i = 0; i < w.rows(); ++i) {
      if (vertex[l][i] < 0) continue;
      for (int j = 0; j < w.cols(); ++j) {
        if (vertex[l + 1][j] < 0 || w(i, j) == 0.0) continue;
        const double a = std::abs(w(i, j));
        triplets.emplace_back(vertex[l][i], vertex[l + 1][j], a);
        triplets.emplace_back(vertex[l + 1][j], vertex[l][i], a);
      }
    }
  }
  const auto n = static_cast<Eigen::Index>(layer_of.size());
  SparseAdjacency adjacency(n, n);
  adjacency.setFromTriplets(triplets.begin(), triplets.end());
  return WeightedGraph::from_adjacency(std::move(adjacency), std::move(layer_of),
                                       std::move(neurons));
}

std::vector<int> Partition::cluster_sizes() const {
  std::vector<int> sizes(std::max(k, 0), 0);
  for (int c : assignment) {
    if (c >= 0 && c < k) ++sizes[c];
  }
  return sizes;
}

std::vector<int> Partition::members(int c) const {
  std::vector<int> out;
  for (int v = 0; v < size(); ++v) {
    if (assignment[v] == c) out.push_back(v);
  }
  return out;
}

VertexSet make_vertex_set(int num_vertices, std::span<const int> members) {
  VertexSet set(num_vertices, false);
  for (int v : members) {
    if (v < 0 || v >= num_vertices) {
      throw ContractViolation("vertex " + std::to_string(v) + " out of range");
    }
    set[v] = true;
  }
  return set;
}

double volume(const WeightedGraph& g, const VertexSet& x) {
  if (static_cast<int>(x.size()) != g.num_vertices()) {
    throw ContractViolation("vertex set size does not match the graph");
  }
  double vol = 0.0;
  for (int v = 0; v < g.num_vertices(); ++v) {
    if (x[v]) vol += g.degree(v);
  }
  return vol;
}

double cut_weight(const WeightedGraph& g, const VertexSet& x, const VertexSet& y) {
  const int n = g.num_vertices();
  if (static_cast<int>(x.size()) != n || static_cast<int>(y.size()) != n) {
    throw ContractViolation("vertex set size does not match the graph");
  }
  double w = 0.0;
  for (int v = 0; v < n; ++v) {
    if (!x[v]) continue;
    if (y[v]) throw ContractViolation("cut_weight needs disjoint vertex sets");
    for (SparseAdjacency::InnerIterator it(g.adjacency(), v); it; ++it) {
      if (y[it.col()]) w += it.value();
    }
  }
  return w;
}

double ncut(const WeightedGraph& g, const Partition& p) {
  check_partition(g, p);
  const auto vol = cluster_volumes(g, p);
  check_nondegenerate(p, vol);

  std::vector<double> leaving(p.k, 0.0);
  for (int v = 0; v < g.num_vertices(); ++v) {
    const int c = p.assignment[v];
    for (SparseAdjacency::InnerIterator it(g.adjacency(), v); it; ++it) {
      if (p.assignment[it.col()] != c) leaving[c] += it.value();
    }
  }
  double total = 0.0;
  for (int c = 0; c < p.k; ++c) total += leaving[c] / vol[c];
  return total;
}

double stub_failure_probability(const WeightedGraph& g, const Partition& p,
                                std::int64_t num_samples, std::uint64_t seed) {
  if (num_samples <= 0) throw ContractViolation("num_samples must be positive");
  check_partition(g, p);
  check_nondegenerate(p, cluster_volumes(g, p));

  // Each stub is one end of an edge, weighted by the full edge weight.
  std::vector<std::vector<double>> stub_weight(p.k);
  std::vector<std::vector<char>> stub_crosses(p.k);
  for (int v = 0; v < g.num_vertices(); ++v) {
    const int c = p.assignment[v];
    for (SparseAdjacency::InnerIterator it(g.adjacency(), v); it; ++it) {
      stub_weight[c].push_back(it.value());
      stub_crosses[c].push_back(p.assignment[it.col()] != c);
    }
  }
  std::vector<std::discrete_distribution<std::size_t>> pick_stub;
  pick_stub.reserve(p.k);
  for (int c = 0; c < p.k; ++c) {
    pick_stub.emplace_back(stub_weight[c].begin(), stub_weight[c].end());
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick_cluster(0, p.k - 1);
  std::int64_t failures = 0;
  for (std::int64_t s = 0; s < num_samples; ++s) {
    const int c = pick_cluster(rng);
    failures += stub_crosses[c][pick_stub[c](rng)];
  }
  return static_cast<double>(failures) / static_cast<double>(num_samples);
}

void write_partition_csv(std::ostream& out, const WeightedGraph& g,
                         const Partition& p) {
  check_partition(g, p);
  out << "layer,neuron_index,cluster\n";
  for (int v = 0; v < g.num_vertices(); ++v) {
    const NeuronId id = g.neurons()[v];
    out << id.layer << ',' << id.index << ',' << p.assignment[v] << '\n';
  }
}

NeuronAssignment read_partition_csv(std::istream& in) {
  NeuronAssignment result;
  std::string line;
  if (!std::getline(in, line) || line.rfind("layer,neuron_index,cluster", 0) != 0) {
    throw ValidationError("partition CSV must start with "
                          "'layer,neuron_index,cluster'");
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::istringstream row(line);
    NeuronId id;
    int cluster = -1;
    char c1 = 0, c2 = 0;
    if (!(row >> id.layer >> c1 >> id.index >> c2 >> cluster) || c1 != ',' ||
        c2 != ',' || id.layer < 0 || id.index < 0 || cluster < 0) {
      throw ValidationError("malformed partition CSV line " +
                            std::to_string(line_no));
    }
    result.neurons.push_back(id);
    result.clusters.push_back(cluster);
    result.k = std::max(result.k, cluster + 1);
  }
  return result;
}

}  // namespace modgraph
