#include "modgraph/spectral.hpp"

#include "modgraph/parallel.hpp"

#include <json.hpp>

namespace modgraph {

ClusteringResult cluster_graph(const WeightedGraph& g, int k, std::uint64_t seed,
                               const SpectralOptions& options) {
  ClusteringResult result;
  result.seed = seed;
  result.embedding = smallest_eigenvectors(g, k, options.eigen, derive_seed(seed, 0));
  KMeansResult km =
      kmeans(result.embedding.vectors, k, derive_seed(seed, 1), options.kmeans);
  result.partition = std::move(km.partition);
  result.kmeans_inertia = km.inertia;
  result.kmeans_iterations = km.iterations;
  result.ncut_value = ncut(g, result.partition);
  return result;
}

ClusteringResult cluster_network(const LayeredNetwork& net, int k,
                                 std::uint64_t seed,
                                 const SpectralOptions& options) {
  return cluster_graph(network_to_graph(net), k, seed, options);
}

std::string clustering_to_json(const WeightedGraph& g, const ClusteringResult& r) {
  using nlohmann::json;
  json layers = json::array();
  json neurons = json::array();
  for (const NeuronId& id : g.neurons()) {
    layers.push_back(id.layer);
    neurons.push_back(id.index);
  }
  std::vector<double> eigenvalues(r.embedding.eigenvalues.data(),
                                  r.embedding.eigenvalues.data() +
                                      r.embedding.eigenvalues.size());
  const json doc = {
      {"ncut", r.ncut_value},
      {"k", r.partition.k},
      {"seed", r.seed},
      {"num_vertices", g.num_vertices()},
      {"eigenvalues", eigenvalues},
      {"cluster_sizes", r.partition.cluster_sizes()},
      {"assignment", r.partition.assignment},
      {"vertex_layer", layers},
      {"vertex_neuron", neurons},
      {"diagnostics",
       {{"eigensolver", r.embedding.solver},
        {"eigensolver_restarts", r.embedding.iterations},
        {"max_eigen_residual", r.embedding.max_residual},
        {"kmeans_inertia", r.kmeans_inertia},
        {"kmeans_iterations", r.kmeans_iterations}}},
  };
  return doc.dump(2);
}

}  // namespace modgraph
