#include "modgraph/network.hpp"

#include "modgraph/errors.hpp"

#include <cmath>
#include <random>
#include <string>

namespace modgraph {

namespace {

std::string layer_name(int l) { return "weight layer " + std::to_string(l); }

}  // namespace

void LayeredNetwork::validate() const {
  if (layer_dims.size() < 2) {
    throw ValidationError("network needs at least an input and an output layer");
  }
  for (std::size_t l = 0; l < layer_dims.size(); ++l) {
    if (layer_dims[l] <= 0) {
      throw ValidationError("layer " + std::to_string(l) +
                            " has non-positive width");
    }
  }
  if (weights.size() != layer_dims.size() - 1) {
    throw ValidationError("expected " + std::to_string(layer_dims.size() - 1) +
                          " weight matrices, got " +
                          std::to_string(weights.size()));
  }
  if (!biases.empty() && biases.size() != weights.size()) {
    throw ValidationError("biases must be given for every layer or none");
  }
  for (int l = 0; l < num_weight_layers(); ++l) {
    const auto& w = weights[l];
    if (w.rows() != layer_dims[l] || w.cols() != layer_dims[l + 1]) {
      throw ValidationError(layer_name(l) + " has shape " +
                            std::to_string(w.rows()) + "x" +
                            std::to_string(w.cols()) + ", expected " +
                            std::to_string(layer_dims[l]) + "x" +
                            std::to_string(layer_dims[l + 1]));
    }
    if (!w.allFinite()) {
      throw ValidationError(layer_name(l) + " has non-finite entries");
    }
    if (has_biases()) {
      if (biases[l].size() != layer_dims[l + 1]) {
        throw ValidationError("bias of " + layer_name(l) + " has length " +
                              std::to_string(biases[l].size()) +
                              ", expected " + std::to_string(layer_dims[l + 1]));
      }
      if (!biases[l].allFinite()) {
        throw ValidationError("bias of " + layer_name(l) +
                              " has non-finite entries");
      }
    }
  }
}

bool LayeredNetwork::operator==(const LayeredNetwork& other) const {
  if (layer_dims != other.layer_dims || weights.size() != other.weights.size() ||
      biases.size() != other.biases.size()) {
    return false;
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != other.weights[l].rows() ||
        weights[l].cols() != other.weights[l].cols() ||
        weights[l] != other.weights[l]) {
      return false;
    }
  }
  for (std::size_t l = 0; l < biases.size(); ++l) {
    if (biases[l].size() != other.biases[l].size() ||
        biases[l] != other.biases[l]) {
      return false;
    }
  }
  return true;
}

LayeredNetwork make_zero_network(const std::vector<int>& layer_dims) {
  LayeredNetwork net;
  net.layer_dims = layer_dims;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    net.weights.push_back(Eigen::MatrixXd::Zero(layer_dims[l], layer_dims[l + 1]));
    net.biases.push_back(Eigen::VectorXd::Zero(layer_dims[l + 1]));
  }
  net.validate();
  return net;
}

LayeredNetwork make_glorot_network(const std::vector<int>& layer_dims,
                                   std::uint64_t seed) {
  LayeredNetwork net = make_zero_network(layer_dims);
  std::mt19937_64 rng(seed);
  for (int l = 0; l < net.num_weight_layers(); ++l) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(layer_dims[l] + layer_dims[l + 1]));
    std::uniform_real_distribution<float> dist(static_cast<float>(-limit),
                                               static_cast<float>(limit));
    auto& w = net.weights[l];
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
    }
  }
  return net;
}

LayeredNetwork scale_weights(const LayeredNetwork& net, double factor) {
  LayeredNetwork out = net;
  for (auto& w : out.weights) w *= factor;
  return out;
}

LayeredNetwork round_to_float(const LayeredNetwork& net) {
  LayeredNetwork out = net;
  for (auto& w : out.weights) w = w.cast<float>().cast<double>();
  for (auto& b : out.biases) b = b.cast<float>().cast<double>();
  return out;
}

void Dataset::validate() const {
  if (images.rows() != static_cast<Eigen::Index>(labels.size())) {
    throw ValidationError("dataset has " + std::to_string(images.rows()) +
                          " images but " + std::to_string(labels.size()) +
                          " labels");
  }
  if (num_classes <= 0) throw ValidationError("num_classes must be positive");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw ValidationError("label " + std::to_string(labels[i]) +
                            " of example " + std::to_string(i) +
                            " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

Dataset Dataset::head(int n) const {
  if (n >= size()) return *this;
  Dataset out;
  out.images = images.topRows(n);
  out.labels.assign(labels.begin(), labels.begin() + n);
  out.num_classes = num_classes;
  return out;
}

}  // namespace modgraph
