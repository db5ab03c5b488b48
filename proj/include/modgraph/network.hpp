#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace modgraph {

/// A multi-layer perceptron as a stack of dense weight matrices.
///
/// `weights[l]` maps layer `l` to layer `l + 1` and has shape
/// `layer_dims[l] x layer_dims[l + 1]`, so a row-vector batch `X` propagates
/// as `X * weights[l] + biases[l]^T`. Biases are either absent for every
/// layer or present for every layer. They take part in inference only and
/// never in graph construction.
struct LayeredNetwork {
  std::vector<int> layer_dims;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  bool has_biases() const { return !biases.empty(); }
  int num_layers() const { return static_cast<int>(layer_dims.size()); }
  int num_weight_layers() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }

  /// Throws ValidationError naming the offending layer.
  void validate() const;

  bool operator==(const LayeredNetwork& other) const;
};

/// A zero-initialized network (zero biases included) with the given shape.
LayeredNetwork make_zero_network(const std::vector<int>& layer_dims);

/// Glorot-uniform weights, zero biases. Deterministic in `seed`.
LayeredNetwork make_glorot_network(const std::vector<int>& layer_dims,
                                   std::uint64_t seed);

/// Multiplies every weight by `factor`; biases are left alone.
LayeredNetwork scale_weights(const LayeredNetwork& net, double factor);

/// Rounds every parameter to the nearest float32. Networks in this form
/// survive an archive round-trip bit-for-bit.
LayeredNetwork round_to_float(const LayeredNetwork& net);

using ImageMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Labelled examples, one per row of `images`, pixels in [0, 1].
struct Dataset {
  ImageMatrix images;
  std::vector<int> labels;
  int num_classes = 10;

  int size() const { return static_cast<int>(labels.size()); }
  int input_dim() const { return static_cast<int>(images.cols()); }

  void validate() const;

  /// The first `n` examples (all of them when n exceeds the size).
  Dataset head(int n) const;
};

}  // namespace modgraph
