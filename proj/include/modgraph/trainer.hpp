#pragma once

#include "modgraph/network.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace modgraph {

/// Magnitude pruning on a polynomial schedule
///   s(t) = s_f + (s_i - s_f) * (1 - t / T)^exponent,  t in [0, T].
/// Pruning runs for `epochs` extra epochs after dense training. A pruning
/// event happens every `frequency` optimizer steps of that phase and at its
/// final step, so the finished network reaches `final_sparsity`.
struct PruneConfig {
  double initial_sparsity = 0.5;
  double final_sparsity = 0.9;
  int frequency = 10;
  int epochs = 20;
  /// T in steps; 0 means "every step of the pruning phase".
  int total_pruning_steps = 0;
  int exponent = 3;

  void validate() const;
};

/// Target sparsity after `step` steps of a schedule of length `total_steps`.
double scheduled_sparsity(const PruneConfig& cfg, long step, long total_steps);

struct TrainConfig {
  int epochs = 20;
  int batch_size = 128;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-7;
  double dropout_rate = 0.0;
  std::optional<PruneConfig> prune;
  std::uint64_t seed = 0;
  bool shuffle_each_epoch = true;

  void validate() const;
};

/// Per-layer scaled dropout masks (entries 0 or 1 / (1 - p)), one for the
/// input and one per hidden layer. Empty when dropout is off.
using DropoutMasks = std::vector<Eigen::MatrixXd>;

/// 0/1 masks with the shape of each weight matrix; 0 marks a pruned weight.
using WeightMasks = std::vector<Eigen::MatrixXd>;

struct ForwardPass {
  /// activations[l] is the (post-dropout) input to weight layer l.
  std::vector<Eigen::MatrixXd> activations;
  Eigen::MatrixXd logits;
  Eigen::MatrixXd probabilities;
  DropoutMasks dropout_masks;
};

/// Rectifier hidden layers, softmax output. With `training` and a positive
/// rate, inverted dropout is applied to the input and every hidden layer
/// with masks drawn from `seed`; otherwise no dropout and no scaling.
/// Throws ValidationError if the batch width differs from the input width.
ForwardPass forward(const LayeredNetwork& net, const Eigen::MatrixXd& batch,
                    double dropout_rate, bool training, std::uint64_t seed);

/// Forward pass with caller-supplied dropout masks (empty = none).
ForwardPass forward_with_masks(const LayeredNetwork& net,
                               const Eigen::MatrixXd& batch,
                               const DropoutMasks& masks);

/// Draws scaled dropout masks for a batch of `rows` examples.
DropoutMasks draw_dropout_masks(const LayeredNetwork& net, Eigen::Index rows,
                                double rate, std::uint64_t seed);

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  double loss = 0.0;  // mean cross-entropy
};

/// Gradient of the mean cross-entropy of `pass`. Entries of pruned weights
/// (mask 0) are exactly zero.
Gradients backward(const LayeredNetwork& net, const ForwardPass& pass,
                   const std::vector<int>& labels,
                   const WeightMasks* weight_masks = nullptr);

/// Mean cross-entropy loss (dropout as given by `masks`).
double cross_entropy(const LayeredNetwork& net, const Eigen::MatrixXd& batch,
                     const std::vector<int>& labels, const DropoutMasks& masks);

struct GradientCheckOptions {
  double step = 1e-5;
  /// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double denominator_floor = 1e-4;
  DropoutMasks dropout_masks;
  WeightMasks weight_masks;
};

struct GradientCheckReport {
  double max_relative_error = 0.0;
  /// Largest |gradient| over pruned weights; must be exactly 0.
  double max_masked_gradient = 0.0;
  int parameters_checked = 0;
};

/// Compares backward() against central finite differences on every free
/// parameter of a small network.
GradientCheckReport backward_check(const LayeredNetwork& net,
                                   const Eigen::MatrixXd& batch,
                                   const std::vector<int>& labels,
                                   const GradientCheckOptions& options = {});

/// Fraction of examples whose argmax prediction matches the label (no dropout).
double accuracy(const LayeredNetwork& net, const Dataset& data);

/// Predicted class of every example.
std::vector<int> predict(const LayeredNetwork& net, const Dataset& data);

/// Fraction of exact zeros in each weight matrix.
std::vector<double> layer_sparsity(const LayeredNetwork& net);
double overall_sparsity(const LayeredNetwork& net);

/// Prunes each layer to `target` sparsity by zeroing the smallest-magnitude
/// weights still alive in `masks` (ties broken by position). Masks only
/// ever lose entries.
void prune_to_sparsity(LayeredNetwork& net, WeightMasks& masks, double target);

struct EpochMetrics {
  int epoch = 0;           // 1-based over both phases
  std::string phase;       // "dense" or "prune"
  double loss = 0.0;       // mean training loss over the epoch's batches
  double train_accuracy = 0.0;  // running accuracy over the epoch's batches
  double sparsity = 0.0;   // overall weight sparsity at the end of the epoch
};

struct TrainResult {
  LayeredNetwork network;
  /// Snapshot taken just before pruning starts (set iff pruning ran).
  std::optional<LayeredNetwork> pre_pruning;
  std::vector<EpochMetrics> metrics;
};

/// Called after every epoch; useful for progress output.
using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Adam on mean cross-entropy, `cfg.epochs` dense epochs followed by
/// `cfg.prune->epochs` pruning epochs if pruning is configured. Returned
/// networks are rounded to float32 so they survive an archive round-trip.
/// Throws TrainingError (with epoch and step) if the loss becomes non-finite.
TrainResult train(const LayeredNetwork& initial, const Dataset& data,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// CSV "epoch,phase,loss,train_acc,sparsity".
void write_metrics_csv(std::ostream& out, const std::vector<EpochMetrics>& metrics);

}  // namespace modgraph
