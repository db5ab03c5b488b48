#include "modgraph/trainer.hpp"

#include "modgraph/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace modgraph {

void PruneConfig::validate() const {
  if (!(initial_sparsity >= 0.0 && initial_sparsity < 1.0)) {
    throw ValidationError("initial sparsity must lie in [0, 1)");
  }
  if (!(final_sparsity > initial_sparsity && final_sparsity < 1.0)) {
    throw ValidationError("final sparsity must lie in (initial sparsity, 1)");
  }
  if (frequency < 1) throw ValidationError("pruning frequency must be positive");
  if (epochs < 1) throw ValidationError("pruning epochs must be positive");
  if (total_pruning_steps < 0) throw ValidationError("total pruning steps must be >= 0");
  if (exponent < 1) throw ValidationError("pruning exponent must be positive");
}

double scheduled_sparsity(const PruneConfig& cfg, long step, long total_steps) {
  if (total_steps <= 0) return cfg.final_sparsity;
  const double t = std::clamp(static_cast<double>(step) / static_cast<double>(total_steps),
                              0.0, 1.0);
  return cfg.final_sparsity + (cfg.initial_sparsity - cfg.final_sparsity) *
                                  std::pow(1.0 - t, cfg.exponent);
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be positive");
  if (batch_size < 1) throw ValidationError("batch size must be positive");
  if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
    throw ValidationError("Adam betas must lie in (0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ValidationError("Adam epsilon must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ValidationError("dropout rate must lie in [0, 1)");
  }
  if (prune) prune->validate();
}

DropoutMasks draw_dropout_masks(const LayeredNetwork& net, Eigen::Index rows,
                                double rate, std::uint64_t seed) {
  DropoutMasks masks;
  if (rate <= 0.0) return masks;
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  for (int l = 0; l + 1 < net.num_layers(); ++l) {
    Eigen::MatrixXd m(rows, net.layer_dims[l]);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = keep(rng) ? scale : 0.0;
    masks.push_back(std::move(m));
  }
  return masks;
}

namespace {

void check_batch(const LayeredNetwork& net, const Eigen::MatrixXd& batch) {
  if (batch.cols() != net.input_dim()) {
    throw ValidationError("batch has " + std::to_string(batch.cols()) +
                          " columns but the network expects " +
                          std::to_string(net.input_dim()));
  }
}

Eigen::MatrixXd affine(const LayeredNetwork& net, int l, const Eigen::MatrixXd& a) {
  Eigen::MatrixXd z = a * net.weights[l];
  if (net.has_biases()) z.rowwise() += net.biases[l].transpose();
  return z;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

double mean_cross_entropy(const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    total += lse - logits(i, labels[i]);
  }
  return total / static_cast<double>(logits.rows());
}

void check_labels(const LayeredNetwork& net, Eigen::Index rows,
                  const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != rows) {
    throw ValidationError("label count does not match batch size");
  }
  for (int y : labels) {
    if (y < 0 || y >= net.output_dim()) throw ValidationError("label out of range");
  }
}

Eigen::MatrixXd gather_rows(const Dataset& data, const std::vector<int>& order,
                            std::size_t begin, std::size_t end) {
  Eigen::MatrixXd batch(static_cast<Eigen::Index>(end - begin), data.input_dim());
  for (std::size_t i = begin; i < end; ++i) {
    batch.row(static_cast<Eigen::Index>(i - begin)) =
        data.images.row(order[i]).cast<double>();
  }
  return batch;
}

}  // namespace

ForwardPass forward_with_masks(const LayeredNetwork& net, const Eigen::MatrixXd& batch,
                               const DropoutMasks& masks) {
  check_batch(net, batch);
  if (!masks.empty() && static_cast<int>(masks.size()) != net.num_weight_layers()) {
    throw ValidationError("expected one dropout mask per non-output layer");
  }
  ForwardPass pass;
  pass.dropout_masks = masks;
  Eigen::MatrixXd a = batch;
  const int layers = net.num_weight_layers();
  for (int l = 0; l < layers; ++l) {
    if (!masks.empty()) {
      if (masks[l].rows() != a.rows() || masks[l].cols() != a.cols()) {
        throw ValidationError("dropout mask " + std::to_string(l) + " has the wrong shape");
      }
      a = a.cwiseProduct(masks[l]);
    }
    pass.activations.push_back(a);
    Eigen::MatrixXd z = affine(net, l, a);
    if (l + 1 < layers) {
      a = z.cwiseMax(0.0);
    } else {
      pass.logits = std::move(z);
    }
  }
  pass.probabilities = softmax_rows(pass.logits);
  return pass;
}

ForwardPass forward(const LayeredNetwork& net, const Eigen::MatrixXd& batch,
                    double dropout_rate, bool training, std::uint64_t seed) {
  check_batch(net, batch);
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ValidationError("dropout rate must lie in [0, 1)");
  }
  const DropoutMasks masks =
      training ? draw_dropout_masks(net, batch.rows(), dropout_rate, seed) : DropoutMasks{};
  return forward_with_masks(net, batch, masks);
}

Gradients backward(const LayeredNetwork& net, const ForwardPass& pass,
                   const std::vector<int>& labels, const WeightMasks* weight_masks) {
  const Eigen::Index rows = pass.logits.rows();
  check_labels(net, rows, labels);
  const int layers = net.num_weight_layers();

  Gradients g;
  g.weights.resize(layers);
  g.biases.resize(layers);
  g.loss = mean_cross_entropy(pass.logits, labels);

  Eigen::MatrixXd delta = pass.probabilities;
  for (Eigen::Index i = 0; i < rows; ++i) delta(i, labels[i]) -= 1.0;
  delta /= static_cast<double>(rows);

  for (int l = layers - 1; l >= 0; --l) {
    const Eigen::MatrixXd& a = pass.activations[l];
    g.weights[l] = a.transpose() * delta;
    if (weight_masks) g.weights[l] = g.weights[l].cwiseProduct((*weight_masks)[l]);
    g.biases[l] = delta.colwise().sum().transpose();
    if (l == 0) break;
    // a is the post-dropout rectifier output: a > 0 iff the unit fired and
    // survived dropout, and the surviving scale is the mask value.
    Eigen::MatrixXd back = delta * net.weights[l].transpose();
    Eigen::MatrixXd gate = (a.array() > 0.0).cast<double>();
    if (!pass.dropout_masks.empty()) gate = gate.cwiseProduct(pass.dropout_masks[l]);
    delta = back.cwiseProduct(gate);
  }
  return g;
}

double cross_entropy(const LayeredNetwork& net, const Eigen::MatrixXd& batch,
                     const std::vector<int>& labels, const DropoutMasks& masks) {
  check_labels(net, batch.rows(), labels);
  return mean_cross_entropy(forward_with_masks(net, batch, masks).logits, labels);
}

GradientCheckReport backward_check(const LayeredNetwork& net, const Eigen::MatrixXd& batch,
                                   const std::vector<int>& labels,
                                   const GradientCheckOptions& options) {
  LayeredNetwork probe = net;
  if (!probe.has_biases()) {
    for (int l = 0; l < probe.num_weight_layers(); ++l) {
      probe.biases.push_back(Eigen::VectorXd::Zero(probe.layer_dims[l + 1]));
    }
  }
  const WeightMasks* wm = options.weight_masks.empty() ? nullptr : &options.weight_masks;
  if (wm) {
    for (int l = 0; l < probe.num_weight_layers(); ++l) {
      probe.weights[l] = probe.weights[l].cwiseProduct((*wm)[l]);
    }
  }

  const ForwardPass pass = forward_with_masks(probe, batch, options.dropout_masks);
  const Gradients g = backward(probe, pass, labels, wm);
  GradientCheckReport report;

  auto numeric = [&](double& param) {
    const double saved = param;
    param = saved + options.step;
    const double up = cross_entropy(probe, batch, labels, options.dropout_masks);
    param = saved - options.step;
    const double down = cross_entropy(probe, batch, labels, options.dropout_masks);
    param = saved;
    return (up - down) / (2.0 * options.step);
  };
  auto compare = [&](double analytic, double approx) {
    const double denom =
        std::max({std::abs(analytic), std::abs(approx), options.denominator_floor});
    report.max_relative_error =
        std::max(report.max_relative_error, std::abs(analytic - approx) / denom);
    ++report.parameters_checked;
  };

  for (int l = 0; l < probe.num_weight_layers(); ++l) {
    auto& w = probe.weights[l];
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        if (wm && (*wm)[l](r, c) == 0.0) {
          report.max_masked_gradient =
              std::max(report.max_masked_gradient, std::abs(g.weights[l](r, c)));
          continue;
        }
        compare(g.weights[l](r, c), numeric(w(r, c)));
      }
    }
    for (Eigen::Index j = 0; j < probe.biases[l].size(); ++j) {
      compare(g.biases[l](j), numeric(probe.biases[l](j)));
    }
  }
  return report;
}

std::vector<int> predict(const LayeredNetwork& net, const Dataset& data) {
  constexpr int kChunk = 1024;
  std::vector<int> out(data.size());
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t begin = 0; begin < order.size(); begin += kChunk) {
    const std::size_t end = std::min(order.size(), begin + kChunk);
    const Eigen::MatrixXd batch = gather_rows(data, order, begin, end);
    const ForwardPass pass = forward_with_masks(net, batch, {});
    for (Eigen::Index i = 0; i < pass.logits.rows(); ++i) {
      Eigen::Index best = 0;
      pass.logits.row(i).maxCoeff(&best);
      out[begin + static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
  }
  return out;
}

double accuracy(const LayeredNetwork& net, const Dataset& data) {
  if (data.size() == 0) throw ContractViolation("accuracy of an empty dataset");
  const std::vector<int> predicted = predict(net, data);
  int correct = 0;
  for (int i = 0; i < data.size(); ++i) correct += predicted[i] == data.labels[i];
  return static_cast<double>(correct) / data.size();
}

std::vector<double> layer_sparsity(const LayeredNetwork& net) {
  std::vector<double> out;
  for (const auto& w : net.weights) {
    const auto zeros = (w.array() == 0.0).count();
    out.push_back(static_cast<double>(zeros) / static_cast<double>(w.size()));
  }
  return out;
}

double overall_sparsity(const LayeredNetwork& net) {
  Eigen::Index zeros = 0;
  Eigen::Index total = 0;
  for (const auto& w : net.weights) {
    zeros += (w.array() == 0.0).count();
    total += w.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(zeros) / static_cast<double>(total);
}

void prune_to_sparsity(LayeredNetwork& net, WeightMasks& masks, double target) {
  if (masks.empty()) {
    for (const auto& w : net.weights) masks.push_back(Eigen::MatrixXd::Ones(w.rows(), w.cols()));
  }
  for (int l = 0; l < net.num_weight_layers(); ++l) {
    auto& w = net.weights[l];
    auto& m = masks[l];
    const Eigen::Index n = w.size();
    // Ceiling, so a layer never ends below its target; the slack absorbs
    // products like 0.9 * 10 landing a hair above an integer.
    const auto wanted = std::min<Eigen::Index>(
        n, static_cast<Eigen::Index>(std::ceil(target * static_cast<double>(n) - 1e-9)));
    const Eigen::Index already = (m.array() == 0.0).count();
    if (wanted > already) {
      std::vector<Eigen::Index> alive;
      alive.reserve(static_cast<std::size_t>(n - already));
      for (Eigen::Index i = 0; i < n; ++i) {
        if (m.data()[i] != 0.0) alive.push_back(i);
      }
      const auto extra = static_cast<std::ptrdiff_t>(wanted - already);
      std::nth_element(alive.begin(), alive.begin() + extra - 1, alive.end(),
                       [&](Eigen::Index a, Eigen::Index b) {
                         const double wa = std::abs(w.data()[a]);
                         const double wb = std::abs(w.data()[b]);
                         return wa < wb || (wa == wb && a < b);
                       });
      for (std::ptrdiff_t i = 0; i < extra; ++i) m.data()[alive[i]] = 0.0;
    }
    w = w.cwiseProduct(m);
  }
}

TrainResult train(const LayeredNetwork& initial, const Dataset& data,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  initial.validate();
  data.validate();
  if (data.size() == 0) throw ContractViolation("training needs a nonempty dataset");
  if (data.input_dim() != initial.input_dim()) {
    throw ValidationError("dataset width " + std::to_string(data.input_dim()) +
                          " does not match network input " +
                          std::to_string(initial.input_dim()));
  }
  if (data.num_classes != initial.output_dim()) {
    throw ValidationError("dataset has " + std::to_string(data.num_classes) +
                          " classes but the network has " +
                          std::to_string(initial.output_dim()) + " outputs");
  }

  LayeredNetwork net = initial;
  const int layers = net.num_weight_layers();
  if (!net.has_biases()) {
    for (int l = 0; l < layers; ++l) {
      net.biases.push_back(Eigen::VectorXd::Zero(net.layer_dims[l + 1]));
    }
  }

  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  for (int l = 0; l < layers; ++l) {
    mw.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    vw.push_back(mw.back());
    mb.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    vb.push_back(mb.back());
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  const int batches_per_epoch = (data.size() + cfg.batch_size - 1) / cfg.batch_size;
  const int prune_epochs = cfg.prune ? cfg.prune->epochs : 0;
  const long prune_steps = static_cast<long>(prune_epochs) * batches_per_epoch;
  const long schedule_length =
      cfg.prune ? (cfg.prune->total_pruning_steps > 0 ? cfg.prune->total_pruning_steps
                                                      : prune_steps - 1)
                : 0;

  TrainResult result;
  WeightMasks masks;
  long step = 0;  // Adam step counter across both phases
  long prune_step = 0;

  for (int epoch = 1; epoch <= cfg.epochs + prune_epochs; ++epoch) {
    const bool pruning = epoch > cfg.epochs;
    if (pruning && !result.pre_pruning) result.pre_pruning = round_to_float(net);
    if (cfg.shuffle_each_epoch) std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    long correct = 0;
    for (int b = 0; b < batches_per_epoch; ++b) {
      if (pruning) {
        const bool event = prune_step % cfg.prune->frequency == 0 ||
                           prune_step == prune_steps - 1;
        if (event) {
          prune_to_sparsity(net, masks,
                            scheduled_sparsity(*cfg.prune, prune_step, schedule_length));
        }
      }

      const std::size_t begin = static_cast<std::size_t>(b) * cfg.batch_size;
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const Eigen::MatrixXd batch = gather_rows(data, order, begin, end);
      std::vector<int> labels;
      for (std::size_t i = begin; i < end; ++i) labels.push_back(data.labels[order[i]]);

      const ForwardPass pass = forward(net, batch, cfg.dropout_rate, true, rng());
      const Gradients g = backward(net, pass, labels, masks.empty() ? nullptr : &masks);
      if (!std::isfinite(g.loss)) {
        throw TrainingError("loss became non-finite at epoch " + std::to_string(epoch) +
                            ", step " + std::to_string(step + 1));
      }
      loss_sum += g.loss * static_cast<double>(labels.size());
      for (Eigen::Index i = 0; i < pass.logits.rows(); ++i) {
        Eigen::Index best = 0;
        pass.logits.row(i).maxCoeff(&best);
        correct += best == labels[static_cast<std::size_t>(i)];
      }

      ++step;
      const double b1 = cfg.adam_beta1;
      const double b2 = cfg.adam_beta2;
      const double lr_t = cfg.learning_rate * std::sqrt(1.0 - std::pow(b2, step)) /
                          (1.0 - std::pow(b1, step));
      for (int l = 0; l < layers; ++l) {
        mw[l] = b1 * mw[l] + (1.0 - b1) * g.weights[l];
        vw[l] = b2 * vw[l] + (1.0 - b2) * g.weights[l].cwiseAbs2();
        net.weights[l].array() -=
            lr_t * mw[l].array() / (vw[l].array().sqrt() + cfg.adam_epsilon);
        if (!masks.empty()) net.weights[l] = net.weights[l].cwiseProduct(masks[l]);
        mb[l] = b1 * mb[l] + (1.0 - b1) * g.biases[l];
        vb[l] = b2 * vb[l] + (1.0 - b2) * g.biases[l].cwiseAbs2();
        net.biases[l].array() -=
            lr_t * mb[l].array() / (vb[l].array().sqrt() + cfg.adam_epsilon);
      }
      if (pruning) ++prune_step;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.phase = pruning ? "prune" : "dense";
    m.loss = loss_sum / data.size();
    m.train_accuracy = static_cast<double>(correct) / data.size();
    m.sparsity = overall_sparsity(net);
    result.metrics.push_back(m);
    if (on_epoch) on_epoch(m);
  }

  result.network = round_to_float(net);
  return result;
}

void write_metrics_csv(std::ostream& out, const std::vector<EpochMetrics>& metrics) {
  out << "epoch,phase,loss,train_acc,sparsity\n";
  out.precision(10);
  for (const auto& m : metrics) {
    out << m.epoch << ',' << m.phase << ',' << m.loss << ',' << m.train_accuracy << ','
        << m.sparsity << '\n';
  }
}

}  // namespace modgraph
