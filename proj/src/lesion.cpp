#include "modgraph/lesion.hpp"

#include "modgraph/errors.hpp"
#include "modgraph/parallel.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <random>
#include <set>

namespace modgraph {

std::string to_string(LesionMode mode) {
  return mode == LesionMode::kIncomingWeights ? "weights" : "activation";
}

LesionMode parse_lesion_mode(const std::string& name) {
  if (name == "weights") return LesionMode::kIncomingWeights;
  if (name == "activation") return LesionMode::kActivation;
  throw ValidationError("unknown lesion mode '" + name + "' (expected weights or activation)");
}

std::string SubModuleId::label() const {
  return std::to_string(layer) + "-" + std::to_string(module);
}

std::string to_string(LesionClass c) {
  switch (c) {
    case LesionClass::kImportant: return "important";
    case LesionClass::kSigButNotDiff: return "sig-but-not-diff";
    case LesionClass::kSmall: return "small";
    case LesionClass::kOther: return "other";
  }
  return "other";
}

namespace {

bool is_hidden(const LayeredNetwork& net, int layer) {
  return layer >= 1 && layer + 1 < net.num_layers();
}

std::vector<SubModule> group(const std::vector<NeuronId>& neurons,
                             const std::vector<int>& clusters, const LayeredNetwork& net) {
  std::map<int, int> layer_size;
  std::map<SubModuleId, std::vector<int>> members;
  for (std::size_t i = 0; i < neurons.size(); ++i) {
    const NeuronId& id = neurons[i];
    if (!is_hidden(net, id.layer)) continue;
    if (id.index < 0 || id.index >= net.layer_dims[id.layer]) {
      throw ValidationError("partition names neuron " + std::to_string(id.index) +
                            " of layer " + std::to_string(id.layer) +
                            ", which the network does not have");
    }
    ++layer_size[id.layer];
    members[{id.layer, clusters[i]}].push_back(id.index);
  }
  std::vector<SubModule> out;
  for (auto& [id, idx] : members) {
    std::sort(idx.begin(), idx.end());
    const double proportion =
        static_cast<double>(idx.size()) / static_cast<double>(layer_size[id.layer]);
    out.push_back({id, std::move(idx), proportion});
  }
  return out;
}

}  // namespace

std::vector<SubModule> sub_modules(const NeuronAssignment& assignment,
                                   const LayeredNetwork& net) {
  return group(assignment.neurons, assignment.clusters, net);
}

std::vector<SubModule> sub_modules(const WeightedGraph& g, const Partition& p,
                                   const LayeredNetwork& net) {
  if (p.size() != g.num_vertices()) {
    throw ContractViolation("partition size does not match the graph");
  }
  return group(g.neurons(), p.assignment, net);
}

LayeredNetwork lesion_net(const LayeredNetwork& net, const std::vector<NeuronId>& targets,
                          LesionMode mode) {
  LayeredNetwork out = net;
  for (const NeuronId& t : targets) {
    if (!is_hidden(net, t.layer) || t.index < 0 || t.index >= net.layer_dims[t.layer]) {
      throw ContractViolation("lesion target (" + std::to_string(t.layer) + ", " +
                              std::to_string(t.index) + ") is not a hidden neuron");
    }
    out.weights[t.layer - 1].col(t.index).setZero();
    if (mode == LesionMode::kActivation && out.has_biases()) {
      out.biases[t.layer - 1](t.index) = 0.0;
    }
  }
  return out;
}

namespace {

constexpr Eigen::Index kChunk = 1024;

Eigen::MatrixXd affine(const LayeredNetwork& net, int l, const Eigen::MatrixXd& a) {
  Eigen::MatrixXd z = a * net.weights[l];
  if (net.has_biases()) z.rowwise() += net.biases[l].transpose();
  return z;
}

}  // namespace

LesionEvaluator::LesionEvaluator(const LayeredNetwork& net, const Dataset& data,
                                 LesionMode mode)
    : net_(net), mode_(mode), labels_(data.labels) {
  net.validate();
  data.validate();
  if (data.size() == 0) throw ContractViolation("lesion evaluation needs a nonempty dataset");
  if (data.input_dim() != net.input_dim()) {
    throw ValidationError("dataset width does not match the network input");
  }

  surviving_.resize(net.num_layers());
  const WeightedGraph g = network_to_graph(net);
  for (const NeuronId& id : g.neurons()) surviving_[id.layer].push_back(id.index);

  const int layers = net.num_weight_layers();
  int correct = 0;
  for (Eigen::Index begin = 0; begin < data.size(); begin += kChunk) {
    const Eigen::Index rows = std::min<Eigen::Index>(kChunk, data.size() - begin);
    std::vector<Eigen::MatrixXd> pre(layers + 1);
    Eigen::MatrixXd a = data.images.middleRows(begin, rows).cast<double>();
    for (int l = 0; l < layers; ++l) {
      pre[l + 1] = affine(net, l, a);
      a = pre[l + 1].cwiseMax(0.0);
    }
    for (Eigen::Index i = 0; i < rows; ++i) {
      Eigen::Index best = 0;
      pre[layers].row(i).maxCoeff(&best);
      correct += best == labels_[begin + i];
    }
    chunks_.push_back(std::move(pre));
  }
  base_accuracy_ = static_cast<double>(correct) / data.size();
}

double LesionEvaluator::accuracy(const std::vector<NeuronId>& targets) const {
  if (targets.empty()) return base_accuracy_;
  const int layers = net_.num_weight_layers();
  std::vector<std::vector<int>> by_layer(net_.num_layers());
  int first = layers;
  for (const NeuronId& t : targets) {
    if (!is_hidden(net_, t.layer) || t.index < 0 || t.index >= net_.layer_dims[t.layer]) {
      throw ContractViolation("lesion target (" + std::to_string(t.layer) + ", " +
                              std::to_string(t.index) + ") is not a hidden neuron");
    }
    by_layer[t.layer].push_back(t.index);
    first = std::min(first, t.layer);
  }
  // Silencing a neuron replaces its pre-activation with its bias (weights
  // mode) or with zero (activation mode).
  auto silence = [&](Eigen::MatrixXd& z, int layer) {
    for (int j : by_layer[layer]) {
      const double fill = mode_ == LesionMode::kIncomingWeights && net_.has_biases()
                              ? net_.biases[layer - 1](j)
                              : 0.0;
      z.col(j).setConstant(fill);
    }
  };

  int correct = 0;
  Eigen::Index offset = 0;
  for (const auto& pre : chunks_) {
    Eigen::MatrixXd z = pre[first];
    silence(z, first);
    for (int l = first; l < layers; ++l) {
      z = affine(net_, l, z.cwiseMax(0.0));
      if (l + 1 < layers) silence(z, l + 1);
    }
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      Eigen::Index best = 0;
      z.row(i).maxCoeff(&best);
      correct += best == labels_[offset + i];
    }
    offset += z.rows();
  }
  return static_cast<double>(correct) / static_cast<double>(labels_.size());
}

double LesionEvaluator::drop(const std::vector<NeuronId>& targets) const {
  return base_accuracy_ - accuracy(targets);
}

LesionClass classify(double acc_drop, double proportion, bool significant,
                     const ClassificationThresholds& t) {
  if (proportion < t.min_proportion) return LesionClass::kSmall;
  if (significant) {
    return acc_drop > t.min_drop ? LesionClass::kImportant : LesionClass::kSigButNotDiff;
  }
  return LesionClass::kOther;
}

std::vector<int> random_layer_subset(const std::vector<int>& surviving, int size,
                                     std::uint64_t seed) {
  if (size < 0 || size > static_cast<int>(surviving.size())) {
    throw ContractViolation("cannot draw " + std::to_string(size) + " of " +
                            std::to_string(surviving.size()) + " neurons");
  }
  std::vector<int> out;
  out.reserve(size);
  std::mt19937_64 rng(seed);
  std::sample(surviving.begin(), surviving.end(), std::back_inserter(out), size, rng);
  return out;
}

namespace {

std::vector<NeuronId> as_targets(int layer, const std::vector<int>& idx) {
  std::vector<NeuronId> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back({layer, i});
  return out;
}

std::vector<NeuronId> concat(std::vector<NeuronId> a, const std::vector<NeuronId>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

bool beats_all(double value, const std::vector<double>& nulls) {
  return std::all_of(nulls.begin(), nulls.end(), [&](double x) { return value > x; });
}

}  // namespace

SingleLesionReport single_lesion_study(const LesionEvaluator& eval,
                                       const std::vector<SubModule>& subs, int n_null,
                                       std::uint64_t seed, int workers,
                                       const ClassificationThresholds& t) {
  if (n_null < 1) throw ContractViolation("single lesion study needs n_null >= 1");
  SingleLesionReport report;
  report.base_accuracy = eval.base_accuracy();

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    const SubModule& s = subs[i];
    if (s.neurons.empty()) {
      report.notices.push_back("skipping sub-module " + s.id.label() +
                               ": no surviving neurons");
      continue;
    }
    if (s.id.layer < 1 || s.id.layer + 1 >= eval.network().num_layers()) {
      throw ContractViolation("sub-module " + s.id.label() + " is not in a hidden layer");
    }
    kept.push_back(i);
  }

  report.outcomes.resize(kept.size());
  // One task per (sub-module, draw); draw -1 is the sub-module itself.
  const int per_sub = n_null + 1;
  std::vector<double> drops(kept.size() * per_sub);
  parallel_for(static_cast<int>(drops.size()), workers, [&](int task) {
    const std::size_t k = static_cast<std::size_t>(task / per_sub);
    const int draw = task % per_sub - 1;
    const SubModule& s = subs[kept[k]];
    std::vector<int> idx = s.neurons;
    if (draw >= 0) {
      idx = random_layer_subset(eval.surviving(s.id.layer), static_cast<int>(s.neurons.size()),
                                derive_seed(derive_seed(seed, kept[k]), draw));
    }
    drops[task] = eval.drop(as_targets(s.id.layer, idx));
  });

  for (std::size_t k = 0; k < kept.size(); ++k) {
    LesionOutcome& o = report.outcomes[k];
    o.sub = subs[kept[k]];
    o.acc_drop = drops[k * per_sub];
    o.accuracy = report.base_accuracy - o.acc_drop;
    o.null_drops.assign(drops.begin() + k * per_sub + 1, drops.begin() + (k + 1) * per_sub);
    o.significant = beats_all(o.acc_drop, o.null_drops);
    const auto ge = std::count_if(o.null_drops.begin(), o.null_drops.end(),
                                  [&](double x) { return x >= o.acc_drop; });
    o.p_value = static_cast<double>(ge + 1) / static_cast<double>(n_null + 1);
    o.classification = classify(o.acc_drop, o.sub.proportion, o.significant, t);
  }
  return report;
}

std::vector<std::pair<SubModule, SubModule>> important_pairs(const SingleLesionReport& r) {
  std::vector<const SubModule*> important;
  for (const auto& o : r.outcomes) {
    if (o.classification == LesionClass::kImportant) important.push_back(&o.sub);
  }
  std::vector<std::pair<SubModule, SubModule>> out;
  for (std::size_t i = 0; i < important.size(); ++i) {
    for (std::size_t j = i + 1; j < important.size(); ++j) {
      const SubModule* a = important[i];
      const SubModule* b = important[j];
      if (a->id.layer == b->id.layer) continue;
      if (a->id.layer > b->id.layer) std::swap(a, b);
      out.emplace_back(*a, *b);
    }
  }
  return out;
}

std::vector<DoubleLesionRow> double_lesion_study(
    const LesionEvaluator& eval, const std::vector<std::pair<SubModule, SubModule>>& pairs,
    int n_null, std::uint64_t seed, int workers, const ClassificationThresholds& t) {
  if (n_null < 1) throw ContractViolation("double lesion study needs n_null >= 1");
  std::vector<std::pair<SubModule, SubModule>> ordered;
  for (auto [x, y] : pairs) {
    if (x.id.layer == y.id.layer) {
      throw ContractViolation("double lesion pair " + x.id.label() + ", " + y.id.label() +
                              " lies in a single layer");
    }
    if (x.neurons.empty() || y.neurons.empty()) {
      throw ContractViolation("double lesion pair " + x.id.label() + ", " + y.id.label() +
                              " has an empty sub-module");
    }
    if (x.id.layer > y.id.layer) std::swap(x, y);
    ordered.emplace_back(std::move(x), std::move(y));
  }

  // Per pair: X, Y, X u Y, then n_null draws of X' u Y and n_null of X u Y'.
  const int per_pair = 3 + 2 * n_null;
  std::vector<double> losses(ordered.size() * per_pair);
  parallel_for(static_cast<int>(losses.size()), workers, [&](int task) {
    const std::size_t p = static_cast<std::size_t>(task / per_pair);
    const int slot = task % per_pair;
    const SubModule& x = ordered[p].first;
    const SubModule& y = ordered[p].second;
    const std::uint64_t pair_seed = derive_seed(seed, p);
    auto xt = as_targets(x.id.layer, x.neurons);
    auto yt = as_targets(y.id.layer, y.neurons);
    std::vector<NeuronId> targets;
    if (slot == 0) {
      targets = xt;
    } else if (slot == 1) {
      targets = yt;
    } else if (slot == 2) {
      targets = concat(xt, yt);
    } else if (slot < 3 + n_null) {
      const int draw = slot - 3;
      auto xr = random_layer_subset(eval.surviving(x.id.layer),
                                    static_cast<int>(x.neurons.size()),
                                    derive_seed(derive_seed(pair_seed, 0), draw));
      targets = concat(as_targets(x.id.layer, xr), yt);
    } else {
      const int draw = slot - 3 - n_null;
      auto yr = random_layer_subset(eval.surviving(y.id.layer),
                                    static_cast<int>(y.neurons.size()),
                                    derive_seed(derive_seed(pair_seed, 1), draw));
      targets = concat(xt, as_targets(y.id.layer, yr));
    }
    losses[task] = eval.drop(targets);
  });

  std::vector<DoubleLesionRow> rows;
  for (std::size_t p = 0; p < ordered.size(); ++p) {
    const double* l = losses.data() + p * per_pair;
    DoubleLesionRow row;
    row.flags.x = ordered[p].first.id;
    row.flags.y = ordered[p].second.id;
    row.loss_x = l[0];
    row.loss_y = l[1];
    row.loss_xy = l[2];
    row.null_x.assign(l + 3, l + 3 + n_null);
    row.null_y.assign(l + 3 + n_null, l + 3 + 2 * n_null);
    row.flags.delta_xy = row.loss_xy - row.loss_y;
    row.flags.delta_yx = row.loss_xy - row.loss_x;
    row.flags.x_given_y = beats_all(row.loss_xy, row.null_x) && row.flags.delta_xy > t.min_drop;
    row.flags.y_given_x = beats_all(row.loss_xy, row.null_y) && row.flags.delta_yx > t.min_drop;
    rows.push_back(std::move(row));
  }
  return rows;
}

bool edge_unless_mutually_important(const ConditionalImportance& c) {
  return !(c.x_given_y && c.y_given_x);
}

std::vector<DependencyEdge> derive_dependency_graph(
    const std::vector<ConditionalImportance>& table, const EdgePolicy& policy) {
  std::vector<DependencyEdge> edges;
  for (ConditionalImportance c : table) {
    if (c.x.layer == c.y.layer) {
      throw ContractViolation("dependency row " + c.x.label() + ", " + c.y.label() +
                              " lies in a single layer");
    }
    if (c.x.layer > c.y.layer) {
      std::swap(c.x, c.y);
      std::swap(c.x_given_y, c.y_given_x);
      std::swap(c.delta_xy, c.delta_yx);
    }
    if (policy(c)) edges.push_back({c.x, c.y, c});
  }
  return edges;
}

void write_single_lesion_csv(std::ostream& out, const SingleLesionReport& r) {
  out << "layer,label,acc_diff,p,proportion,type\n";
  out.precision(6);
  for (const auto& o : r.outcomes) {
    out << o.sub.id.layer << ',' << o.sub.id.module << ',' << -o.acc_drop << ','
        << o.p_value << ',' << o.sub.proportion << ',' << to_string(o.classification) << '\n';
  }
}

void write_double_lesion_csv(std::ostream& out, const std::vector<DoubleLesionRow>& rows) {
  out << "x,y,x_given_y,y_given_x,delta_xy,delta_yx\n";
  out.precision(6);
  for (const auto& r : rows) {
    out << r.flags.x.label() << ',' << r.flags.y.label() << ','
        << (r.flags.x_given_y ? "yes" : "no") << ',' << (r.flags.y_given_x ? "yes" : "no")
        << ',' << r.flags.delta_xy << ',' << r.flags.delta_yx << '\n';
  }
}

void write_dependency_dot(std::ostream& out, const std::vector<SubModuleId>& nodes,
                          const std::vector<DependencyEdge>& edges) {
  std::set<SubModuleId> all(nodes.begin(), nodes.end());
  for (const auto& e : edges) {
    all.insert(e.from);
    all.insert(e.to);
  }
  out << "digraph dependencies {\n  rankdir=LR;\n";
  for (const auto& n : all) out << "  \"" << n.label() << "\";\n";
  for (const auto& e : edges) {
    out << "  \"" << e.from.label() << "\" -> \"" << e.to.label() << "\";\n";
  }
  out << "}\n";
}

}  // namespace modgraph
