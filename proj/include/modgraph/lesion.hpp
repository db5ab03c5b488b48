#pragma once

#include "modgraph/graph.hpp"
#include "modgraph/network.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace modgraph {

/// How a lesioned neuron is silenced.
enum class LesionMode {
  kIncomingWeights,  // zero the neuron's incoming weights, keep its bias
  kActivation,       // additionally zero its bias, so its output is exactly 0
};

std::string to_string(LesionMode mode);
LesionMode parse_lesion_mode(const std::string& name);

/// Identifies a sub-module by hidden layer (1 = first hidden layer) and cluster.
struct SubModuleId {
  int layer = 0;
  int module = 0;

  /// "layer-module", e.g. "2-7".
  std::string label() const;
  auto operator<=>(const SubModuleId&) const = default;
};

/// The neurons of one cluster inside one hidden layer.
struct SubModule {
  SubModuleId id;
  std::vector<int> neurons;  // within-layer indices, ascending
  double proportion = 0.0;   // |neurons| / surviving neurons of the layer
};

/// Splits every hidden layer by cluster. Only clusters with at least one
/// neuron in a layer yield a sub-module there.
std::vector<SubModule> sub_modules(const NeuronAssignment& assignment,
                                   const LayeredNetwork& net);
std::vector<SubModule> sub_modules(const WeightedGraph& g, const Partition& p,
                                   const LayeredNetwork& net);

/// Copy of `net` with the targeted hidden neurons silenced.
/// Throws ContractViolation for a target outside the hidden layers.
LayeredNetwork lesion_net(const LayeredNetwork& net, const std::vector<NeuronId>& targets,
                          LesionMode mode = LesionMode::kIncomingWeights);

/// Accuracy of lesioned copies of one network on one dataset. Pre-activations
/// of the intact network are cached so a lesion only recomputes the layers
/// at and after its earliest target. Safe to share between threads.
class LesionEvaluator {
 public:
  LesionEvaluator(const LayeredNetwork& net, const Dataset& data,
                  LesionMode mode = LesionMode::kIncomingWeights);

  double base_accuracy() const { return base_accuracy_; }
  double accuracy(const std::vector<NeuronId>& targets) const;
  /// base_accuracy() - accuracy(targets).
  double drop(const std::vector<NeuronId>& targets) const;

  const LayeredNetwork& network() const { return net_; }
  /// Surviving (graph-connected) neurons of a hidden layer.
  const std::vector<int>& surviving(int layer) const { return surviving_[layer]; }

 private:
  LayeredNetwork net_;
  LesionMode mode_;
  std::vector<int> labels_;
  // chunks_[c][l] holds the pre-activations of layer l (l >= 1) for chunk c.
  std::vector<std::vector<Eigen::MatrixXd>> chunks_;
  std::vector<std::vector<int>> surviving_;
  double base_accuracy_ = 0.0;
};

enum class LesionClass { kImportant, kSigButNotDiff, kSmall, kOther };

std::string to_string(LesionClass c);

struct ClassificationThresholds {
  double min_drop = 0.01;        // accuracy drop must exceed this
  double min_proportion = 0.05;  // sub-module must cover at least this much
};

/// small if the proportion is below threshold; otherwise important when
/// significant with a large drop, sig-but-not-diff when significant only,
/// and other when not significant.
LesionClass classify(double acc_drop, double proportion, bool significant,
                     const ClassificationThresholds& t = {});

struct LesionOutcome {
  SubModule sub;
  double accuracy = 0.0;
  double acc_drop = 0.0;
  std::vector<double> null_drops;
  /// acc_drop strictly greater than every null drop.
  bool significant = false;
  /// (1 + #{null >= acc_drop}) / (n + 1).
  double p_value = 1.0;
  LesionClass classification = LesionClass::kOther;
};

struct SingleLesionReport {
  double base_accuracy = 0.0;
  std::vector<LesionOutcome> outcomes;
  /// One message per skipped sub-module.
  std::vector<std::string> notices;
};

/// Same-size random lesion from a hidden layer's surviving neurons, sampled
/// without replacement. Deterministic in `seed`.
std::vector<int> random_layer_subset(const std::vector<int>& surviving, int size,
                                     std::uint64_t seed);

SingleLesionReport single_lesion_study(const LesionEvaluator& eval,
                                       const std::vector<SubModule>& subs, int n_null,
                                       std::uint64_t seed, int workers = 1,
                                       const ClassificationThresholds& t = {});

/// Conditional importance of two sub-modules in different layers, x earlier.
struct ConditionalImportance {
  SubModuleId x;
  SubModuleId y;
  bool x_given_y = false;  // X important once Y is lesioned
  bool y_given_x = false;
  double delta_xy = 0.0;   // l(X u Y) - l(Y)
  double delta_yx = 0.0;   // l(X u Y) - l(X)
};

struct DoubleLesionRow {
  ConditionalImportance flags;
  double loss_x = 0.0;
  double loss_y = 0.0;
  double loss_xy = 0.0;
  std::vector<double> null_x;  // l(X' u Y)
  std::vector<double> null_y;  // l(X u Y')
};

/// Pairs of important sub-modules lying in different layers, in report order.
std::vector<std::pair<SubModule, SubModule>> important_pairs(const SingleLesionReport& r);

/// For each pair, lesions X u Y and compares against `n_null` draws of
/// X' u Y and X u Y' with same-size random X', Y' from the same layers.
/// Throws ContractViolation when a pair shares a layer.
std::vector<DoubleLesionRow> double_lesion_study(
    const LesionEvaluator& eval, const std::vector<std::pair<SubModule, SubModule>>& pairs,
    int n_null, std::uint64_t seed, int workers = 1,
    const ClassificationThresholds& t = {});

struct DependencyEdge {
  SubModuleId from;  // earlier layer
  SubModuleId to;
  ConditionalImportance evidence;
};

/// Decides whether a (layer-ordered) pair gets an edge.
using EdgePolicy = std::function<bool(const ConditionalImportance&)>;

/// Edge unless each sub-module is important given the other.
bool edge_unless_mutually_important(const ConditionalImportance& c);

/// Applies `policy` to every row; rows are oriented so that `from` lies in
/// the earlier layer. Throws ContractViolation for a same-layer row.
std::vector<DependencyEdge> derive_dependency_graph(
    const std::vector<ConditionalImportance>& table,
    const EdgePolicy& policy = edge_unless_mutually_important);

/// "layer,label,acc_diff,p,proportion,type"; acc_diff is minus the drop.
void write_single_lesion_csv(std::ostream& out, const SingleLesionReport& r);

/// "x,y,x_given_y,y_given_x,delta_xy,delta_yx"
void write_double_lesion_csv(std::ostream& out, const std::vector<DoubleLesionRow>& rows);

void write_dependency_dot(std::ostream& out, const std::vector<SubModuleId>& nodes,
                          const std::vector<DependencyEdge>& edges);

}  // namespace modgraph
