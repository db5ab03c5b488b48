#include "modgraph/nullmodel.hpp"

#include "modgraph/errors.hpp"
#include "modgraph/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace modgraph {

std::string to_string(ShuffleKind kind) {
  return kind == ShuffleKind::kFullLayer ? "layer" : "nonzero";
}

ShuffleKind parse_shuffle_kind(const std::string& name) {
  if (name == "layer" || name == "full" || name == "full-layer") {
    return ShuffleKind::kFullLayer;
  }
  if (name == "nonzero" || name == "layer-nonzero") {
    return ShuffleKind::kNonzeroPreserving;
  }
  throw ValidationError("unknown shuffle kind '" + name +
                        "' (expected layer or nonzero)");
}

LayeredNetwork shuffle_layers(const LayeredNetwork& net, std::uint64_t seed) {
  LayeredNetwork out = net;
  for (std::size_t l = 0; l < out.weights.size(); ++l) {
    std::mt19937_64 rng(derive_seed(seed, l));
    auto& w = out.weights[l];
    std::shuffle(w.data(), w.data() + w.size(), rng);
  }
  return out;
}

LayeredNetwork shuffle_nonzero(const LayeredNetwork& net, std::uint64_t seed) {
  LayeredNetwork out = net;
  for (std::size_t l = 0; l < out.weights.size(); ++l) {
    std::mt19937_64 rng(derive_seed(seed, l));
    auto& w = out.weights[l];
    std::vector<Eigen::Index> positions;
    std::vector<double> values;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      if (w.data()[i] != 0.0) {
        positions.push_back(i);
        values.push_back(w.data()[i]);
      }
    }
    std::shuffle(values.begin(), values.end(), rng);
    for (std::size_t i = 0; i < positions.size(); ++i) {
      w.data()[positions[i]] = values[i];
    }
  }
  return out;
}

LayeredNetwork shuffle(const LayeredNetwork& net, ShuffleKind kind,
                       std::uint64_t seed) {
  return kind == ShuffleKind::kFullLayer ? shuffle_layers(net, seed)
                                         : shuffle_nonzero(net, seed);
}

double one_sided_p_value(double observed, std::span<const double> nulls) {
  const auto r = std::count_if(nulls.begin(), nulls.end(),
                               [&](double x) { return x <= observed; });
  return static_cast<double>(r + 1) / static_cast<double>(nulls.size() + 1);
}

double NullDistribution::null_mean() const {
  if (null_ncuts.empty()) return 0.0;
  return std::accumulate(null_ncuts.begin(), null_ncuts.end(), 0.0) /
         static_cast<double>(null_ncuts.size());
}

double NullDistribution::null_std() const {
  if (null_ncuts.size() < 2) return 0.0;
  const double mean = null_mean();
  double ss = 0.0;
  for (double x : null_ncuts) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(null_ncuts.size() - 1));
}

std::uint64_t null_sample_seed(std::uint64_t seed, int i) {
  return derive_seed(seed, static_cast<std::uint64_t>(i) + 1);
}

NullDistribution null_distribution(const LayeredNetwork& net, int k, int n_samples,
                                   ShuffleKind kind, std::uint64_t seed, int workers,
                                   const SpectralOptions& options) {
  if (n_samples < 1) throw ContractViolation("null distribution needs n_samples >= 1");
  if (k < 1) throw ContractViolation("k must be positive");

  NullDistribution dist;
  dist.shuffle_kind = kind;
  dist.seed = seed;
  dist.k = k;
  dist.observed_ncut = cluster_network(net, k, seed, options).ncut_value;
  dist.null_ncuts.assign(n_samples, 0.0);

  parallel_for(n_samples, workers, [&](int i) {
    const std::uint64_t s = null_sample_seed(seed, i);
    try {
      const LayeredNetwork shuffled = shuffle(net, kind, derive_seed(s, 0));
      dist.null_ncuts[i] = cluster_network(shuffled, k, derive_seed(s, 1), options).ncut_value;
    } catch (const Error& e) {
      throw Error("null sample " + std::to_string(i) + ": " + e.what());
    }
  });
  dist.p_value = one_sided_p_value(dist.observed_ncut, dist.null_ncuts);
  return dist;
}

double cohens_d(std::span<const double> a, std::span<const double> b) {
  const auto n1 = static_cast<double>(a.size());
  const auto n2 = static_cast<double>(b.size());
  if (a.empty() || b.empty() || a.size() + b.size() < 3) {
    throw ContractViolation("Cohen's d needs two nonempty samples with n1 + n2 >= 3");
  }
  auto mean = [](std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  };
  auto sum_sq = [](std::span<const double> x, double m) {
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s;
  };
  const double m1 = mean(a);
  const double m2 = mean(b);
  // (n1 - 1) s1^2 + (n2 - 1) s2^2 is the pooled sum of squared deviations.
  const double pooled_var = (sum_sq(a, m1) + sum_sq(b, m2)) / (n1 + n2 - 2.0);
  if (!(pooled_var > 0.0)) {
    throw UndefinedStatistic("Cohen's d is undefined for zero pooled variance");
  }
  return (m1 - m2) / std::sqrt(pooled_var);
}

void write_null_csv(std::ostream& out, const NullDistribution& dist) {
  out << "sample,ncut\n";
  out.precision(17);
  for (std::size_t i = 0; i < dist.null_ncuts.size(); ++i) {
    out << i << ',' << dist.null_ncuts[i] << '\n';
  }
}

std::string null_summary_json(const NullDistribution& dist) {
  const nlohmann::json doc = {
      {"observed", dist.observed_ncut},
      {"mean", dist.null_mean()},
      {"std", dist.null_std()},
      {"p_value", dist.p_value},
      {"kind", to_string(dist.shuffle_kind)},
      {"n_samples", dist.null_ncuts.size()},
      {"seed", dist.seed},
      {"k", dist.k},
  };
  return doc.dump(2);
}

}  // namespace modgraph
