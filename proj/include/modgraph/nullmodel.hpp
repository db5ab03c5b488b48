#pragma once

#include "modgraph/network.hpp"
#include "modgraph/spectral.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace modgraph {

enum class ShuffleKind {
  kFullLayer,           // permute every entry of each weight matrix
  kNonzeroPreserving,   // permute only nonzero entries, zeros stay in place
};

std::string to_string(ShuffleKind kind);
ShuffleKind parse_shuffle_kind(const std::string& name);

/// Uniformly permutes all entries of every weight matrix. Biases untouched.
LayeredNetwork shuffle_layers(const LayeredNetwork& net, std::uint64_t seed);

/// Uniformly permutes the nonzero entries of every weight matrix among the
/// nonzero positions, leaving the sparsity pattern intact.
LayeredNetwork shuffle_nonzero(const LayeredNetwork& net, std::uint64_t seed);

LayeredNetwork shuffle(const LayeredNetwork& net, ShuffleKind kind,
                       std::uint64_t seed);

/// Permutation-test p-value (r + 1) / (n + 1), where r counts null values
/// less than or equal to `observed`.
double one_sided_p_value(double observed, std::span<const double> nulls);

struct NullDistribution {
  double observed_ncut = 0.0;
  std::vector<double> null_ncuts;
  ShuffleKind shuffle_kind = ShuffleKind::kFullLayer;
  double p_value = 1.0;
  std::uint64_t seed = 0;
  int k = 0;

  double null_mean() const;
  /// Sample standard deviation (n - 1 denominator); 0 for a single sample.
  double null_std() const;
};

/// Seed used for null sample i; each sample's shuffle and clustering derive
/// from it, so results do not depend on the worker count.
std::uint64_t null_sample_seed(std::uint64_t seed, int i);

/// Clusters `net` and `n_samples` shuffles of it, then computes the p-value.
/// Errors from a sample are rethrown with the sample index attached.
NullDistribution null_distribution(const LayeredNetwork& net, int k, int n_samples,
                                   ShuffleKind kind, std::uint64_t seed,
                                   int workers = 1,
                                   const SpectralOptions& options = {});

/// (mean_a - mean_b) / pooled standard deviation, with n - 1 sample
/// variances. Throws UndefinedStatistic when the pooled variance is zero,
/// ContractViolation when n_a + n_b < 3 or either sample is empty.
double cohens_d(std::span<const double> a, std::span<const double> b);

/// One null n-cut per line under the header "sample,ncut".
void write_null_csv(std::ostream& out, const NullDistribution& dist);

/// {observed, mean, std, p_value, kind, n_samples, seed, k}
std::string null_summary_json(const NullDistribution& dist);

}  // namespace modgraph
