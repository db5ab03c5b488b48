#include "modgraph/errors.hpp"
#include "modgraph/spectral.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace modgraph {

NormalizedLaplacian::NormalizedLaplacian(const WeightedGraph& g) {
  const Eigen::VectorXd& d = g.degrees();
  if ((d.array() <= 0.0).any()) {
    throw ContractViolation("normalized Laplacian needs positive degrees");
  }
  inv_sqrt_degree_ = d.array().rsqrt();
  normalized_adjacency_ = inv_sqrt_degree_.asDiagonal() * g.adjacency() *
                          inv_sqrt_degree_.asDiagonal();
}

Eigen::VectorXd NormalizedLaplacian::apply(const Eigen::VectorXd& x) const {
  // x - D^{-1} A x, with D^{-1} A = D^{-1/2} M D^{1/2}.
  const Eigen::VectorXd scaled = x.cwiseQuotient(inv_sqrt_degree_);
  return x - inv_sqrt_degree_.cwiseProduct(normalized_adjacency_ * scaled);
}

Eigen::VectorXd NormalizedLaplacian::apply_symmetric(const Eigen::VectorXd& x) const {
  return x - normalized_adjacency_ * x;
}

Eigen::MatrixXd NormalizedLaplacian::apply_similarity(const Eigen::MatrixXd& x) const {
  return normalized_adjacency_ * x;
}

Eigen::MatrixXd NormalizedLaplacian::dense_symmetric() const {
  Eigen::MatrixXd s = -Eigen::MatrixXd(normalized_adjacency_);
  s.diagonal().array() += 1.0;
  return s;
}

Eigen::VectorXd NormalizedLaplacian::to_random_walk(const Eigen::VectorXd& v) const {
  return inv_sqrt_degree_.cwiseProduct(v);
}

Eigen::VectorXd NormalizedLaplacian::to_symmetric(const Eigen::VectorXd& u) const {
  return u.cwiseQuotient(inv_sqrt_degree_);
}

std::string to_string(EigenSolverKind kind) {
  switch (kind) {
    case EigenSolverKind::kAuto: return "auto";
    case EigenSolverKind::kDense: return "dense";
    case EigenSolverKind::kKrylov: return "krylov";
  }
  return "auto";
}

EigenSolverKind parse_eigen_solver(const std::string& name) {
  if (name == "auto") return EigenSolverKind::kAuto;
  if (name == "dense") return EigenSolverKind::kDense;
  if (name == "krylov") return EigenSolverKind::kKrylov;
  throw ValidationError("unknown eigensolver '" + name +
                        "' (expected auto, dense or krylov)");
}

namespace {

struct EigenPairs {
  Eigen::MatrixXd symmetric_vectors;  // N x k, orthonormal eigenvectors of L_sym
  Eigen::VectorXd values;             // ascending
  int iterations = 0;
};

double random_walk_residual(const NormalizedLaplacian& lap, const Eigen::VectorXd& u,
                            double lambda) {
  return (lap.apply(u) - lambda * u).norm() / u.norm();
}

EigenPairs solve_dense(const NormalizedLaplacian& lap, int k) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lap.dense_symmetric());
  if (es.info() != Eigen::Success) {
    throw SolverError("dense symmetric eigensolver failed", INFINITY);
  }
  return {es.eigenvectors().leftCols(k), es.eigenvalues().head(k), 0};
}

// Orthogonalizes the columns of `block` against basis.leftCols(used) and
// against each other (two passes of classical Gram-Schmidt). Columns that
// collapse are replaced with fresh random directions. Returns the number of
// columns that could be made orthonormal (fewer only when the space is
// exhausted).
int orthonormalize_block(const Eigen::MatrixXd& basis, int used,
                         Eigen::MatrixXd& block, std::mt19937_64& rng) {
  const Eigen::Index n = block.rows();
  std::normal_distribution<double> gauss;
  int accepted = 0;
  for (Eigen::Index c = 0; c < block.cols(); ++c) {
    Eigen::VectorXd v = block.col(c);
    bool ok = false;
    for (int attempt = 0; attempt < 8 && !ok; ++attempt) {
      const double original = v.norm();
      for (int pass = 0; pass < 2; ++pass) {
        if (used > 0) v -= basis.leftCols(used) * (basis.leftCols(used).transpose() * v);
        if (accepted > 0) v -= block.leftCols(accepted) * (block.leftCols(accepted).transpose() * v);
      }
      const double norm = v.norm();
      if (original > 0.0 && norm > 1e-10 * original) {
        block.col(accepted) = v / norm;
        ok = true;
      } else {
        for (Eigen::Index i = 0; i < n; ++i) v(i) = gauss(rng);
      }
    }
    if (!ok) break;
    ++accepted;
  }
  return accepted;
}

// Block Krylov-Schur iteration for the largest eigenvalues of
// M = D^{-1/2} A D^{-1/2}; lambda(L_sym) = 1 - theta(M). The block size is k
// so eigenvalues of multiplicity up to k (disconnected graphs) are found.
EigenPairs solve_krylov(const NormalizedLaplacian& lap, int k,
                        const EigenSolverOptions& opt, std::uint64_t seed) {
  const int n = lap.size();
  const int block = k;
  // The basis grows in whole blocks; a truncated final block would drop part
  // of the residual that the restart relies on.
  int cap = opt.krylov_basis > 0 ? opt.krylov_basis : std::max(6 * k, 40);
  cap = std::max(cap / block, 3) * block;
  int keep = std::max(k + 1, cap / 2);
  keep = cap - ((cap - keep) / block) * block;
  if (keep >= cap) keep = cap - block;
  cap = std::min(cap, n);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;

  Eigen::MatrixXd basis(n, cap);
  Eigen::MatrixXd images(n, cap);  // M * basis
  int used = 0;
  int last_start = 0;
  int last_width = 0;

  Eigen::MatrixXd next(n, block);
  for (Eigen::Index i = 0; i < next.size(); ++i) next.data()[i] = gauss(rng);

  double worst = INFINITY;
  for (int restart = 0; restart <= opt.max_restarts; ++restart) {
    // Expand the basis with M applied to the newest block.
    while (used < cap) {
      const int width = std::min<int>(static_cast<int>(next.cols()), cap - used);
      Eigen::MatrixXd add = next.leftCols(width);
      const int got = orthonormalize_block(basis, used, add, rng);
      if (got == 0) break;
      basis.middleCols(used, got) = add.leftCols(got);
      images.middleCols(used, got) = lap.apply_similarity(add.leftCols(got));
      next = images.middleCols(used, got);
      last_start = used;
      last_width = got;
      used += got;
    }

    // Rayleigh-Ritz on the current basis.
    Eigen::MatrixXd projected =
        basis.leftCols(used).transpose() * images.leftCols(used);
    projected = 0.5 * (projected + projected.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(projected);
    // Descending order of theta.
    const Eigen::MatrixXd coeffs = small.eigenvectors().rowwise().reverse();
    const Eigen::VectorXd theta = small.eigenvalues().reverse();

    const int wanted = std::min(k, used);
    const Eigen::MatrixXd ritz = basis.leftCols(used) * coeffs.leftCols(wanted);
    const Eigen::MatrixXd ritz_images = images.leftCols(used) * coeffs.leftCols(wanted);
    worst = 0.0;
    for (int j = 0; j < wanted; ++j) {
      const Eigen::VectorXd r = ritz_images.col(j) - theta(j) * ritz.col(j);
      const double res = lap.to_random_walk(r).norm() /
                         lap.to_random_walk(ritz.col(j)).norm();
      worst = std::max(worst, res);
    }
    const bool exhausted = used == n || used < cap;
    if (wanted == k && (worst <= 0.5 * opt.tol || exhausted)) {
      EigenPairs out;
      out.symmetric_vectors = ritz;
      out.values = (1.0 - theta.head(k).array()).matrix();
      out.iterations = restart;
      return out;
    }
    if (exhausted) break;

    // Thick restart: keep the leading Ritz vectors plus the residual block
    // from the last expansion, which preserves the Krylov-Schur relation.
    // The residual must be taken against the full basis, before truncation.
    Eigen::MatrixXd residual = images.middleCols(last_start, last_width);
    for (int pass = 0; pass < 2; ++pass) {
      residual -= basis.leftCols(used) * (basis.leftCols(used).transpose() * residual);
    }
    const Eigen::MatrixXd kept = basis.leftCols(used) * coeffs.leftCols(keep);
    const Eigen::MatrixXd kept_images = images.leftCols(used) * coeffs.leftCols(keep);
    basis.leftCols(keep) = kept;
    images.leftCols(keep) = kept_images;
    used = keep;
    next = residual;
  }
  throw SolverError("Krylov eigensolver did not converge in " +
                        std::to_string(opt.max_restarts) + " restarts",
                    worst);
}

}  // namespace

SpectralEmbedding smallest_eigenvectors(const WeightedGraph& g, int k,
                                        const EigenSolverOptions& options,
                                        std::uint64_t seed) {
  const int n = g.num_vertices();
  if (k < 1 || k > n) {
    throw ContractViolation("k = " + std::to_string(k) + " outside [1, " +
                            std::to_string(n) + "]");
  }
  if (!(options.tol > 0.0)) throw ContractViolation("tol must be positive");

  const NormalizedLaplacian lap(g);
  EigenSolverKind kind = options.kind;
  if (kind == EigenSolverKind::kAuto) {
    kind = n <= options.dense_max_vertices ? EigenSolverKind::kDense
                                           : EigenSolverKind::kKrylov;
  }
  // A Krylov basis needs room beyond the wanted block.
  if (kind == EigenSolverKind::kKrylov && n < 3 * k) kind = EigenSolverKind::kDense;

  EigenPairs pairs = kind == EigenSolverKind::kDense ? solve_dense(lap, k)
                                                     : solve_krylov(lap, k, options, seed);

  // Sort ascending; the Krylov path already is, but keep both uniform.
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return pairs.values(a) < pairs.values(b); });

  SpectralEmbedding out;
  out.solver = to_string(kind);
  out.iterations = pairs.iterations;
  out.vectors.resize(k, n);
  out.eigenvalues.resize(k);
  for (int j = 0; j < k; ++j) {
    const int src = order[j];
    const double lambda = std::max(0.0, pairs.values(src));
    Eigen::VectorXd u = lap.to_random_walk(pairs.symmetric_vectors.col(src));
    u /= u.norm();
    out.eigenvalues(j) = lambda;
    out.vectors.row(j) = u.transpose();
    out.max_residual =
        std::max(out.max_residual, random_walk_residual(lap, u, pairs.values(src)));
  }
  if (!(out.max_residual <= options.tol)) {
    throw SolverError(out.solver + " eigensolver missed the residual tolerance",
                      out.max_residual);
  }
  return out;
}

}  // namespace modgraph
