#pragma once

#include "tdkps/response_tensor.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace tdkps {

/// TN x TN matrix of Frobenius distances between mean-response matrices.
/// Row/column t * N + n belongs to agent n at time t.
struct BlockDistanceMatrix {
  Eigen::MatrixXd values;
  Index n_agents = 0;
  Index n_times = 0;

  Index size() const { return values.rows(); }
  Index index(Index t, Index n) const { return t * n_agents + n; }

  /// Throws ValidationError unless symmetric (1e-12), zero-diagonal, nonnegative.
  void validate() const;
};

/// Frozen spectral basis of a classical-MDS fit.
struct EmbeddingBasis {
  Index dim = 0;
  Eigen::VectorXd eigenvalues;      ///< retained, nonincreasing, strictly positive
  Eigen::MatrixXd basis_vectors;    ///< TN x dim, orthonormal columns
  Eigen::VectorXd all_eigenvalues;  ///< full nonincreasing spectrum of the centered Gram matrix

  /// V * diag(eigenvalues)^(-1/2), the fixed-basis projection.
  Eigen::MatrixXd projection() const;
};

struct TdkpsEmbedding {
  Eigen::MatrixXd coords;  ///< TN x dim, row t * N + n
  EmbeddingBasis basis;
  Index n_agents = 0;
  Index n_times = 0;
  bool dim_clamped = false;            ///< explicit request exceeded the positive spectrum
  double negative_mass_fraction = 0.0; ///< sum|negative eigenvalues| / sum|eigenvalues|

  Index dim() const { return coords.cols(); }
  auto point(Index t, Index n) const { return coords.row(t * n_agents + n); }
};

/// Either an explicit embedding dimension or profile-likelihood selection.
struct DimRequest {
  std::optional<Index> dim;  ///< empty means "auto"

  static DimRequest automatic() { return {}; }
  static DimRequest fixed(Index d) { return {d}; }
  bool is_auto() const { return !dim.has_value(); }
};

/// Parses "auto" or a positive integer.
DimRequest parse_dim_request(const std::string& text);

/// B = -1/2 J (D o D) J with J = I - 11^T / n.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
double_center(const Eigen::MatrixBase<Derived>& dist) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Matrix sq = dist.array().square().matrix();
  const auto row_means = sq.rowwise().mean().eval();
  const auto col_means = sq.colwise().mean().eval();
  const Scalar grand = sq.mean();
  sq.colwise() -= row_means;
  sq.rowwise() -= col_means;
  sq.array() += grand;
  return Scalar(-0.5) * sq;
}

/// Euclidean distances between the rows of `points`.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
row_distances(const Eigen::MatrixBase<Derived>& points) {
  using Matrix = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Index n = points.rows();
  Matrix out = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = j + 1; i < n; ++i) {
      out(i, j) = out(j, i) = (points.row(i) - points.row(j)).norm();
    }
  }
  return out;
}

BlockDistanceMatrix pairwise_block_distances(const ResponseTensor& tensor);

/// Same as above from precomputed per-slot means (see all_mean_responses).
BlockDistanceMatrix pairwise_block_distances(std::span<const MeanResponseMatrix> means,
                                             Index n_agents, Index n_times);

/// Zhu-Ghodsi profile-likelihood elbow of a nonincreasing sequence.
/// Returns the split q in [1, len - 1]; 1 when fewer than two values.
Index select_dimension(std::span<const double> eigenvalues);

/// Classical MDS of the block distance matrix.
TdkpsEmbedding cmds(const BlockDistanceMatrix& dist, DimRequest request = DimRequest::automatic());

/// Re-embeds a perturbed distance matrix through the frozen basis:
/// double_center(perturbed) * V * Sigma^(-1/2). Centering uses the perturbed
/// matrix's own means.
Eigen::MatrixXd reembed_fixed_basis(const BlockDistanceMatrix& perturbed, const EmbeddingBasis& basis);

/// Copy of `dist` with the rows and columns of slots (t, agent) and (t2, agent)
/// recomputed from the replacement means against every other slot's mean.
BlockDistanceMatrix update_agent_distances(const BlockDistanceMatrix& dist,
                                           std::span<const MeanResponseMatrix> means,
                                           const MeanResponseMatrix& replacement_t,
                                           const MeanResponseMatrix& replacement_t2, Index agent,
                                           Index t, Index t2);

BlockDistanceMatrix update_agent_distances(const BlockDistanceMatrix& dist, const ResponseTensor& tensor,
                                           const MeanResponseMatrix& replacement_t,
                                           const MeanResponseMatrix& replacement_t2, Index agent,
                                           Index t, Index t2);

/// In-place variant for permutation loops; `dist` must start as a copy of the original.
void update_agent_distances_inplace(BlockDistanceMatrix& dist, std::span<const MeanResponseMatrix> means,
                                    const MeanResponseMatrix& replacement_t,
                                    const MeanResponseMatrix& replacement_t2, Index agent, Index t,
                                    Index t2);

/// CSV with columns time_index,agent_index,c0..c{d-1}; 17 significant digits.
void write_embedding_csv(const TdkpsEmbedding& embedding, const std::filesystem::path& path);

}  // namespace tdkps
