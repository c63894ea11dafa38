#include "tdkps/embedding.hpp"

#include "tdkps/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

namespace tdkps {

void BlockDistanceMatrix::validate() const {
  if (values.rows() != values.cols()) throw ValidationError("block distance matrix is not square");
  if (values.rows() != n_agents * n_times) throw ValidationError("block distance matrix size mismatch");
  for (Index j = 0; j < values.cols(); ++j) {
    if (values(j, j) != 0.0) throw ValidationError("block distance matrix has a nonzero diagonal");
    for (Index i = 0; i < values.rows(); ++i) {
      const double v = values(i, j);
      if (!std::isfinite(v) || v < 0.0) throw ValidationError("block distance matrix has a negative or non-finite entry");
      if (std::abs(v - values(j, i)) > 1e-12) throw ValidationError("block distance matrix is not symmetric");
    }
  }
}

Eigen::MatrixXd EmbeddingBasis::projection() const {
  return basis_vectors * eigenvalues.cwiseSqrt().cwiseInverse().asDiagonal();
}

DimRequest parse_dim_request(const std::string& text) {
  if (text == "auto") return DimRequest::automatic();
  try {
    std::size_t used = 0;
    const long long d = std::stoll(text, &used);
    if (used == text.size() && d >= 1) return DimRequest::fixed(static_cast<Index>(d));
  } catch (const std::exception&) {
  }
  throw ArgumentError("dimension must be \"auto\" or a positive integer, got \"" + text + "\"");
}

namespace {

double frobenius_distance(const MeanResponseMatrix& a, const MeanResponseMatrix& b) {
  return (a - b).norm();
}

}  // namespace

BlockDistanceMatrix pairwise_block_distances(std::span<const MeanResponseMatrix> means, Index n_agents,
                                             Index n_times) {
  const Index n = n_agents * n_times;
  if (static_cast<Index>(means.size()) != n) throw DimensionError("pairwise_block_distances: mean count mismatch");
  BlockDistanceMatrix out{Eigen::MatrixXd::Zero(n, n), n_agents, n_times};
  for (Index j = 0; j < n; ++j) {
    for (Index i = j + 1; i < n; ++i) {
      out.values(i, j) = out.values(j, i) =
          frobenius_distance(means[static_cast<std::size_t>(i)], means[static_cast<std::size_t>(j)]);
    }
  }
  return out;
}

BlockDistanceMatrix pairwise_block_distances(const ResponseTensor& tensor) {
  const auto means = all_mean_responses(tensor);
  return pairwise_block_distances(means, tensor.n_agents(), tensor.n_times());
}

Index select_dimension(std::span<const double> eigenvalues) {
  const auto len = static_cast<Index>(eigenvalues.size());
  if (len < 2) return 1;
  constexpr double kVarianceFloor = 1e-12;
  constexpr double kLog2Pi = 1.8378770664093454836;

  auto sum_sq_dev = [&](Index begin, Index end) {
    double mean = 0.0;
    for (Index i = begin; i < end; ++i) mean += eigenvalues[static_cast<std::size_t>(i)];
    mean /= static_cast<double>(end - begin);
    double ss = 0.0;
    for (Index i = begin; i < end; ++i) {
      const double d = eigenvalues[static_cast<std::size_t>(i)] - mean;
      ss += d * d;
    }
    return ss;
  };

  // Two Gaussian groups with a shared variance; the variance uses the
  // pooled (len - 2) denominator and is floored for duplicate values.
  const double denom = len > 2 ? static_cast<double>(len - 2) : 1.0;
  Index best = 1;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (Index q = 1; q < len; ++q) {
    const double ss = sum_sq_dev(0, q) + sum_sq_dev(q, len);
    const double var = std::max(ss / denom, kVarianceFloor);
    const double ll = -0.5 * static_cast<double>(len) * (kLog2Pi + std::log(var)) - ss / (2.0 * var);
    if (ll > best_ll) {
      best_ll = ll;
      best = q;
    }
  }
  return best;
}

TdkpsEmbedding cmds(const BlockDistanceMatrix& dist, DimRequest request) {
  const Index n = dist.size();
  if (n < 1) throw DegenerateInputError("cmds: empty distance matrix");
  dist.validate();
  const Eigen::MatrixXd gram = double_center(dist.values);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success) throw DegenerateInputError("cmds: eigendecomposition failed");

  // Eigen returns ascending order.
  const Eigen::VectorXd values = solver.eigenvalues().reverse();
  const Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();

  const double scale = values.cwiseAbs().maxCoeff();
  const double tol = scale * static_cast<double>(n) * std::numeric_limits<double>::epsilon();
  Index positive = 0;
  while (positive < n && values(positive) > tol && values(positive) > 0.0) ++positive;
  if (positive == 0) throw DegenerateInputError("cmds: centered Gram matrix has no positive eigenvalues");

  TdkpsEmbedding out;
  out.n_agents = dist.n_agents;
  out.n_times = dist.n_times;
  Index d;
  if (request.is_auto()) {
    std::vector<double> pos(values.data(), values.data() + positive);
    d = select_dimension(pos);
  } else {
    d = *request.dim;
    if (d < 1) throw ArgumentError("cmds: requested dimension must be positive");
    if (d > positive) {
      d = positive;
      out.dim_clamped = true;
    }
  }

  const double neg = (values.array() < 0.0).select(values.array().abs(), 0.0).sum();
  const double total = values.cwiseAbs().sum();
  out.negative_mass_fraction = total > 0.0 ? neg / total : 0.0;

  EmbeddingBasis& basis = out.basis;
  basis.dim = d;
  basis.eigenvalues = values.head(d);
  basis.basis_vectors = vectors.leftCols(d);
  basis.all_eigenvalues = values;
  for (Index k = 0; k < d; ++k) {
    auto col = basis.basis_vectors.col(k);
    Index arg = 0;
    col.cwiseAbs().maxCoeff(&arg);
    if (col(arg) < 0.0) col = -col;
  }
  out.coords = basis.basis_vectors * basis.eigenvalues.cwiseSqrt().asDiagonal();
  return out;
}

Eigen::MatrixXd reembed_fixed_basis(const BlockDistanceMatrix& perturbed, const EmbeddingBasis& basis) {
  if (perturbed.size() != basis.basis_vectors.rows()) {
    throw DimensionError("reembed_fixed_basis: distance matrix has " + std::to_string(perturbed.size()) +
                         " slots, basis has " + std::to_string(basis.basis_vectors.rows()));
  }
  return double_center(perturbed.values) * basis.projection();
}

void update_agent_distances_inplace(BlockDistanceMatrix& dist, std::span<const MeanResponseMatrix> means,
                                    const MeanResponseMatrix& replacement_t,
                                    const MeanResponseMatrix& replacement_t2, Index agent, Index t,
                                    Index t2) {
  if (agent < 0 || agent >= dist.n_agents || t < 0 || t >= dist.n_times || t2 < 0 || t2 >= dist.n_times) {
    throw BoundsError("update_agent_distances: index out of range");
  }
  if (t == t2) throw ArgumentError("update_agent_distances: timepoints must differ");
  if (static_cast<Index>(means.size()) != dist.size()) throw DimensionError("update_agent_distances: mean count mismatch");
  const Index a = dist.index(t, agent);
  const Index b = dist.index(t2, agent);
  for (Index j = 0; j < dist.size(); ++j) {
    if (j == a || j == b) continue;
    const auto& other = means[static_cast<std::size_t>(j)];
    dist.values(a, j) = dist.values(j, a) = frobenius_distance(replacement_t, other);
    dist.values(b, j) = dist.values(j, b) = frobenius_distance(replacement_t2, other);
  }
  dist.values(a, b) = dist.values(b, a) = frobenius_distance(replacement_t, replacement_t2);
}

BlockDistanceMatrix update_agent_distances(const BlockDistanceMatrix& dist,
                                           std::span<const MeanResponseMatrix> means,
                                           const MeanResponseMatrix& replacement_t,
                                           const MeanResponseMatrix& replacement_t2, Index agent,
                                           Index t, Index t2) {
  BlockDistanceMatrix out = dist;
  update_agent_distances_inplace(out, means, replacement_t, replacement_t2, agent, t, t2);
  return out;
}

BlockDistanceMatrix update_agent_distances(const BlockDistanceMatrix& dist, const ResponseTensor& tensor,
                                           const MeanResponseMatrix& replacement_t,
                                           const MeanResponseMatrix& replacement_t2, Index agent,
                                           Index t, Index t2) {
  const auto means = all_mean_responses(tensor);
  return update_agent_distances(dist, means, replacement_t, replacement_t2, agent, t, t2);
}

void write_embedding_csv(const TdkpsEmbedding& embedding, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "time_index,agent_index";
  for (Index k = 0; k < embedding.dim(); ++k) out << ",c" << k;
  out << '\n';
  char buf[64];
  for (Index t = 0; t < embedding.n_times; ++t) {
    for (Index n = 0; n < embedding.n_agents; ++n) {
      out << t << ',' << n;
      for (Index k = 0; k < embedding.dim(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", embedding.coords(t * embedding.n_agents + n, k));
        out << ',' << buf;
      }
      out << '\n';
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace tdkps
