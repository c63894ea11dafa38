#pragma once

#include "tdkps/embedding.hpp"
#include "tdkps/error.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tdkps {

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  Index n_permutations = 0;  ///< 0 for analytic tests
  std::optional<std::vector<double>> null_sample;
  std::string method_name;
};

/// Shared knobs of every permutation loop. Permutation b draws from the
/// substream derive_seed(seed, {b}), so results do not depend on `workers`.
struct PermutationOptions {
  Index n_permutations = 1000;
  std::uint64_t seed = 0;
  bool keep_null = false;
  int workers = 1;
};

enum class Tail { one_sided, two_sided };

/// (1 + #{null >= observed}) / (1 + B); the two-sided form compares absolute values.
double perm_pvalue(double observed, std::span<const double> nulls, Tail tail = Tail::one_sided);

enum class EnergyVariant {
  exclude_same_agent,  ///< all three averages over n != n', denominator n(n-1)
  standard,            ///< cross term over all n, n' pairs, denominator n^2
};

/// Energy statistic 2*D_tt' - D_t - D_t' between the slot sets idx_t and
/// idx_t2 of a precomputed distance matrix. idx_t[i] and idx_t2[i] are the
/// same agent at the two timepoints. `Dist` is any matrix-like type with
/// rows() and operator()(i, j).
template <typename Dist>
double energy_distance(const Dist& dist, std::span<const Index> idx_t,
                       std::span<const Index> idx_t2,
                       EnergyVariant variant = EnergyVariant::exclude_same_agent) {
  const auto n = static_cast<Index>(idx_t.size());
  if (n < 2) throw DegenerateInputError("energy_distance: groups need at least two agents");
  if (static_cast<Index>(idx_t2.size()) != n) throw ArgumentError("energy_distance: index sets differ in size");
  for (std::size_t i = 0; i < idx_t.size(); ++i) {
    if (idx_t[i] < 0 || idx_t[i] >= dist.rows() || idx_t2[i] < 0 || idx_t2[i] >= dist.rows()) {
      throw BoundsError("energy_distance: slot index out of range");
    }
  }
  double cross = 0.0, within_t = 0.0, within_t2 = 0.0;
  for (Index i = 0; i < n; ++i) {
    const Index a = idx_t[static_cast<std::size_t>(i)];
    const Index a2 = idx_t2[static_cast<std::size_t>(i)];
    for (Index j = 0; j < n; ++j) {
      const Index b = idx_t[static_cast<std::size_t>(j)];
      const Index b2 = idx_t2[static_cast<std::size_t>(j)];
      if (i != j) {
        cross += dist(a, b2);
        within_t += dist(a, b);
        within_t2 += dist(a2, b2);
      } else if (variant == EnergyVariant::standard) {
        cross += dist(a, b2);
      }
    }
  }
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1);
  const double cross_pairs = variant == EnergyVariant::standard ? static_cast<double>(n * n) : pairs;
  return 2.0 * cross / cross_pairs - within_t / pairs - within_t2 / pairs;
}

/// Doubly centered Euclidean distance matrix of the rows of `x`.
template <typename Derived>
Eigen::MatrixXd centered_distances(const Eigen::MatrixBase<Derived>& x) {
  Eigen::MatrixXd a = row_distances(x.template cast<double>());
  const Eigen::VectorXd row_means = a.rowwise().mean();
  const Eigen::RowVectorXd col_means = a.colwise().mean();
  const double grand = a.mean();
  a.colwise() -= row_means;
  a.rowwise() -= col_means;
  a.array() += grand;
  return a;
}

/// Sample distance correlation (V-statistic), in [0, 1].
template <typename DerivedX, typename DerivedY>
double distance_correlation(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y) {
  if (x.rows() != y.rows()) throw ArgumentError("distance_correlation: row counts differ");
  if (x.rows() < 2) throw ArgumentError("distance_correlation: need at least two rows");
  const Eigen::MatrixXd a = centered_distances(x);
  const Eigen::MatrixXd b = centered_distances(y);
  const double var_x = a.squaredNorm();
  const double var_y = b.squaredNorm();
  if (!(var_x > 0.0) || !(var_y > 0.0)) throw ZeroVarianceError("distance_correlation: zero distance variance");
  const double cov = a.cwiseProduct(b).sum();
  return std::sqrt(std::max(cov, 0.0) / std::sqrt(var_x * var_y));
}

/// Distance-correlation independence test; the null permutes the rows of y.
TestResult dcorr_perm_test(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const PermutationOptions& options);

/// Two-sample Hotelling T^2 with pooled covariance; F(k, n1 + n2 - k - 1) p-value.
TestResult hotelling_two_sample(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Paired Hotelling T^2 on the rows of `diffs`; F(k, n - k) p-value.
TestResult hotelling_paired(const Eigen::MatrixXd& diffs);

/// Fisher's method: upper tail of chi-squared(2M) at -2 sum log p.
double fisher_combine(std::span<const double> pvals);

struct KendallResult {
  double tau = 0.0;
  double p_value = 1.0;
};

/// Kendall tau-b with a two-sided normal-approximation p-value (continuity corrected).
KendallResult kendall_tau(std::span<const double> x, std::span<const double> y);

}  // namespace tdkps
