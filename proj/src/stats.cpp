#include "tdkps/stats.hpp"

#include "tdkps/distributions.hpp"
#include "tdkps/parallel.hpp"
#include "tdkps/random.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace tdkps {

double perm_pvalue(double observed, std::span<const double> nulls, Tail tail) {
  if (nulls.empty()) throw ArgumentError("perm_pvalue: no null statistics");
  if (!std::isfinite(observed)) throw ArgumentError("perm_pvalue: observed statistic is not finite");
  const double obs = tail == Tail::two_sided ? std::abs(observed) : observed;
  std::size_t exceed = 0;
  for (double v : nulls) {
    if (!std::isfinite(v)) throw ArgumentError("perm_pvalue: null statistic is not finite");
    if ((tail == Tail::two_sided ? std::abs(v) : v) >= obs) ++exceed;
  }
  return static_cast<double>(1 + exceed) / static_cast<double>(1 + nulls.size());
}

namespace {

// sum_ij A_ij B_{perm_i perm_j}
double permuted_cross(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, std::span<const Index> perm) {
  const Index n = a.rows();
  double s = 0.0;
  for (Index j = 0; j < n; ++j) {
    const Index pj = perm[static_cast<std::size_t>(j)];
    for (Index i = 0; i < n; ++i) s += a(i, j) * b(perm[static_cast<std::size_t>(i)], pj);
  }
  return s;
}

}  // namespace

TestResult dcorr_perm_test(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const PermutationOptions& options) {
  if (x.rows() != y.rows()) throw ArgumentError("dcorr_perm_test: row counts differ");
  if (x.rows() < 2) throw ArgumentError("dcorr_perm_test: need at least two rows");
  if (options.n_permutations < 1) throw ArgumentError("dcorr_perm_test: need at least one permutation");

  const Eigen::MatrixXd a = centered_distances(x);
  const Eigen::MatrixXd b = centered_distances(y);
  const double var_x = a.squaredNorm();
  const double var_y = b.squaredNorm();
  if (!(var_x > 0.0) || !(var_y > 0.0)) throw ZeroVarianceError("dcorr_perm_test: zero distance variance");
  const double norm = std::sqrt(var_x * var_y);
  auto to_dcor = [norm](double cross) { return std::sqrt(std::max(cross, 0.0) / norm); };

  const Index n = x.rows();
  std::vector<Index> identity(static_cast<std::size_t>(n));
  std::iota(identity.begin(), identity.end(), Index{0});
  const double observed = to_dcor(permuted_cross(a, b, identity));

  std::vector<double> nulls(static_cast<std::size_t>(options.n_permutations));
  parallel_for(nulls.size(), options.workers, [&](std::size_t, std::size_t i) {
    Rng rng(options.seed, {static_cast<std::uint64_t>(i)});
    std::vector<Index> perm = identity;
    rng.shuffle(perm.begin(), perm.end());
    nulls[i] = to_dcor(permuted_cross(a, b, perm));
  });

  TestResult out;
  out.statistic = observed;
  out.p_value = perm_pvalue(observed, nulls, Tail::one_sided);
  out.n_permutations = options.n_permutations;
  out.method_name = "dcorr";
  if (options.keep_null) out.null_sample = std::move(nulls);
  return out;
}

namespace {

// A mean difference this small relative to the data is an exact null; the
// covariance is then typically singular too, and T^2 = 0 is the answer.
bool negligible_difference(const Eigen::VectorXd& diff, double data_scale) {
  return diff.cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, data_scale);
}

double quadratic_form_inverse(const Eigen::MatrixXd& cov, const Eigen::VectorXd& v) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const auto& ev = es.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  if (!(top > 0.0) || ev.minCoeff() <= 1e-12 * top) {
    throw SingularityError("Hotelling T^2: covariance matrix is singular");
  }
  const Eigen::VectorXd w = es.eigenvectors().transpose() * v;
  return (w.array().square() / ev.array()).sum();
}

}  // namespace

TestResult hotelling_two_sample(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Index n1 = a.rows(), n2 = b.rows(), k = a.cols();
  if (b.cols() != k) throw ArgumentError("hotelling_two_sample: samples differ in dimension");
  if (k < 1 || n1 < 1 || n2 < 1) throw ArgumentError("hotelling_two_sample: empty sample");
  if (n1 + n2 - 2 <= k) throw ArgumentError("hotelling_two_sample: need n1 + n2 - 2 > k");

  const Eigen::RowVectorXd mean_a = a.colwise().mean();
  const Eigen::RowVectorXd mean_b = b.colwise().mean();
  const Eigen::VectorXd diff = (mean_a - mean_b).transpose();

  TestResult out;
  out.method_name = "hotelling_two_sample";
  const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
  if (negligible_difference(diff, scale)) {
    out.statistic = 0.0;
    out.p_value = 1.0;
    return out;
  }
  const Eigen::MatrixXd ca = a.rowwise() - mean_a;
  const Eigen::MatrixXd cb = b.rowwise() - mean_b;
  const Eigen::MatrixXd pooled = (ca.transpose() * ca + cb.transpose() * cb) / static_cast<double>(n1 + n2 - 2);
  const double nn = static_cast<double>(n1) * static_cast<double>(n2) / static_cast<double>(n1 + n2);
  const double t2 = nn * quadratic_form_inverse(pooled, diff);
  const double df2 = static_cast<double>(n1 + n2 - k - 1);
  const double f = df2 / (static_cast<double>(n1 + n2 - 2) * static_cast<double>(k)) * t2;
  out.statistic = t2;
  out.p_value = fisher_f_sf(f, static_cast<double>(k), df2);
  return out;
}

TestResult hotelling_paired(const Eigen::MatrixXd& diffs) {
  const Index n = diffs.rows(), k = diffs.cols();
  if (k < 1) throw ArgumentError("hotelling_paired: empty difference vectors");
  if (n <= k) throw ArgumentError("hotelling_paired: need more pairs than dimensions");

  const Eigen::RowVectorXd mean = diffs.colwise().mean();
  TestResult out;
  out.method_name = "hotelling_paired";
  if (negligible_difference(mean.transpose(), diffs.cwiseAbs().maxCoeff())) {
    out.statistic = 0.0;
    out.p_value = 1.0;
    return out;
  }
  const Eigen::MatrixXd centered = diffs.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  const double t2 = static_cast<double>(n) * quadratic_form_inverse(cov, mean.transpose());
  const double f = static_cast<double>(n - k) / (static_cast<double>(n - 1) * static_cast<double>(k)) * t2;
  out.statistic = t2;
  out.p_value = fisher_f_sf(f, static_cast<double>(k), static_cast<double>(n - k));
  return out;
}

double fisher_combine(std::span<const double> pvals) {
  if (pvals.empty()) throw ArgumentError("fisher_combine: no p-values");
  double stat = 0.0;
  for (double p : pvals) {
    if (!(p > 0.0) || p > 1.0) throw ArgumentError("fisher_combine: p-values must lie in (0, 1]");
    stat -= 2.0 * std::log(p);
  }
  return chi2_even_sf(stat, static_cast<int>(pvals.size()));
}

KendallResult kendall_tau(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ArgumentError("kendall_tau: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw ArgumentError("kendall_tau: need at least two observations");

  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      const double prod = dx * dy;
      if (prod > 0) s += 1.0;
      else if (prod < 0) s -= 1.0;
    }
  }

  auto tie_sums = [](std::span<const double> v) {
    std::map<double, double> counts;
    for (double e : v) counts[e] += 1.0;
    struct { double pairs = 0, v2 = 0, v3 = 0, v5 = 0; } t;
    for (const auto& [value, c] : counts) {
      t.pairs += c * (c - 1) / 2;
      t.v2 += c * (c - 1);
      t.v3 += c * (c - 1) * (c - 2);
      t.v5 += c * (c - 1) * (2 * c + 5);
    }
    return t;
  };
  const auto tx = tie_sums(x);
  const auto ty = tie_sums(y);
  const double nd = static_cast<double>(n);
  const double n0 = nd * (nd - 1) / 2;
  if (n0 - tx.pairs <= 0 || n0 - ty.pairs <= 0) throw ZeroVarianceError("kendall_tau: all values tied");

  KendallResult out;
  out.tau = s / std::sqrt((n0 - tx.pairs) * (n0 - ty.pairs));

  double var = (nd * (nd - 1) * (2 * nd + 5) - tx.v5 - ty.v5) / 18.0 + tx.v2 * ty.v2 / (2 * nd * (nd - 1));
  if (n > 2) var += tx.v3 * ty.v3 / (9 * nd * (nd - 1) * (nd - 2));
  const double z = std::max(std::abs(s) - 1.0, 0.0) / std::sqrt(var);
  out.p_value = std::min(1.0, 2.0 * normal_sf(z));
  return out;
}

}  // namespace tdkps
