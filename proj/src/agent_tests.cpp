#include "tdkps/agent_tests.hpp"

#include "tdkps/error.hpp"
#include "tdkps/parallel.hpp"

#include <cmath>
#include <numeric>

namespace tdkps {

void AgentTestSpec::validate(const TensorShape& shape) const {
  if (agent < 0 || agent >= shape.n_agents) throw BoundsError("agent test: agent index out of range");
  if (time_a < 0 || time_a >= shape.n_times || time_b < 0 || time_b >= shape.n_times) {
    throw BoundsError("agent test: time index out of range");
  }
  if (time_a == time_b) throw ArgumentError("agent test: the two timepoints must differ");
  if (n_permutations < 1) throw ArgumentError("agent test: need at least one permutation");
}

TdkpsFit fit_tdkps(const ResponseTensor& tensor, DimRequest dim) {
  TdkpsFit fit;
  fit.means = all_mean_responses(tensor);
  fit.distances = pairwise_block_distances(fit.means, tensor.n_agents(), tensor.n_times());
  fit.embedding = cmds(fit.distances, dim);
  return fit;
}

AgentPermutation::AgentPermutation(const ResponseTensor& tensor, const TdkpsFit& fit, Index agent, Index time_a,
                                   Index time_b)
    : tensor_(tensor), fit_(fit), agent_(agent), time_a_(time_a), time_b_(time_b),
      projection_(fit.embedding.basis.projection()) {
  if (fit.distances.size() != tensor.shape().n_slots()) throw DimensionError("agent test: fit does not match tensor");
}

ReplicateAssignment AgentPermutation::identity() const {
  std::vector<Index> base(static_cast<std::size_t>(2 * tensor_.n_replicates()));
  std::iota(base.begin(), base.end(), Index{0});
  return ReplicateAssignment(static_cast<std::size_t>(tensor_.n_queries()), base);
}

ReplicateAssignment AgentPermutation::draw(Rng& rng) const {
  ReplicateAssignment a = identity();
  for (auto& perm : a) rng.shuffle(perm.begin(), perm.end());
  return a;
}

std::pair<MeanResponseMatrix, MeanResponseMatrix> AgentPermutation::permuted_means(
    const ReplicateAssignment& assignment) const {
  const Index R = tensor_.n_replicates();
  const Index M = tensor_.n_queries();
  if (static_cast<Index>(assignment.size()) != M) throw DimensionError("agent test: assignment has wrong query count");
  MeanResponseMatrix first = MeanResponseMatrix::Zero(M, tensor_.dim());
  MeanResponseMatrix second = MeanResponseMatrix::Zero(M, tensor_.dim());
  for (Index m = 0; m < M; ++m) {
    const auto& perm = assignment[static_cast<std::size_t>(m)];
    if (static_cast<Index>(perm.size()) != 2 * R) throw DimensionError("agent test: assignment has wrong replicate count");
    const auto rep_a = tensor_.replicates(time_a_, agent_, m);
    const auto rep_b = tensor_.replicates(time_b_, agent_, m);
    for (Index k = 0; k < 2 * R; ++k) {
      const Index src = perm[static_cast<std::size_t>(k)];
      auto row = src < R ? rep_a.row(src) : rep_b.row(src - R);
      if (k < R) {
        first.row(m) += row;
      } else {
        second.row(m) += row;
      }
    }
  }
  const double scale = 1.0 / static_cast<double>(R);
  first *= scale;
  second *= scale;
  return {std::move(first), std::move(second)};
}

double AgentPermutation::statistic(const ReplicateAssignment& assignment, BlockDistanceMatrix& scratch) const {
  const auto [first, second] = permuted_means(assignment);
  update_agent_distances_inplace(scratch, fit_.means, first, second, agent_, time_a_, time_b_);
  // Only the agent's two rows of double_center(scratch) * V * Sigma^(-1/2) are needed.
  const Index a = scratch.index(time_a_, agent_);
  const Index b = scratch.index(time_b_, agent_);
  const Eigen::ArrayXXd sq = scratch.values.array().square();
  const Eigen::RowVectorXd col_means = sq.colwise().mean().matrix();
  const double grand = col_means.mean();
  auto centered_row = [&](Index i) -> Eigen::RowVectorXd {
    // Symmetric matrix: the row mean of row i equals column mean i.
    return -0.5 * ((sq.row(i).matrix() - col_means).array() - col_means(i) + grand).matrix();
  };
  const Eigen::RowVectorXd pa = centered_row(a) * projection_;
  const Eigen::RowVectorXd pb = centered_row(b) * projection_;
  return (pa - pb).norm();
}

TestResult tdkps_agent_test(const ResponseTensor& tensor, const TdkpsFit& fit, const AgentTestSpec& spec) {
  spec.validate(tensor.shape());
  const auto& emb = fit.embedding;
  const double observed = (emb.point(spec.time_a, spec.agent) - emb.point(spec.time_b, spec.agent)).norm();

  const AgentPermutation perm(tensor, fit, spec.agent, spec.time_a, spec.time_b);
  const auto n_workers = static_cast<std::size_t>(std::max(1, spec.workers));
  std::vector<BlockDistanceMatrix> scratch(n_workers, fit.distances);
  std::vector<double> nulls(static_cast<std::size_t>(spec.n_permutations));
  parallel_for(nulls.size(), spec.workers, [&](std::size_t worker, std::size_t b) {
    Rng rng(spec.seed, {static_cast<std::uint64_t>(b)});
    nulls[b] = perm.statistic(perm.draw(rng), scratch[worker]);
  });

  TestResult out;
  out.statistic = observed;
  out.p_value = perm_pvalue(observed, nulls, Tail::one_sided);
  out.n_permutations = spec.n_permutations;
  out.method_name = "tdkps";
  if (spec.keep_null) out.null_sample = std::move(nulls);
  return out;
}

TestResult tdkps_agent_test(const ResponseTensor& tensor, const AgentTestSpec& spec) {
  spec.validate(tensor.shape());
  return tdkps_agent_test(tensor, fit_tdkps(tensor, spec.dim), spec);
}

namespace {

// (M*R) x p_s signal coordinates of agent n at time t: rows (O_m^T x)[0, p_s).
Eigen::MatrixXd unrotated_signal(const SimulatedDataset& data, Index t, Index n) {
  const auto& tensor = data.tensor;
  const Index ps = data.truth.config.signal_dims;
  const Index R = tensor.n_replicates();
  Eigen::MatrixXd z(tensor.n_queries() * R, ps);
  for (Index m = 0; m < tensor.n_queries(); ++m) {
    z.middleRows(m * R, R).noalias() =
        tensor.replicates(t, n, m) * data.truth.orthogonals[static_cast<std::size_t>(m)].leftCols(ps);
  }
  return z;
}

}  // namespace

TestResult oracle_agent_test(const SimulatedDataset& data, const AgentTestSpec& spec) {
  spec.validate(data.tensor.shape());
  if (static_cast<Index>(data.truth.orthogonals.size()) != data.tensor.n_queries()) {
    throw DimensionError("oracle agent test: ground truth does not match the tensor");
  }
  Eigen::MatrixXd first = unrotated_signal(data, spec.time_a, spec.agent);
  Eigen::MatrixXd second = unrotated_signal(data, spec.time_b, spec.agent);
  const Eigen::RowVectorXd agent_effect = 0.5 * (first.colwise().mean() + second.colwise().mean());
  first.rowwise() -= agent_effect;
  second.rowwise() -= agent_effect;
  TestResult out = hotelling_two_sample(first, second);
  out.method_name = "oracle";
  return out;
}

TestResult dcorr_agent_test(const ResponseTensor& tensor, const AgentTestSpec& spec) {
  spec.validate(tensor.shape());
  const Index R = tensor.n_replicates();
  if (R < 2) throw ArgumentError("dcorr agent test: need at least two replicates");
  Eigen::MatrixXd labels(2 * R, 1);
  labels.topRows(R).setZero();
  labels.bottomRows(R).setOnes();

  std::vector<double> pvals;
  Eigen::MatrixXd pooled(2 * R, tensor.dim());
  for (Index m = 0; m < tensor.n_queries(); ++m) {
    pooled.topRows(R) = tensor.replicates(spec.time_a, spec.agent, m);
    pooled.bottomRows(R) = tensor.replicates(spec.time_b, spec.agent, m);
    PermutationOptions opts = spec.permutation_options();
    opts.seed = derive_seed(spec.seed, {static_cast<std::uint64_t>(m)});
    opts.keep_null = false;
    try {
      pvals.push_back(dcorr_perm_test(pooled, labels, opts).p_value);
    } catch (const ZeroVarianceError&) {
      pvals.push_back(1.0);
    }
  }

  TestResult out;
  out.statistic = 0.0;
  for (double p : pvals) out.statistic -= 2.0 * std::log(p);
  out.p_value = fisher_combine(pvals);
  out.n_permutations = spec.n_permutations;
  out.method_name = "dcorr";
  return out;
}

}  // namespace tdkps
