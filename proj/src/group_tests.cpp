#include "tdkps/group_tests.hpp"

#include "tdkps/error.hpp"
#include "tdkps/parallel.hpp"

#include <atomic>
#include <set>

namespace tdkps {

void GroupTestSpec::validate(Index n_agents, Index n_times) const {
  if (group.size() < 2) throw DegenerateInputError("group test: groups need at least two agents");
  std::set<Index> seen;
  for (Index n : group) {
    if (n < 0 || n >= n_agents) throw BoundsError("group test: agent index out of range");
    if (!seen.insert(n).second) throw ArgumentError("group test: duplicate agent index");
  }
  if (time_a < 0 || time_a >= n_times || time_b < 0 || time_b >= n_times) {
    throw BoundsError("group test: time index out of range");
  }
  if (time_a == time_b) throw ArgumentError("group test: the two timepoints must differ");
  if (n_permutations < 1) throw ArgumentError("group test: need at least one permutation");
}

namespace {

// Group coordinates at time_a (rows [0, n)) then time_b (rows [n, 2n)).
Eigen::MatrixXd stacked_points(const TdkpsEmbedding& embedding, const GroupTestSpec& spec) {
  const auto n = static_cast<Index>(spec.group.size());
  Eigen::MatrixXd pts(2 * n, embedding.dim());
  for (Index i = 0; i < n; ++i) {
    pts.row(i) = embedding.point(spec.time_a, spec.group[static_cast<std::size_t>(i)]);
    pts.row(n + i) = embedding.point(spec.time_b, spec.group[static_cast<std::size_t>(i)]);
  }
  return pts;
}

Eigen::MatrixXd time_labels(Index n) {
  Eigen::MatrixXd y(2 * n, 1);
  y.topRows(n).setZero();
  y.bottomRows(n).setOnes();
  return y;
}

// Read-through view of the cached distances that counts lookups.
struct CountingView {
  const Eigen::MatrixXd& values;
  std::size_t* lookups;
  Index rows() const { return values.rows(); }
  double operator()(Index i, Index j) const {
    ++*lookups;
    return values(i, j);
  }
};

}  // namespace

TestResult pe_tdkps_group_test(const TdkpsEmbedding& embedding, const GroupTestSpec& spec, EnergyVariant variant,
                               EnergyCounters* counters) {
  spec.validate(embedding.n_agents, embedding.n_times);
  const auto n = static_cast<Index>(spec.group.size());
  const Eigen::MatrixXd dist = row_distances(stacked_points(embedding, spec));
  if (counters) ++counters->distance_matrix_builds;

  std::vector<Index> first(static_cast<std::size_t>(n)), second(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    first[static_cast<std::size_t>(i)] = i;
    second[static_cast<std::size_t>(i)] = n + i;
  }
  const double observed = energy_distance(dist, first, second, variant);

  std::vector<double> nulls(static_cast<std::size_t>(spec.n_permutations));
  std::atomic<std::size_t> lookups{0};
  parallel_for(nulls.size(), spec.workers, [&](std::size_t, std::size_t b) {
    Rng rng(spec.seed, {static_cast<std::uint64_t>(b)});
    std::vector<Index> a(static_cast<std::size_t>(n)), c(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      const bool swap = rng.bernoulli(0.5);
      a[static_cast<std::size_t>(i)] = swap ? n + i : i;
      c[static_cast<std::size_t>(i)] = swap ? i : n + i;
    }
    std::size_t local = 0;
    nulls[b] = energy_distance(CountingView{dist, &local}, a, c, variant);
    lookups += local;
  });
  if (counters) counters->loop_lookups += lookups.load();

  TestResult out;
  out.statistic = observed;
  out.p_value = perm_pvalue(observed, nulls, Tail::two_sided);
  out.n_permutations = spec.n_permutations;
  out.method_name = "pe_tdkps";
  if (spec.keep_null) out.null_sample = std::move(nulls);
  return out;
}

TestResult oracle_group_test(const SimulatedDataset& data, const GroupTestSpec& spec) {
  const auto& tensor = data.tensor;
  spec.validate(tensor.n_agents(), tensor.n_times());
  const Index ps = data.truth.config.signal_dims;
  const auto n = static_cast<Index>(spec.group.size());
  if (n <= ps) throw ArgumentError("oracle group test: need more agents than signal dimensions");
  if (static_cast<Index>(data.truth.orthogonals.size()) != tensor.n_queries()) {
    throw DimensionError("oracle group test: ground truth does not match the tensor");
  }

  auto averaged_signal = [&](Index t, Index agent) {
    Eigen::RowVectorXd z = Eigen::RowVectorXd::Zero(ps);
    for (Index m = 0; m < tensor.n_queries(); ++m) {
      z += tensor.replicates(t, agent, m).colwise().mean() *
           data.truth.orthogonals[static_cast<std::size_t>(m)].leftCols(ps);
    }
    return Eigen::RowVectorXd(z / static_cast<double>(tensor.n_queries()));
  };

  Eigen::MatrixXd diffs(n, ps);
  for (Index i = 0; i < n; ++i) {
    const Index agent = spec.group[static_cast<std::size_t>(i)];
    diffs.row(i) = averaged_signal(spec.time_b, agent) - averaged_signal(spec.time_a, agent);
  }
  TestResult out = hotelling_paired(diffs);
  out.method_name = "oracle_group";
  return out;
}

TestResult dcorr_group_test(std::span<const MeanResponseMatrix> means, Index n_agents, const GroupTestSpec& spec) {
  if (means.empty() || static_cast<Index>(means.size()) % n_agents != 0) {
    throw DimensionError("dcorr group test: mean count does not match agent count");
  }
  spec.validate(n_agents, static_cast<Index>(means.size()) / n_agents);
  const auto n = static_cast<Index>(spec.group.size());
  const Index width = means.front().size();
  Eigen::MatrixXd x(2 * n, width);
  for (Index i = 0; i < n; ++i) {
    const Index agent = spec.group[static_cast<std::size_t>(i)];
    const auto& ma = means[static_cast<std::size_t>(spec.time_a * n_agents + agent)];
    const auto& mb = means[static_cast<std::size_t>(spec.time_b * n_agents + agent)];
    x.row(i) = Eigen::Map<const Eigen::RowVectorXd>(ma.data(), width);
    x.row(n + i) = Eigen::Map<const Eigen::RowVectorXd>(mb.data(), width);
  }
  TestResult out = dcorr_perm_test(x, time_labels(n), spec.permutation_options());
  out.method_name = "dcorr_group";
  return out;
}

TestResult dcorr_group_test(const ResponseTensor& tensor, const GroupTestSpec& spec) {
  spec.validate(tensor.n_agents(), tensor.n_times());
  const auto means = all_mean_responses(tensor);
  return dcorr_group_test(means, tensor.n_agents(), spec);
}

TestResult dcorr_tdkps_group_test(const TdkpsEmbedding& embedding, const GroupTestSpec& spec) {
  spec.validate(embedding.n_agents, embedding.n_times);
  const auto n = static_cast<Index>(spec.group.size());
  TestResult out = dcorr_perm_test(stacked_points(embedding, spec), time_labels(n), spec.permutation_options());
  out.method_name = "dcorr_tdkps";
  return out;
}

}  // namespace tdkps
