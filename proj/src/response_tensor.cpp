#include "tdkps/response_tensor.hpp"

#include "tdkps/error.hpp"

#include <cmath>
#include <set>

namespace tdkps {

ResponseTensor::ResponseTensor(TensorShape shape, std::vector<double> values, Precision precision)
    : shape_(shape), values_(std::move(values)), precision_(precision) {
  if (shape_.n_agents < 1 || shape_.n_times < 1 || shape_.n_queries < 1 ||
      shape_.n_replicates < 1 || shape_.dim < 1) {
    throw ValidationError("response tensor: all extents must be at least 1");
  }
  if (static_cast<Index>(values_.size()) != shape_.size()) {
    throw LengthError("response tensor: expected " + std::to_string(shape_.size()) +
                      " values, got " + std::to_string(values_.size()));
  }
  if (precision_ == Precision::float32) {
    for (auto& v : values_) v = static_cast<double>(static_cast<float>(v));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw ValidationError("response tensor: non-finite value at flat index " + std::to_string(i));
    }
  }
}

std::size_t ResponseTensor::offset(Index t, Index n, Index m) const {
  if (t < 0 || t >= shape_.n_times || n < 0 || n >= shape_.n_agents || m < 0 ||
      m >= shape_.n_queries) {
    throw BoundsError("response tensor: index out of range");
  }
  const Index block = shape_.n_replicates * shape_.dim;
  return static_cast<std::size_t>(((t * shape_.n_agents + n) * shape_.n_queries + m) * block);
}

Eigen::Map<const RowMatrixXd> ResponseTensor::replicates(Index t, Index n, Index m) const {
  return {values_.data() + offset(t, n, m), shape_.n_replicates, shape_.dim};
}

Eigen::Map<const RowMatrixXd> ResponseTensor::responses(Index t, Index n) const {
  return {values_.data() + offset(t, n, 0), shape_.n_queries * shape_.n_replicates, shape_.dim};
}

void TensorManifest::validate(const TensorShape& shape) const {
  if (static_cast<Index>(agent_ids.size()) != shape.n_agents) {
    throw ValidationError("manifest: agent_ids has " + std::to_string(agent_ids.size()) +
                          " entries, tensor has " + std::to_string(shape.n_agents) + " agents");
  }
  if (static_cast<Index>(time_labels.size()) != shape.n_times) {
    throw ValidationError("manifest: time_labels has " + std::to_string(time_labels.size()) +
                          " entries, tensor has " + std::to_string(shape.n_times) + " times");
  }
  if (group_labels) {
    if (static_cast<Index>(group_labels->size()) != shape.n_agents) {
      throw ValidationError("manifest: group_labels length does not match agent count");
    }
    std::set<int> distinct(group_labels->begin(), group_labels->end());
    for (int g : distinct) {
      if (g < 0 || g >= static_cast<int>(shape.n_agents)) {
        throw ValidationError("manifest: group label " + std::to_string(g) + " out of range");
      }
    }
  }
}

std::vector<Index> TensorManifest::group_members(int group) const {
  if (!group_labels) throw ArgumentError("manifest has no group_labels");
  std::vector<Index> members;
  for (std::size_t n = 0; n < group_labels->size(); ++n) {
    if ((*group_labels)[n] == group) members.push_back(static_cast<Index>(n));
  }
  return members;
}

TensorManifest default_manifest(const TensorShape& shape) {
  TensorManifest m;
  for (Index n = 0; n < shape.n_agents; ++n) m.agent_ids.push_back("agent_" + std::to_string(n));
  for (Index t = 0; t < shape.n_times; ++t) m.time_labels.push_back("t" + std::to_string(t));
  return m;
}

MeanResponseMatrix mean_responses(const ResponseTensor& tensor, Index agent, Index time) {
  if (agent < 0 || agent >= tensor.n_agents() || time < 0 || time >= tensor.n_times()) {
    throw BoundsError("mean_responses: agent " + std::to_string(agent) + " / time " +
                      std::to_string(time) + " out of range");
  }
  MeanResponseMatrix out(tensor.n_queries(), tensor.dim());
  const double scale = 1.0 / static_cast<double>(tensor.n_replicates());
  for (Index m = 0; m < tensor.n_queries(); ++m) {
    out.row(m) = tensor.replicates(time, agent, m).colwise().sum() * scale;
  }
  return out;
}

std::vector<MeanResponseMatrix> all_mean_responses(const ResponseTensor& tensor) {
  const auto& s = tensor.shape();
  std::vector<MeanResponseMatrix> means(static_cast<std::size_t>(s.n_slots()));
  for (Index t = 0; t < s.n_times; ++t) {
    for (Index n = 0; n < s.n_agents; ++n) {
      means[static_cast<std::size_t>(s.slot(t, n))] = mean_responses(tensor, n, t);
    }
  }
  return means;
}

}  // namespace tdkps
