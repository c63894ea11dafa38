#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tdkps {

using Index = Eigen::Index;
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-query mean responses of one agent at one time: an M x p matrix.
using MeanResponseMatrix = Eigen::MatrixXd;

enum class Precision : std::uint8_t { float32 = 0, float64 = 1 };

/// Extents of an N x T x M x R x p response tensor.
struct TensorShape {
  Index n_agents = 0;
  Index n_times = 0;
  Index n_queries = 0;
  Index n_replicates = 0;
  Index dim = 0;

  Index size() const { return n_agents * n_times * n_queries * n_replicates * dim; }
  /// Row of (t, n) in the block distance matrix and the embedding.
  Index slot(Index t, Index n) const { return t * n_agents + n; }
  Index n_slots() const { return n_agents * n_times; }

  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

/// Embedded query responses stored time-major: [t][n][m][r][p].
///
/// Immutable once constructed. Values are held as doubles regardless of the
/// on-disk precision; a float32 tensor has its values rounded to float on
/// construction so that saving and reloading is exact.
class ResponseTensor {
public:
  ResponseTensor(TensorShape shape, std::vector<double> values,
                 Precision precision = Precision::float64);

  const TensorShape& shape() const { return shape_; }
  Precision precision() const { return precision_; }
  const std::vector<double>& values() const { return values_; }

  Index n_agents() const { return shape_.n_agents; }
  Index n_times() const { return shape_.n_times; }
  Index n_queries() const { return shape_.n_queries; }
  Index n_replicates() const { return shape_.n_replicates; }
  Index dim() const { return shape_.dim; }

  /// R x p view of the replicates of query m for agent n at time t.
  Eigen::Map<const RowMatrixXd> replicates(Index t, Index n, Index m) const;

  /// (M*R) x p view of all responses of agent n at time t, query-major.
  Eigen::Map<const RowMatrixXd> responses(Index t, Index n) const;

  friend bool operator==(const ResponseTensor&, const ResponseTensor&) = default;

private:
  std::size_t offset(Index t, Index n, Index m) const;

  TensorShape shape_;
  std::vector<double> values_;
  Precision precision_;
};

struct TensorManifest {
  std::vector<std::string> agent_ids;
  std::vector<std::string> time_labels;
  std::optional<std::vector<int>> group_labels;
  std::optional<std::int64_t> seed;

  /// Throws ValidationError when the lists disagree with the tensor extents.
  void validate(const TensorShape& shape) const;
  /// Agents whose group label equals `group`, in index order.
  std::vector<Index> group_members(int group) const;

  friend bool operator==(const TensorManifest&, const TensorManifest&) = default;
};

/// Manifest with generated ids ("agent_0", ..., "t0", ...).
TensorManifest default_manifest(const TensorShape& shape);

/// Row m is the mean of the R replicate vectors of query m.
MeanResponseMatrix mean_responses(const ResponseTensor& tensor, Index agent, Index time);

/// Mean matrices for every slot, indexed by TensorShape::slot(t, n).
std::vector<MeanResponseMatrix> all_mean_responses(const ResponseTensor& tensor);

// Binary file format (little-endian):
//   "TDKP" | u16 version = 1 | u8 dtype (0 = f32, 1 = f64) | u64 N,T,M,R,p | values
// The manifest goes to a JSON sidecar at <path>.manifest.json.
inline constexpr std::size_t kTensorHeaderBytes = 4 + 2 + 1 + 5 * 8;
inline constexpr std::uint16_t kTensorFormatVersion = 1;

std::filesystem::path manifest_path(const std::filesystem::path& tensor_path);

void save_tensor(const ResponseTensor& tensor, const TensorManifest& manifest,
                 const std::filesystem::path& path);

/// Loads a tensor and its manifest. A missing sidecar yields default_manifest.
std::pair<ResponseTensor, TensorManifest> load_tensor(const std::filesystem::path& path);

}  // namespace tdkps
