#pragma once

#include "tdkps/random.hpp"
#include "tdkps/response_tensor.hpp"

#include <filesystem>
#include <string>

namespace fixture {

inline tdkps::ResponseTensor random_tensor(tdkps::TensorShape shape, std::uint64_t seed) {
  tdkps::Rng rng(seed);
  std::vector<double> v(static_cast<std::size_t>(shape.size()));
  for (auto& x : v) x = rng.normal();
  return tdkps::ResponseTensor(shape, std::move(v));
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, tdkps::Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("tdkps_test_" + name)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& file) const { return path_ / file; }

private:
  std::filesystem::path path_;
};

}  // namespace fixture
