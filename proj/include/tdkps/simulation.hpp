#pragma once

#include "tdkps/random.hpp"
#include "tdkps/response_tensor.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace tdkps {

/// Temporal Gaussian blob parameters. Defaults are the agent-level settings
/// (p = 200, p_s = 5, M = 10, R = 25, alpha = 1, beta = 0.5, variances 1/2).
struct SimulationConfig {
  Index n_agents = 99;
  Index dim = 200;
  Index signal_dims = 5;
  Index n_queries = 10;
  Index n_replicates = 25;
  double effect_size = 0.2;
  double scale = 1.0;
  double decay = 0.5;
  double class_prob = 0.5;
  double agent_var = 0.5;
  double noise_var = 0.5;
  std::uint64_t seed = 0;

  /// Throws ConfigError on out-of-range fields.
  void validate() const;

  friend bool operator==(const SimulationConfig&, const SimulationConfig&) = default;
};

/// Everything the data-generating process knows besides the noise.
struct GroundTruth {
  SimulationConfig config;
  std::vector<int> labels;                     ///< 0 = signal class, 1 = null class
  std::array<std::array<Eigen::VectorXd, 2>, 2> class_means;  ///< [time 0/1][label]
  Eigen::MatrixXd agent_effects;               ///< N x p, row n is eta_n
  std::vector<Eigen::MatrixXd> orthogonals;    ///< one p x p rotation per query

  std::vector<Index> class_members(int label) const;
};

struct SimulatedDataset {
  ResponseTensor tensor;  ///< N x 2 x M x R x p
  GroundTruth truth;
};

/// Norm-matching constant keeping the class-0 signal magnitude fixed across time.
double gamma_norm(double tau, Index signal_dims, double decay, double scale = 1.0);

/// Class mean at time t in {1, 2}. Class 1 is identically zero.
Eigen::VectorXd class_mean(int t, int label, const SimulationConfig& config);

/// Haar-distributed rotation in SO(p) via sign-corrected QR of a Gaussian matrix.
Eigen::MatrixXd sample_orthogonal(Rng& rng, Index p);

/// eta_n: N(0, agent_var) on the first signal_dims coordinates, zero elsewhere.
Eigen::VectorXd sample_agent_effect(Rng& rng, const SimulationConfig& config);

/// Labels, effects and rotations for config.seed. Each agent and query draws
/// from its own substream, so this is cheap to recompute without the noise.
GroundTruth make_ground_truth(const SimulationConfig& config);

SimulatedDataset generate_dataset(const SimulationConfig& config);

/// Manifest for a simulated tensor: group_labels are the class labels.
TensorManifest simulation_manifest(const SimulatedDataset& data);

void to_json(nlohmann::json& j, const SimulationConfig& config);
void from_json(const nlohmann::json& j, SimulationConfig& config);
SimulationConfig parse_simulation_config(const nlohmann::json& j);

/// <tensor path>.simulation.json, which lets oracle tests rebuild the ground truth.
std::filesystem::path simulation_sidecar_path(const std::filesystem::path& tensor_path);

void save_simulation(const SimulatedDataset& data, const std::filesystem::path& path);

/// Loads a saved simulation: tensor, plus ground truth rebuilt from the sidecar config.
SimulatedDataset load_simulation(const std::filesystem::path& path);

}  // namespace tdkps
