#include "tdkps/simulation.hpp"

#include "tdkps/error.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>

namespace tdkps {
namespace {

enum StreamTag : std::uint64_t { kAgentStream = 1, kQueryStream = 2, kNoiseStream = 3 };

}  // namespace

void SimulationConfig::validate() const {
  if (n_agents < 1 || dim < 1 || n_queries < 1 || n_replicates < 1) {
    throw ConfigError("simulation: n_agents, dim, n_queries and n_replicates must be positive");
  }
  if (signal_dims < 1 || signal_dims > dim) throw ConfigError("simulation: need 1 <= signal_dims <= dim");
  if (!(effect_size >= 0.0 && effect_size <= 1.0)) throw ConfigError("simulation: effect_size must lie in [0, 1]");
  if (!(scale > 0.0)) throw ConfigError("simulation: scale must be positive");
  if (!std::isfinite(decay)) throw ConfigError("simulation: decay must be finite");
  if (!(class_prob >= 0.0 && class_prob <= 1.0)) throw ConfigError("simulation: class_prob must lie in [0, 1]");
  if (!(agent_var >= 0.0) || !(noise_var >= 0.0)) throw ConfigError("simulation: variances must be nonnegative");
}

std::vector<Index> GroundTruth::class_members(int label) const {
  std::vector<Index> out;
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] == label) out.push_back(static_cast<Index>(n));
  }
  return out;
}

namespace {

Eigen::VectorXd front_profile(Index signal_dims, double decay) {
  Eigen::VectorXd v(signal_dims);
  for (Index j = 0; j < signal_dims; ++j) v(j) = std::exp(-decay * static_cast<double>(j));
  return v;
}

Eigen::VectorXd shifted_profile(double tau, Index signal_dims, double decay) {
  const Eigen::VectorXd front = front_profile(signal_dims, decay);
  return (1.0 - tau) * front + tau * front.reverse();
}

}  // namespace

double gamma_norm(double tau, Index signal_dims, double decay, double scale) {
  if (!(tau > 0.0 && tau <= 1.0)) throw ArgumentError("gamma_norm: tau must lie in (0, 1]");
  if (signal_dims < 1) throw ArgumentError("gamma_norm: need at least one signal dimension");
  // The scale multiplies both profiles and cancels.
  (void)scale;
  return front_profile(signal_dims, decay).norm() / shifted_profile(tau, signal_dims, decay).norm();
}

Eigen::VectorXd class_mean(int t, int label, const SimulationConfig& config) {
  if (t != 1 && t != 2) throw ArgumentError("class_mean: t must be 1 or 2");
  if (label != 0 && label != 1) throw ArgumentError("class_mean: label must be 0 or 1");
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(config.dim);
  if (label == 1) return mu;
  const Index ps = config.signal_dims;
  const double tau = config.effect_size;
  if (t == 1 || tau == 0.0) {
    mu.head(ps) = config.scale * front_profile(ps, config.decay);
  } else {
    mu.head(ps) = config.scale * gamma_norm(tau, ps, config.decay) * shifted_profile(tau, ps, config.decay);
  }
  return mu;
}

Eigen::MatrixXd sample_orthogonal(Rng& rng, Index p) {
  if (p < 1) throw ArgumentError("sample_orthogonal: dimension must be positive");
  Eigen::MatrixXd g(p, p);
  for (Index j = 0; j < p; ++j) {
    for (Index i = 0; i < p; ++i) g(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd& r = qr.matrixQR();
  for (Index j = 0; j < p; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  if (q.determinant() < 0.0) q.col(0) = -q.col(0);
  return q;
}

Eigen::VectorXd sample_agent_effect(Rng& rng, const SimulationConfig& config) {
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(config.dim);
  const double sd = std::sqrt(config.agent_var);
  for (Index j = 0; j < config.signal_dims; ++j) eta(j) = sd * rng.normal();
  return eta;
}

GroundTruth make_ground_truth(const SimulationConfig& config) {
  config.validate();
  GroundTruth truth;
  truth.config = config;
  for (int t = 0; t < 2; ++t) {
    for (int y = 0; y < 2; ++y) truth.class_means[t][y] = class_mean(t + 1, y, config);
  }
  truth.labels.resize(static_cast<std::size_t>(config.n_agents));
  truth.agent_effects.resize(config.n_agents, config.dim);
  for (Index n = 0; n < config.n_agents; ++n) {
    Rng rng(config.seed, {kAgentStream, static_cast<std::uint64_t>(n)});
    truth.labels[static_cast<std::size_t>(n)] = rng.bernoulli(config.class_prob) ? 1 : 0;
    truth.agent_effects.row(n) = sample_agent_effect(rng, config).transpose();
  }
  truth.orthogonals.reserve(static_cast<std::size_t>(config.n_queries));
  for (Index m = 0; m < config.n_queries; ++m) {
    Rng rng(config.seed, {kQueryStream, static_cast<std::uint64_t>(m)});
    truth.orthogonals.push_back(sample_orthogonal(rng, config.dim));
  }
  return truth;
}

SimulatedDataset generate_dataset(const SimulationConfig& config) {
  GroundTruth truth = make_ground_truth(config);
  const TensorShape shape{config.n_agents, 2, config.n_queries, config.n_replicates, config.dim};
  std::vector<double> values(static_cast<std::size_t>(shape.size()));
  const double noise_sd = std::sqrt(config.noise_var);

  std::size_t k = 0;
  for (Index t = 0; t < 2; ++t) {
    for (Index n = 0; n < config.n_agents; ++n) {
      const int y = truth.labels[static_cast<std::size_t>(n)];
      const Eigen::VectorXd latent = truth.class_means[t][y] + truth.agent_effects.row(n).transpose();
      Rng noise(config.seed, {kNoiseStream, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(n)});
      for (Index m = 0; m < config.n_queries; ++m) {
        const Eigen::VectorXd center = truth.orthogonals[static_cast<std::size_t>(m)] * latent;
        for (Index r = 0; r < config.n_replicates; ++r) {
          for (Index j = 0; j < config.dim; ++j) values[k++] = center(j) + noise_sd * noise.normal();
        }
      }
    }
  }
  return {ResponseTensor(shape, std::move(values)), std::move(truth)};
}

TensorManifest simulation_manifest(const SimulatedDataset& data) {
  TensorManifest m = default_manifest(data.tensor.shape());
  m.time_labels = {"t1", "t2"};
  m.group_labels = data.truth.labels;
  m.seed = static_cast<std::int64_t>(data.truth.config.seed);
  return m;
}

namespace {

const std::set<std::string>& simulation_keys() {
  static const std::set<std::string> keys{"n_agents",     "dim",        "signal_dims", "n_queries",
                                          "n_replicates", "effect_size", "scale",      "decay",
                                          "class_prob",   "agent_var",  "noise_var",  "seed"};
  return keys;
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("simulation config field \"") + key + "\": " + e.what());
  }
}

}  // namespace

void to_json(nlohmann::json& j, const SimulationConfig& c) {
  j = nlohmann::json{{"n_agents", c.n_agents},     {"dim", c.dim},
                     {"signal_dims", c.signal_dims}, {"n_queries", c.n_queries},
                     {"n_replicates", c.n_replicates}, {"effect_size", c.effect_size},
                     {"scale", c.scale},           {"decay", c.decay},
                     {"class_prob", c.class_prob}, {"agent_var", c.agent_var},
                     {"noise_var", c.noise_var},   {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, SimulationConfig& c) {
  if (!j.is_object()) throw ConfigError("simulation config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!simulation_keys().contains(key)) throw ConfigError("simulation config: unknown key \"" + key + "\"");
  }
  read_field(j, "n_agents", c.n_agents);
  read_field(j, "dim", c.dim);
  read_field(j, "signal_dims", c.signal_dims);
  read_field(j, "n_queries", c.n_queries);
  read_field(j, "n_replicates", c.n_replicates);
  read_field(j, "effect_size", c.effect_size);
  read_field(j, "scale", c.scale);
  read_field(j, "decay", c.decay);
  read_field(j, "class_prob", c.class_prob);
  read_field(j, "agent_var", c.agent_var);
  read_field(j, "noise_var", c.noise_var);
  read_field(j, "seed", c.seed);
}

SimulationConfig parse_simulation_config(const nlohmann::json& j) {
  SimulationConfig c;
  from_json(j, c);
  c.validate();
  return c;
}

std::filesystem::path simulation_sidecar_path(const std::filesystem::path& tensor_path) {
  return std::filesystem::path(tensor_path.string() + ".simulation.json");
}

void save_simulation(const SimulatedDataset& data, const std::filesystem::path& path) {
  save_tensor(data.tensor, simulation_manifest(data), path);
  std::ofstream out(simulation_sidecar_path(path), std::ios::trunc);
  if (!out) throw IoError("cannot open " + simulation_sidecar_path(path).string() + " for writing");
  out << nlohmann::json(data.truth.config).dump(2) << '\n';
}

SimulatedDataset load_simulation(const std::filesystem::path& path) {
  auto [tensor, manifest] = load_tensor(path);
  const auto side = simulation_sidecar_path(path);
  std::ifstream in(side);
  if (!in) throw IoError("ground truth needs " + side.string() + ", which is missing");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(side.string() + ": " + e.what());
  }
  GroundTruth truth = make_ground_truth(parse_simulation_config(j));
  const auto& c = truth.config;
  if (tensor.shape() != TensorShape{c.n_agents, 2, c.n_queries, c.n_replicates, c.dim}) {
    throw ValidationError(side.string() + ": simulation config does not match the tensor shape");
  }
  return {std::move(tensor), std::move(truth)};
}

}  // namespace tdkps
