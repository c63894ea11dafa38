#pragma once

#include "tdkps/embedding.hpp"
#include "tdkps/simulation.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace tdkps {

enum class Method { tdkps, oracle, dcorr, pe_tdkps, dcorr_group, dcorr_tdkps, oracle_group };
enum class SweepParameter { effect_size, n_agents, n_queries, n_replicates };

std::string_view to_string(Method m);
std::string_view to_string(SweepParameter p);
/// Throws ConfigError listing the valid names.
Method parse_method(std::string_view name);
SweepParameter parse_sweep_parameter(std::string_view name);
bool is_group_method(Method m);

struct ExperimentConfig {
  SimulationConfig base;
  SweepParameter sweep_parameter = SweepParameter::effect_size;
  std::vector<double> sweep_values;
  std::vector<Method> methods;
  Index trials = 50;
  double alpha = 0.05;
  Index n_permutations = 1000;
  std::uint64_t seed = 0;
  int threads = 1;
  Index agents_per_trial = 1;  ///< agent-level methods test this many agents per class per trial
  DimRequest dim = DimRequest::automatic();

  void validate() const;
  /// base with the sweep parameter set to `value`.
  SimulationConfig config_for(double value) const;
};

/// Parses a config object. Unknown keys are errors. When "trials" is absent it
/// defaults to 200 for purely group-level method sets and 50 otherwise.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct PowerRow {
  std::string method;
  std::string parameter;
  double value = 0.0;
  int class_label = 0;
  Index trials = 0;
  Index rejections = 0;
  double rejection_rate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double mean_runtime_ms = 0.0;
};

struct WilsonInterval {
  double low;
  double high;
};
/// 95% Wilson score interval for `successes` out of `trials`.
WilsonInterval wilson_interval(Index successes, Index trials, double z = 1.959963984540054);

struct SweepOptions {
  /// Wall-clock timing makes the CSV irreproducible, so it is opt-in;
  /// mean_runtime_ms is 0 otherwise.
  bool record_timing = false;
  /// Seed lineage, one line per trial in (value, trial) order.
  std::ostream* log = nullptr;
};

/// Seed of the dataset for (value index, trial index, resample count).
std::uint64_t trial_seed(std::uint64_t master, std::size_t value_index, std::size_t trial, std::size_t resample);

std::vector<PowerRow> run_power_sweep(const ExperimentConfig& config, const SweepOptions& options = {});

inline constexpr std::string_view kPowerCsvHeader =
    "method,parameter,value,class_label,trials,rejections,rejection_rate,ci_low,ci_high,mean_runtime_ms";

void emit_csv(const std::vector<PowerRow>& rows, std::ostream& out);
void emit_csv(const std::vector<PowerRow>& rows, const std::filesystem::path& path);

}  // namespace tdkps
