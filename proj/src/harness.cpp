#include "tdkps/harness.hpp"

#include "tdkps/agent_tests.hpp"
#include "tdkps/error.hpp"
#include "tdkps/group_tests.hpp"
#include "tdkps/parallel.hpp"

#include <json.hpp>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>

namespace tdkps {
namespace {

constexpr std::array<Method, 7> kAllMethods{Method::tdkps,       Method::oracle,      Method::dcorr,
                                            Method::pe_tdkps,    Method::dcorr_group, Method::dcorr_tdkps,
                                            Method::oracle_group};

std::string join_names() {
  std::string s;
  for (auto m : kAllMethods) s += (s.empty() ? "" : ", ") + std::string(to_string(m));
  return s;
}

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::tdkps: return "tdkps";
    case Method::oracle: return "oracle";
    case Method::dcorr: return "dcorr";
    case Method::pe_tdkps: return "pe_tdkps";
    case Method::dcorr_group: return "dcorr_group";
    case Method::dcorr_tdkps: return "dcorr_tdkps";
    case Method::oracle_group: return "oracle_group";
  }
  return "?";
}

std::string_view to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::effect_size: return "effect_size";
    case SweepParameter::n_agents: return "n_agents";
    case SweepParameter::n_queries: return "n_queries";
    case SweepParameter::n_replicates: return "n_replicates";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (auto m : kAllMethods) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown method \"" + std::string(name) + "\"; valid methods: " + join_names());
}

SweepParameter parse_sweep_parameter(std::string_view name) {
  for (auto p : {SweepParameter::effect_size, SweepParameter::n_agents, SweepParameter::n_queries,
                 SweepParameter::n_replicates}) {
    if (to_string(p) == name) return p;
  }
  throw ConfigError("unknown sweep_parameter \"" + std::string(name) +
                    "\"; valid: effect_size, n_agents, n_queries, n_replicates");
}

bool is_group_method(Method m) {
  return m == Method::pe_tdkps || m == Method::dcorr_group || m == Method::dcorr_tdkps || m == Method::oracle_group;
}

void ExperimentConfig::validate() const {
  if (sweep_values.empty()) throw ConfigError("experiment: sweep_values must be nonempty");
  if (methods.empty()) throw ConfigError("experiment: methods must be nonempty");
  if (trials < 1) throw ConfigError("experiment: trials must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("experiment: alpha must lie in (0, 1)");
  if (n_permutations < 1) throw ConfigError("experiment: n_permutations must be at least 1");
  if (threads < 1) throw ConfigError("experiment: threads must be at least 1");
  if (agents_per_trial < 1) throw ConfigError("experiment: agents_per_trial must be at least 1");
  for (double v : sweep_values) config_for(v).validate();
}

SimulationConfig ExperimentConfig::config_for(double value) const {
  SimulationConfig c = base;
  auto as_count = [&](double v) {
    if (v != std::floor(v) || v < 1) {
      throw ConfigError("experiment: sweep value " + std::to_string(v) + " is not a positive integer");
    }
    return static_cast<Index>(v);
  };
  switch (sweep_parameter) {
    case SweepParameter::effect_size: c.effect_size = value; break;
    case SweepParameter::n_agents: c.n_agents = as_count(value); break;
    case SweepParameter::n_queries: c.n_queries = as_count(value); break;
    case SweepParameter::n_replicates: c.n_replicates = as_count(value); break;
  }
  return c;
}

ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  static const std::set<std::string> keys{"base",          "sweep_parameter", "sweep_values", "methods",
                                          "trials",        "alpha",           "n_permutations", "seed",
                                          "threads",       "agents_per_trial", "dim"};
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!keys.contains(key)) throw ConfigError("experiment config: unknown key \"" + key + "\"");
  }
  ExperimentConfig c;
  try {
    if (j.contains("base")) c.base = parse_simulation_config(j["base"]);
    if (j.contains("sweep_parameter")) c.sweep_parameter = parse_sweep_parameter(j["sweep_parameter"].get<std::string>());
    c.sweep_values = j.at("sweep_values").get<std::vector<double>>();
    for (const auto& name : j.at("methods").get<std::vector<std::string>>()) c.methods.push_back(parse_method(name));
    bool all_group = true;
    for (auto m : c.methods) all_group = all_group && is_group_method(m);
    c.trials = j.contains("trials") ? j["trials"].get<Index>() : (all_group ? 200 : 50);
    if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
    if (j.contains("n_permutations")) c.n_permutations = j["n_permutations"].get<Index>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("threads")) c.threads = j["threads"].get<int>();
    if (j.contains("agents_per_trial")) c.agents_per_trial = j["agents_per_trial"].get<Index>();
    if (j.contains("dim")) {
      const auto& d = j["dim"];
      c.dim = d.is_string() ? parse_dim_request(d.get<std::string>()) : DimRequest::fixed(d.get<Index>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_experiment_config(j);
}

WilsonInterval wilson_interval(Index successes, Index trials, double z) {
  if (trials <= 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2 * n)) / denom;
  const double half = z / denom * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n));
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

std::uint64_t trial_seed(std::uint64_t master, std::size_t value_index, std::size_t trial, std::size_t resample) {
  return derive_seed(master, {value_index, trial, resample});
}

namespace {

enum : std::uint64_t { kPickStream = 11, kMethodStream = 12 };

struct Tally {
  Index tests = 0;
  Index rejections = 0;
  double runtime_ms = 0.0;
};

struct TrialOutcome {
  std::vector<std::array<Tally, 2>> per_method;  // [method position][class]
  std::uint64_t seed = 0;
  std::size_t resamples = 0;
};

std::size_t min_class_size(const ExperimentConfig& config, const SimulationConfig& sim) {
  std::size_t need = 1;
  for (auto m : config.methods) {
    if (is_group_method(m)) need = std::max<std::size_t>(need, 2);
    if (m == Method::oracle_group) need = std::max<std::size_t>(need, static_cast<std::size_t>(sim.signal_dims) + 1);
  }
  return need;
}

std::vector<Index> pick_agents(std::vector<Index> members, Index k, Rng& rng) {
  rng.shuffle(members.begin(), members.end());
  if (static_cast<Index>(members.size()) > k) members.resize(static_cast<std::size_t>(k));
  return members;
}

TrialOutcome run_trial(const ExperimentConfig& config, const std::vector<Method>& methods, std::size_t value_index,
                       std::size_t trial, const SweepOptions& options) {
  SimulationConfig sim = config.config_for(config.sweep_values[value_index]);
  const std::size_t need = min_class_size(config, sim);
  TrialOutcome out;
  out.per_method.resize(methods.size());

  constexpr std::size_t kMaxResamples = 1000;
  GroundTruth truth;
  for (;; ++out.resamples) {
    if (out.resamples >= kMaxResamples) {
      throw ConfigError("experiment: could not draw both classes with at least " + std::to_string(need) +
                        " agents; increase n_agents");
    }
    sim.seed = trial_seed(config.seed, value_index, trial, out.resamples);
    truth = make_ground_truth(sim);
    if (truth.class_members(0).size() >= need && truth.class_members(1).size() >= need) break;
  }
  out.seed = sim.seed;
  const SimulatedDataset data = generate_dataset(sim);

  bool needs_fit = false;
  for (auto m : methods) needs_fit = needs_fit || m == Method::tdkps || m == Method::pe_tdkps || m == Method::dcorr_tdkps;
  TdkpsFit fit;
  if (needs_fit) {
    fit = fit_tdkps(data.tensor, config.dim);
  } else {
    fit.means = all_mean_responses(data.tensor);
  }

  std::array<std::vector<Index>, 2> agents;
  for (int c = 0; c < 2; ++c) {
    Rng rng(sim.seed, {kPickStream, static_cast<std::uint64_t>(c)});
    agents[c] = pick_agents(data.truth.class_members(c), config.agents_per_trial, rng);
  }

  using clock = std::chrono::steady_clock;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const Method method = methods[mi];
    for (int c = 0; c < 2; ++c) {
      auto& tally = out.per_method[mi][static_cast<std::size_t>(c)];
      auto record = [&](auto&& run) {
        const auto start = options.record_timing ? clock::now() : clock::time_point{};
        const TestResult r = run();
        if (options.record_timing) {
          tally.runtime_ms += std::chrono::duration<double, std::milli>(clock::now() - start).count();
        }
        ++tally.tests;
        if (r.p_value <= config.alpha) ++tally.rejections;
      };
      const auto method_seed = [&](std::size_t k) {
        return derive_seed(sim.seed, {kMethodStream, static_cast<std::uint64_t>(method), static_cast<std::uint64_t>(c), k});
      };
      if (is_group_method(method)) {
        GroupTestSpec spec;
        spec.group = data.truth.class_members(c);
        spec.n_permutations = config.n_permutations;
        spec.seed = method_seed(0);
        spec.dim = config.dim;
        record([&] {
          switch (method) {
            case Method::pe_tdkps: return pe_tdkps_group_test(fit.embedding, spec);
            case Method::dcorr_group: return dcorr_group_test(fit.means, data.tensor.n_agents(), spec);
            case Method::dcorr_tdkps: return dcorr_tdkps_group_test(fit.embedding, spec);
            default: return oracle_group_test(data, spec);
          }
        });
      } else {
        for (std::size_t k = 0; k < agents[c].size(); ++k) {
          AgentTestSpec spec;
          spec.agent = agents[c][k];
          spec.n_permutations = config.n_permutations;
          spec.seed = method_seed(k);
          spec.dim = config.dim;
          record([&] {
            switch (method) {
              case Method::tdkps: return tdkps_agent_test(data.tensor, fit, spec);
              case Method::dcorr: return dcorr_agent_test(data.tensor, spec);
              default: return oracle_agent_test(data, spec);
            }
          });
        }
      }
    }
  }
  return out;
}

}  // namespace

std::vector<PowerRow> run_power_sweep(const ExperimentConfig& config, const SweepOptions& options) {
  config.validate();
  std::vector<Method> methods;
  for (auto m : kAllMethods) {
    if (std::find(config.methods.begin(), config.methods.end(), m) != config.methods.end()) methods.push_back(m);
  }

  const std::size_t n_values = config.sweep_values.size();
  const auto n_trials = static_cast<std::size_t>(config.trials);
  std::vector<TrialOutcome> outcomes(n_values * n_trials);
  parallel_for(outcomes.size(), config.threads, [&](std::size_t, std::size_t k) {
    outcomes[k] = run_trial(config, methods, k / n_trials, k % n_trials, options);
  });

  if (options.log) {
    for (std::size_t k = 0; k < outcomes.size(); ++k) {
      *options.log << "value_index=" << k / n_trials << " trial=" << k % n_trials << " seed=" << outcomes[k].seed
                   << " resamples=" << outcomes[k].resamples << '\n';
    }
  }

  std::vector<PowerRow> rows;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    for (std::size_t v = 0; v < n_values; ++v) {
      for (int c = 0; c < 2; ++c) {
        Tally total;
        for (std::size_t t = 0; t < n_trials; ++t) {
          const auto& tally = outcomes[v * n_trials + t].per_method[mi][static_cast<std::size_t>(c)];
          total.tests += tally.tests;
          total.rejections += tally.rejections;
          total.runtime_ms += tally.runtime_ms;
        }
        PowerRow row;
        row.method = std::string(to_string(methods[mi]));
        row.parameter = std::string(to_string(config.sweep_parameter));
        row.value = config.sweep_values[v];
        row.class_label = c;
        row.trials = total.tests;
        row.rejections = total.rejections;
        row.rejection_rate = total.tests > 0 ? static_cast<double>(total.rejections) / static_cast<double>(total.tests) : 0.0;
        const auto ci = wilson_interval(total.rejections, total.tests);
        row.ci_low = ci.low;
        row.ci_high = ci.high;
        row.mean_runtime_ms = total.tests > 0 ? total.runtime_ms / static_cast<double>(total.tests) : 0.0;
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

namespace {

std::string real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void emit_csv(const std::vector<PowerRow>& rows, std::ostream& out) {
  out << kPowerCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.method << ',' << r.parameter << ',' << real(r.value) << ',' << r.class_label << ',' << r.trials << ','
        << r.rejections << ',' << real(r.rejection_rate) << ',' << real(r.ci_low) << ',' << real(r.ci_high) << ','
        << real(r.mean_runtime_ms) << '\n';
  }
}

void emit_csv(const std::vector<PowerRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  emit_csv(rows, out);
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace tdkps
