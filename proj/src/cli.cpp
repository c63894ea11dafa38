#include "tdkps/cli.hpp"

#include "tdkps/agent_tests.hpp"
#include "tdkps/error.hpp"
#include "tdkps/group_tests.hpp"
#include "tdkps/harness.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>

namespace tdkps {
namespace {

std::string real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void print_result(const TestResult& r, std::ostream& out) {
  out << "method=" << r.method_name << '\n'
      << "statistic=" << real(r.statistic) << '\n'
      << "p_value=" << real(r.p_value) << '\n'
      << "permutations=" << r.n_permutations << '\n';
}

class Stopwatch {
public:
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

SimulationConfig read_simulation_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_simulation_config(j);
}

struct Options {
  std::string config, out, data, method, dim = "auto";
  std::optional<std::uint64_t> seed_override;
  std::uint64_t seed = 0;
  Index agent = 0, time_a = 0, time_b = 1, permutations = 1000;
  int group_label = 0;
  std::optional<int> threads;
  bool timing = false;
};

int cmd_simulate(const Options& o, std::ostream& out) {
  SimulationConfig config = read_simulation_config(o.config);
  if (o.seed_override) config.seed = *o.seed_override;
  config.validate();
  const auto data = generate_dataset(config);
  save_simulation(data, o.out);
  const auto shape = data.tensor.shape();
  out << "wrote " << o.out << " agents=" << shape.n_agents << " times=" << shape.n_times
      << " queries=" << shape.n_queries << " replicates=" << shape.n_replicates << " dim=" << shape.dim
      << " seed=" << config.seed << '\n';
  return kExitOk;
}

int cmd_embed(const Options& o, std::ostream& out) {
  const DimRequest dim = parse_dim_request(o.dim);
  const auto [tensor, manifest] = load_tensor(o.data);
  const auto fit = fit_tdkps(tensor, dim);
  write_embedding_csv(fit.embedding, o.out);
  out << "dim=" << fit.embedding.dim() << '\n'
      << "dim_clamped=" << (fit.embedding.dim_clamped ? "true" : "false") << '\n'
      << "negative_mass_fraction=" << real(fit.embedding.negative_mass_fraction) << '\n';
  return kExitOk;
}

int cmd_test_agent(const Options& o, std::ostream& out) {
  const std::vector<std::string> valid{"tdkps", "oracle", "dcorr"};
  if (std::find(valid.begin(), valid.end(), o.method) == valid.end()) {
    throw ArgumentError("unknown method \"" + o.method + "\"; valid methods: tdkps, oracle, dcorr");
  }
  AgentTestSpec spec;
  spec.agent = o.agent;
  spec.time_a = o.time_a;
  spec.time_b = o.time_b;
  spec.n_permutations = o.permutations;
  spec.seed = o.seed;
  spec.dim = parse_dim_request(o.dim);
  if (o.method == "oracle") {
    print_result(oracle_agent_test(load_simulation(o.data), spec), out);
    return kExitOk;
  }
  const auto [tensor, manifest] = load_tensor(o.data);
  print_result(o.method == "tdkps" ? tdkps_agent_test(tensor, spec) : dcorr_agent_test(tensor, spec), out);
  return kExitOk;
}

int cmd_test_group(const Options& o, std::ostream& out) {
  const std::vector<std::string> valid{"pe_tdkps", "oracle", "dcorr", "dcorr_tdkps"};
  std::string method = o.method;
  if (method == "oracle_group") method = "oracle";
  if (method == "dcorr_group") method = "dcorr";
  if (std::find(valid.begin(), valid.end(), method) == valid.end()) {
    throw ArgumentError("unknown method \"" + o.method + "\"; valid methods: pe_tdkps, oracle, dcorr, dcorr_tdkps");
  }
  const auto [tensor, manifest] = load_tensor(o.data);
  if (!manifest.group_labels) throw ArgumentError(o.data + " has no group labels in its manifest");
  GroupTestSpec spec;
  spec.group = manifest.group_members(o.group_label);
  spec.time_a = o.time_a;
  spec.time_b = o.time_b;
  spec.n_permutations = o.permutations;
  spec.seed = o.seed;
  spec.dim = parse_dim_request(o.dim);
  TestResult r;
  if (method == "oracle") {
    r = oracle_group_test(load_simulation(o.data), spec);
  } else if (method == "dcorr") {
    r = dcorr_group_test(tensor, spec);
  } else {
    spec.validate(tensor.n_agents(), tensor.n_times());
    const auto fit = fit_tdkps(tensor, spec.dim);
    r = method == "pe_tdkps" ? pe_tdkps_group_test(fit.embedding, spec) : dcorr_tdkps_group_test(fit.embedding, spec);
  }
  print_result(r, out);
  return kExitOk;
}

int cmd_power(const Options& o, std::ostream& out, std::ostream& err) {
  ExperimentConfig config = load_experiment_config(o.config);
  if (o.threads) config.threads = *o.threads;
  SweepOptions options;
  options.record_timing = o.timing;
  options.log = &err;
  const auto rows = run_power_sweep(config, options);
  emit_csv(rows, std::filesystem::path(o.out));
  out << "wrote " << o.out << " rows=" << rows.size() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Perspective-shift detection with time-dependent kernel perspective spaces", "tdkps"};
  app.require_subcommand(1);
  Options o;

  auto* simulate = app.add_subcommand("simulate", "Generate a temporal Gaussian blob dataset");
  simulate->add_option("--config", o.config, "Simulation config (JSON)")->required();
  simulate->add_option("--out", o.out, "Output tensor path")->required();
  simulate->add_option("--seed", o.seed_override, "Override the config seed");

  auto* embed = app.add_subcommand("embed", "Embed all (agent, time) slots with CMDS");
  embed->add_option("--data", o.data, "Response tensor")->required();
  embed->add_option("--dim", o.dim, "Embedding dimension or 'auto'");
  embed->add_option("--out", o.out, "Output CSV")->required();

  auto add_test_options = [&](CLI::App* sub) {
    sub->add_option("--data", o.data, "Response tensor")->required();
    sub->add_option("--t", o.time_a, "First timepoint index");
    sub->add_option("--t-prime", o.time_b, "Second timepoint index");
    sub->add_option("--method", o.method, "Test method")->required();
    sub->add_option("--permutations", o.permutations, "Number of permutations B");
    sub->add_option("--seed", o.seed, "Permutation seed");
    sub->add_option("--dim", o.dim, "Embedding dimension or 'auto'");
  };
  auto* test_agent = app.add_subcommand("test-agent", "Test one agent for a perspective shift");
  add_test_options(test_agent);
  test_agent->add_option("--agent", o.agent, "Agent index")->required();

  auto* test_group = app.add_subcommand("test-group", "Test a labelled group for a collective shift");
  add_test_options(test_group);
  test_group->add_option("--group-label", o.group_label, "Group label from the manifest")->required();

  auto* power = app.add_subcommand("power", "Run a Monte-Carlo power sweep");
  power->add_option("--config", o.config, "Experiment config (JSON)")->required();
  power->add_option("--out", o.out, "Output CSV")->required();
  power->add_option("--threads", o.threads, "Worker threads");
  power->add_flag("--timing", o.timing, "Record mean_runtime_ms (makes the CSV run-dependent)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  }

  const Stopwatch watch;
  int code = kExitOk;
  try {
    if (simulate->parsed()) code = cmd_simulate(o, out);
    else if (embed->parsed()) code = cmd_embed(o, out);
    else if (test_agent->parsed()) code = cmd_test_agent(o, out);
    else if (test_group->parsed()) code = cmd_test_group(o, out);
    else code = cmd_power(o, out, err);
  } catch (const ArgumentError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const BoundsError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DimensionError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DegenerateInputError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const SingularityError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ZeroVarianceError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const Error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  }
  err << "runtime_ms=" << real(watch.elapsed_ms()) << '\n';
  return code;
}

}  // namespace tdkps
