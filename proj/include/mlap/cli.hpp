#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace mlap {

struct Budgets {
  std::size_t paths = 200;    // controlled paths
  std::size_t inner = 64;     // inner Monte Carlo draws per drift
  std::size_t samples = 20000;  // direct Laplace samples
  int chain_steps = 400;      // kept MALA samples per chain
  int burn_in = 500;
  int thin = 5;
  int chains = 4;
};

struct ExperimentConfig {
  std::string command;
  nlohmann::json potential;  // potential spec document
  std::vector<int> ns{8};
  int m = 1;
  Budgets budgets;
  int steps = 100;           // time grid resolution
  std::vector<double> t_grid;  // flow grid for entropy-estimate
  std::uint64_t seed = 0;
  std::string output = "out";
  int threads = 0;
  nlohmann::json params = nlohmann::json::object();  // command specific
};

const std::vector<std::string>& known_commands();

/// Validates a config document; ConfigError names the field path.
ExperimentConfig parse_config(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

struct RunOutcome {
  int exit_code = 0;  // 0 pass, 1 numerical-check failure
  nlohmann::json report;
};

/// Runs the command and, when `write_files` is set, writes report.json,
/// config.json and tables/*.csv under cfg.output. Throws ConfigError and
/// NumericalError.
RunOutcome run(const ExperimentConfig& cfg, bool write_files = true);

/// Full command-line entry: `mlaplace <command> --config file [--seed u64]
/// [--out dir] [--threads k]`. Returns the process exit code.
int cli_main(int argc, char** argv);

}  // namespace mlap
