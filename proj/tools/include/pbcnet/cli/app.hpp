#pragma once

#include "pbcnet/cli/config.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pbcnet::cli {

enum ExitCode : int {
  kExitPass = 0,
  kExitMonitorViolation = 1,
  kExitConfigError = 2,
  kExitNumericalFailure = 3,
};

struct RunOverrides {
  std::vector<ScenarioKind> scenarios;  // empty: the config's kind
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> t_end;
  std::optional<double> dt;
  int jobs = 1;
};

struct RunOutcome {
  int exit_code = kExitPass;
  std::vector<std::string> artifacts;
  std::string summary;  // human-readable, one block per scenario
};

/// Runs every requested scenario, writes trace CSV and summary JSON per run.
RunOutcome run_command(const RunConfig& config, const RunOverrides& overrides);

/// Steady-state table for the configured network.
std::string steady_state_table(const RunConfig& config);

}  // namespace pbcnet::cli
