#include "pbcnet/cli/app.hpp"
#include "pbcnet/cli/config.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace pbcnet::cli;

  CLI::App app{"Simulate output series-parallel DC-DC converters under passivity-based control"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> scenario_names;
  std::uint64_t seed = 0;
  std::string out;
  double t_end = 0.0;
  double dt = 0.0;
  int jobs = 1;

  CLI::App* run = app.add_subcommand("run", "Run one or more scenarios and write trace CSV + summary");
  run->add_option("--config", config_path, "Configuration file")->required();
  run->add_option("--scenario", scenario_names, "ideal, perturb or load-dip (repeatable, comma separated)")
      ->delimiter(',');
  auto* seed_opt = run->add_option("--seed", seed, "Perturbation seed");
  auto* out_opt = run->add_option("--out", out, "Trace CSV path");
  auto* t_end_opt = run->add_option("--t-end", t_end, "Simulated time in seconds");
  auto* dt_opt = run->add_option("--dt", dt, "Integrator step in seconds");
  run->add_option("--jobs", jobs, "Scenarios to run concurrently")->check(CLI::PositiveNumber);

  CLI::App* steady = app.add_subcommand("steady", "Print the network steady state");
  steady->add_option("--config", config_path, "Configuration file")->required();

  CLI::App* render = app.add_subcommand("render", "Print the normalised configuration");
  render->add_option("--config", config_path, "Configuration file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfigError;
  }

  RunConfig config;
  try {
    config = load_config(config_path);
  } catch (const ConfigError& e) {
    std::cerr << config_path << ": " << e.what() << "\n";
    return kExitConfigError;
  }

  if (steady->parsed()) {
    try {
      std::cout << steady_state_table(config);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitConfigError;
    }
    return kExitPass;
  }
  if (render->parsed()) {
    std::cout << render_config(config);
    return kExitPass;
  }

  RunOverrides overrides;
  for (const auto& name : scenario_names) {
    const auto kind = scenario_kind_from_string(name);
    if (!kind) {
      std::cerr << "unknown scenario '" << name << "'\n";
      return kExitConfigError;
    }
    overrides.scenarios.push_back(*kind);
  }
  if (*seed_opt) overrides.seed = seed;
  if (*out_opt) overrides.out = out;
  if (*t_end_opt) overrides.t_end = t_end;
  if (*dt_opt) overrides.dt = dt;
  overrides.jobs = jobs;

  const RunOutcome outcome = run_command(config, overrides);
  std::cout << outcome.summary;
  return outcome.exit_code;
}
