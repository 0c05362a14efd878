#pragma once

// Run configuration: a YAML document mirroring the converter table, the
// network tree and the disturbance scenario.
//
//   converters:
//     - {id: boost, topology: boost, L: 470e-6, C: 10e-6, E: 18, k: 0.02,
//        i0: 1.4, v0: 10, v_target: 36}
//   network: parallel(boost, series(buck, buckboost))
//   splits: [[0.325, 0.675]]          # one list per parallel node, pre-order
//   load: 12
//   scenario: {kind: ideal, dt: 1e-6, t_end: 20e-3, controller_period: 1e-6, seed: 1}
//   output: trace.csv

#include "pbcnet/model.hpp"
#include "pbcnet/network.hpp"
#include "pbcnet/sim.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pbcnet::cli {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& message, std::optional<int> line = std::nullopt,
              std::string key = {});

  std::optional<int> line() const { return line_; }
  const std::string& key() const { return key_; }
  const std::string& message() const { return message_; }

 private:
  std::string message_;
  std::optional<int> line_;
  std::string key_;
};

struct ConverterConfig {
  std::string id;
  Topology topology = Topology::Boost;
  double inductance = 0.0;
  double capacitance = 0.0;
  double source_voltage = 0.0;
  double gain = 0.0;
  double initial_current = 0.0;
  double initial_voltage = 0.0;
  double target_voltage = 0.0;

  bool operator==(const ConverterConfig&) const = default;
};

enum class ScenarioKind { Ideal, Perturb, LoadDip };

std::string to_string(ScenarioKind kind);
std::optional<ScenarioKind> scenario_kind_from_string(std::string_view name);

struct PerturbConfig {
  double peak_to_peak = 10.0;
  std::optional<double> hold_period;   // defaults to the controller period
  std::optional<double> t_end;         // overrides scenario.t_end
  double steady_band_start = 10e-3;    // errors are reported from here on

  bool operator==(const PerturbConfig&) const = default;
};

struct LoadDipConfig {
  double factor = 0.7;
  double start = 20e-3;
  double stop = 25e-3;
  std::optional<double> t_end;

  bool operator==(const LoadDipConfig&) const = default;
};

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::Ideal;
  double dt = 1e-6;
  double t_end = 20e-3;
  double controller_period = 1e-6;
  std::uint64_t seed = 1;
  PerturbConfig perturb;
  LoadDipConfig load_dip;

  bool operator==(const ScenarioConfig&) const = default;
};

struct RunConfig {
  std::vector<ConverterConfig> converters;
  std::string network;
  std::vector<std::vector<double>> splits;
  double load = 0.0;
  ScenarioConfig scenario;
  std::string output = "trace.csv";

  bool operator==(const RunConfig&) const = default;
};

/// Parses and validates. Throws ConfigError with line/key context.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);
std::string render_config(const RunConfig& config);

/// Tree expression over converter ids:
///   expr := id | series(expr, ...) | parallel(expr, ...)
/// Parallel split fractions are left empty. Throws ConfigError.
NetworkNode parse_tree_expression(std::string_view text, const std::vector<std::string>& ids);
std::string render_tree_expression(const NetworkNode& node, const std::vector<std::string>& ids);

NetworkSpec build_network_spec(const RunConfig& config);
/// Leaf models with a unit placeholder load; the network assigns real ones.
std::vector<ConverterModel> build_leaf_models(const RunConfig& config);
std::vector<double> gains(const RunConfig& config);
Scenario build_scenario(const RunConfig& config, ScenarioKind kind);

}  // namespace pbcnet::cli
