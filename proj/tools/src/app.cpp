#include "pbcnet/cli/app.hpp"

#include "pbcnet/cli/trace_csv.hpp"
#include "pbcnet/errors.hpp"
#include "pbcnet/network.hpp"
#include "pbcnet/sim.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>

namespace pbcnet::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr double kConvergenceTolerance = 0.005;

struct SingleRun {
  int exit_code = kExitPass;
  std::vector<std::string> artifacts;
  std::string text;
};

std::string output_path(const std::string& base, ScenarioKind kind, bool several) {
  if (!several) return base;
  const fs::path p(base);
  fs::path out = p.parent_path() / (p.stem().string() + "_" + to_string(kind) + p.extension().string());
  return out.string();
}

std::string summary_path(const std::string& csv) {
  const fs::path p(csv);
  return (p.parent_path() / (p.stem().string() + ".summary.json")).string();
}

json steady_state_json(const RunConfig& config, const AssembledNetwork& network) {
  json rows = json::array();
  for (std::size_t m = 0; m < network.leaves.size(); ++m) {
    const OperatingPoint& op = network.operating_points[m];
    rows.push_back({{"id", config.converters[m].id},
                    {"topology", to_string(config.converters[m].topology)},
                    {"virtual_load", network.allocation.leaf_loads[m]},
                    {"i_d", op.x_desired(0)},
                    {"v_d", op.x_desired(1)},
                    {"mu_d", op.duty_desired(0)},
                    {"residual", op.residual_norm}});
  }
  return rows;
}

std::string steady_state_text(const RunConfig& config, const AssembledNetwork& network) {
  std::string out = fmt::format("{:<12} {:<10} {:>12} {:>10} {:>10} {:>8}\n", "id", "topology",
                                "R_virt[ohm]", "i_d[A]", "v_d[V]", "mu_d");
  for (std::size_t m = 0; m < network.leaves.size(); ++m) {
    const OperatingPoint& op = network.operating_points[m];
    out += fmt::format("{:<12} {:<10} {:>12.4f} {:>10.4f} {:>10.4f} {:>8.4f}\n", config.converters[m].id,
                       to_string(config.converters[m].topology), network.allocation.leaf_loads[m],
                       op.x_desired(0), op.x_desired(1), op.duty_desired(0));
  }
  return out;
}

SingleRun run_one(const RunConfig& config, const RunOverrides& overrides, ScenarioKind kind,
                  const std::string& csv_path) {
  SingleRun result;
  const std::vector<std::string> ids = [&] {
    std::vector<std::string> v;
    for (const auto& c : config.converters) v.push_back(c.id);
    return v;
  }();

  const NetworkSpec spec = build_network_spec(config);
  const std::vector<ConverterModel> leaves = build_leaf_models(config);
  const AssembledNetwork network = assemble_network(spec, leaves);
  const auto k = gains(config);
  const std::vector<PbcController> controllers = make_controllers(network, k);

  RunConfig effective = config;
  if (overrides.seed) effective.scenario.seed = *overrides.seed;
  Scenario scenario = build_scenario(effective, kind);
  if (overrides.t_end) scenario.t_end = *overrides.t_end;
  if (overrides.dt) scenario.dt = *overrides.dt;
  scenario.validate();

  const Trace trace = run(spec, leaves, scenario, controllers);

  {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw std::ios_base::failure("cannot open '" + csv_path + "' for writing");
    write_trace_csv(out, trace, ids);
    if (!out) throw std::ios_base::failure("failed writing '" + csv_path + "'");
  }
  result.artifacts.push_back(csv_path);

  const auto& ops = network.operating_points;
  json summary;
  summary["scenario"] = to_string(kind);
  summary["seed"] = effective.scenario.seed;
  summary["dt"] = scenario.dt;
  summary["t_end"] = scenario.t_end;
  summary["controller_period"] = scenario.controller_period;
  summary["rows"] = trace.size();
  summary["steady_state"] = steady_state_json(config, network);

  json final_state = json::array();
  for (std::size_t m = 0; m < ids.size(); ++m) {
    const LeafSample& s = trace.back().leaves[m];
    final_state.push_back({{"id", ids[m]}, {"i", s.current}, {"v", s.voltage}, {"mu", s.duty}});
  }
  json convergence;
  convergence["final_state"] = final_state;
  convergence["final_max_relative_error"] = max_relative_error(trace.back(), ops);
  convergence["tolerance"] = kConvergenceTolerance;
  const auto settle = settling_time(trace, ops, kConvergenceTolerance);
  convergence["settling_time"] = settle ? json(*settle) : json(nullptr);

  std::string text = fmt::format("scenario {} ({} rows, dt {} s, t_end {} s)\n", to_string(kind),
                                 trace.size(), scenario.dt, scenario.t_end);
  text += steady_state_text(config, network);
  text += fmt::format("final max relative error: {:.3e}\n", max_relative_error(trace.back(), ops));
  text += settle ? fmt::format("settled within {:.1f}% at t = {:.4f} ms\n", 100 * kConvergenceTolerance,
                               *settle * 1e3)
                 : std::string("did not settle within tolerance\n");

  if (kind == ScenarioKind::Perturb) {
    const double from = effective.scenario.perturb.steady_band_start;
    const ErrorBand band = error_band(trace, ops, from);
    convergence["steady_band"] = {{"from", from},
                                  {"current_relative", band.current},
                                  {"voltage_relative", band.voltage},
                                  {"duty_absolute", band.duty}};
    text += fmt::format("steady band from {:.1f} ms: current {:.2f}%, voltage {:.2f}%, duty {:.4f} (absolute)\n",
                        from * 1e3, 100 * band.current, 100 * band.voltage, band.duty);
  }
  if (kind == ScenarioKind::LoadDip) {
    const double restored = effective.scenario.load_dip.stop;
    const auto resettle = settling_time(trace, ops, kConvergenceTolerance, restored);
    convergence["load_restored_at"] = restored;
    convergence["reconvergence_time"] = resettle ? json(*resettle - restored) : json(nullptr);
    text += resettle ? fmt::format("re-converged {:.3f} ms after load restoration\n",
                                   (*resettle - restored) * 1e3)
                     : std::string("did not re-converge after load restoration\n");
  }
  summary["convergence"] = convergence;

  json lyapunov;
  if (kind == ScenarioKind::Ideal) {
    const LyapunovReport report = monitor_lyapunov(trace);
    lyapunov = {{"verdict", report.passed ? "pass" : "violation"},
                {"message", report.message},
                {"max_storage_increase", report.max_storage_increase},
                {"max_leaf_supplied", report.max_leaf_supplied}};
    text += fmt::format("lyapunov monitor: {} ({})\n", report.passed ? "pass" : "VIOLATION", report.message);
    if (!report.passed) result.exit_code = kExitMonitorViolation;
  } else {
    lyapunov = {{"verdict", "not-applicable"}};
    text += "lyapunov monitor: not applicable to disturbed scenarios\n";
  }
  summary["lyapunov"] = lyapunov;

  const std::string json_path = summary_path(csv_path);
  {
    std::ofstream out(json_path);
    if (!out) throw std::ios_base::failure("cannot open '" + json_path + "' for writing");
    out << summary.dump(2) << "\n";
  }
  result.artifacts.push_back(json_path);
  text += fmt::format("wrote {} and {}\n", csv_path, json_path);
  result.text = std::move(text);
  return result;
}

SingleRun guarded(const RunConfig& config, const RunOverrides& overrides, ScenarioKind kind,
                  const std::string& csv_path) {
  auto failure = [&](int code, const std::string& what) {
    SingleRun r;
    r.exit_code = code;
    r.text = fmt::format("scenario {}: error: {}\n", to_string(kind), what);
    return r;
  };
  try {
    return run_one(config, overrides, kind, csv_path);
  } catch (const NumericalBlowup& e) {
    return failure(kExitNumericalFailure, e.what());
  } catch (const std::exception& e) {
    return failure(kExitConfigError, e.what());
  }
}

}  // namespace

RunOutcome run_command(const RunConfig& config, const RunOverrides& overrides) {
  std::vector<ScenarioKind> kinds = overrides.scenarios;
  if (kinds.empty()) kinds.push_back(config.scenario.kind);
  const std::string base = overrides.out.value_or(config.output);
  const bool several = kinds.size() > 1;

  std::vector<SingleRun> runs(kinds.size());
  const std::size_t jobs = static_cast<std::size_t>(std::max(1, overrides.jobs));
  for (std::size_t first = 0; first < kinds.size(); first += jobs) {
    std::vector<std::future<SingleRun>> batch;
    const std::size_t last = std::min(kinds.size(), first + jobs);
    for (std::size_t i = first; i < last; ++i) {
      const std::string path = output_path(base, kinds[i], several);
      batch.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred, guarded,
                                 std::cref(config), std::cref(overrides), kinds[i], path));
    }
    for (std::size_t i = first; i < last; ++i) runs[i] = batch[i - first].get();
  }

  RunOutcome outcome;
  for (const SingleRun& r : runs) {
    outcome.exit_code = std::max(outcome.exit_code, r.exit_code);
    outcome.artifacts.insert(outcome.artifacts.end(), r.artifacts.begin(), r.artifacts.end());
    outcome.summary += r.text;
  }
  return outcome;
}

std::string steady_state_table(const RunConfig& config) {
  const NetworkSpec spec = build_network_spec(config);
  const AssembledNetwork network = assemble_network(spec, build_leaf_models(config));
  return steady_state_text(config, network) +
         fmt::format("load voltage {:.4f} V, load current {:.4f} A, load {:.4f} ohm\n",
                     network.allocation.load_voltage, network.allocation.load_current, spec.physical_load);
}

}  // namespace pbcnet::cli
