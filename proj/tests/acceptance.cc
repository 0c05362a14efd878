// Acceptance gate: one PASS/FAIL line per primary criterion, exit status 1
// if any criterion fails.

#include "pbcnet/converters.hpp"
#include "pbcnet/network.hpp"
#include "pbcnet/pbc.hpp"
#include "pbcnet/sim.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "support/fixtures.hpp"

using namespace pbcnet;
using testing::Fig8;
using testing::Rng;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double rel(double value, double expected) { return std::abs(value - expected) / std::abs(expected); }

Verdict steady_state() {
  const auto start = std::chrono::steady_clock::now();
  const Fig8 f = testing::fig8();
  const std::vector<OperatingPoint> ops = solve_network_steady_state(f.spec, f.leaves);
  const double elapsed = seconds_since(start);
  const double expected[3][3] = {{1.950, 36.0, 0.5}, {2.025, 20.0, 0.5}, {3.375, 16.0, 0.4}};
  double worst = 0.0;
  for (std::size_t m = 0; m < 3; ++m) {
    worst = std::max({worst, rel(ops[m].x_desired(0), expected[m][0]), rel(ops[m].x_desired(1), expected[m][1]),
                      rel(ops[m].duty_desired(0), expected[m][2])});
  }
  return {worst < 1e-6 && elapsed < 1.0,
          fmt::format("max rel err {:.2e} (tol 1e-6), {:.3f} s (limit 1 s)", worst, elapsed)};
}

Verdict ideal_convergence() {
  const Fig8 f = testing::fig8();
  const auto start = std::chrono::steady_clock::now();
  const Trace trace = run(f.spec, f.leaves, testing::fig8_ideal(f, 20e-3), f.controllers);
  const double elapsed = seconds_since(start);
  const double err = max_relative_error(trace.back(), f.network.operating_points);
  return {err < 5e-3 && elapsed < 10.0,
          fmt::format("rel err at 20 ms {:.2e} (tol 5e-3), {:.3f} s (limit 10 s)", err, elapsed)};
}

Verdict lyapunov() {
  const Fig8 f = testing::fig8();
  const LyapunovReport fig = monitor_lyapunov(run(f.spec, f.leaves, testing::fig8_ideal(f), f.controllers));
  bool pass = fig.passed;
  std::string first_failure;
  double worst_increase = fig.max_storage_increase;
  double worst_supply = fig.max_leaf_supplied;
  Rng rng(20240);
  int leaves = 0;
  for (int tree = 0; tree < 20; ++tree) {
    const testing::RandomNetwork r = testing::random_network(rng);
    Scenario s;
    s.t_end = 20e-3;
    s.initial_state = r.initial_state;
    const LyapunovReport report = monitor_lyapunov(run(r.spec, r.leaves, s, r.controllers));
    leaves += static_cast<int>(r.leaves.size());
    worst_increase = std::max(worst_increase, report.max_storage_increase);
    worst_supply = std::max(worst_supply, report.max_leaf_supplied);
    if (!report.passed && first_failure.empty()) first_failure = fmt::format("; tree {}: {}", tree, report.message);
    pass = pass && report.passed;
  }
  return {pass, fmt::format("fig8 + 20 random trees ({} converters): max dH {:.2e}*H(0) (tol 1e-6), "
                            "max leaf supply {:.2e} W (tol 1e-9){}",
                            leaves, worst_increase, worst_supply, first_failure)};
}

Verdict composition() {
  Rng rng(777);
  double worst = 0.0;
  bool shrinks = true;
  for (int tree = 0; tree < 50; ++tree) {
    const testing::RandomNetwork r = testing::random_network(rng);
    const ComposedModel& c = r.network.composed;
    for (int k = 0; k < 1000; ++k) {
      const Vector x = rng.vector(c.stacked.state_dim(), -10.0, 10.0);
      const double matrix = x.dot(c.stacked.dissipation * x);
      const double scalar = testing::scalar_dissipation(r.spec.root, c, x).dissipation();
      const double scale = x.cwiseAbs().dot(c.stacked.dissipation.cwiseAbs() * x.cwiseAbs());
      worst = std::max(worst, std::abs(matrix - scalar) / scale);
      shrinks = shrinks && matrix <= x.dot(c.leaf_dissipation * x);
    }
  }
  return {worst < 1e-12 && shrinks,
          fmt::format("50 trees x 1000 states: max rel diff {:.2e} (tol 1e-12), shrinkage {}", worst,
                      shrinks ? "holds" : "VIOLATED")};
}

Verdict energy_identity() {
  const Fig8 f = testing::fig8();
  const OperatingPoint desired = stack_operating_points(f.network.operating_points);
  const ClosedLoopPlant plant(f.network.composed, desired);
  const Vector& source = f.network.composed.stacked.source;
  const double dt = 1e-6;

  Vector x(6);
  for (std::size_t m = 0; m < 3; ++m) x.segment(static_cast<Eigen::Index>(2 * m), 2) = f.initial_state[m];
  double worst = 0.0;
  std::size_t checked = 0;
  for (int k = 0; k < 20000; ++k) {
    Vector duty(3);
    for (std::size_t m = 0; m < 3; ++m) duty(static_cast<Eigen::Index>(m)) = f.controllers[m].duty(x.segment(static_cast<Eigen::Index>(2 * m), 2));
    const Vector half = plant.step(x, duty, source, dt / 2);
    const Vector next = plant.step(x, duty, source, dt);
    const double h0 = plant.storage(x);
    if (h0 > 1e-9) {
      const double fd = (plant.storage(next) - h0) / dt;
      const double analytic = (plant.power(x, duty, source).total() + 4.0 * plant.power(half, duty, source).total() +
                               plant.power(next, duty, source).total()) / 6.0;
      worst = std::max(worst, std::abs(fd - analytic) / std::abs(analytic));
      ++checked;
    }
    x = next;
  }

  Scenario coarse = testing::fig8_ideal(f);
  Scenario fine = coarse;
  fine.dt = coarse.dt / 2;
  const Trace a = run(f.spec, f.leaves, coarse, f.controllers);
  const Trace b = run(f.spec, f.leaves, fine, f.controllers);
  double halving = 0.0;
  for (std::size_t m = 0; m < 3; ++m) {
    halving = std::max({halving, rel(b.back().leaves[m].current, a.back().leaves[m].current),
                        rel(b.back().leaves[m].voltage, a.back().leaves[m].voltage)});
  }
  return {checked > 0 && worst < 1e-3 && halving < 1e-8,
          fmt::format("{} steps with H > 1e-9 J: max rel diff {:.2e} (tol 1e-3); dt-halving final-state change "
                      "{:.2e} (tol 1e-8)",
                      checked, worst, halving)};
}

Verdict perturbation() {
  const Fig8 f = testing::fig8();
  const auto start = std::chrono::steady_clock::now();
  ErrorBand worst;
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    Scenario s = testing::fig8_ideal(f, 30e-3);
    s.disturbance = InputPerturbation{10.0, seed, 1e-6};
    const ErrorBand band = error_band(run(f.spec, f.leaves, s, f.controllers), f.network.operating_points, 10e-3);
    worst.current = std::max(worst.current, band.current);
    worst.voltage = std::max(worst.voltage, band.voltage);
    worst.duty = std::max(worst.duty, band.duty);
  }
  const double elapsed = seconds_since(start);
  return {worst.current < 0.082 && worst.voltage < 0.038 && worst.duty < 0.10 && elapsed < 30.0,
          fmt::format("5 seeds, band from 10 ms: current {:.2f}% (< 8.2%), voltage {:.2f}% (< 3.8%), "
                      "duty {:.3f} (< 0.10), {:.3f} s (limit 30 s)",
                      100 * worst.current, 100 * worst.voltage, worst.duty, elapsed)};
}

Verdict load_dip() {
  const Fig8 f = testing::fig8();
  Scenario s = testing::fig8_ideal(f, 35e-3);
  s.disturbance = LoadFluctuation{0.7, 20e-3, 25e-3};
  const Trace trace = run(f.spec, f.leaves, s, f.controllers);
  const double dip = error_band(trace, f.network.operating_points, 20e-3).voltage;
  const auto settled = settling_time(trace, f.network.operating_points, 5e-3, 25e-3);
  if (!settled) return {false, "never re-converged within 0.5% after restoration"};
  const double recovery = *settled - 25e-3;
  return {recovery < 10e-3,
          fmt::format("70% load on [20, 25) ms, peak voltage deviation {:.2f}%, within 0.5% {:.3f} ms after "
                      "restoration (limit 10 ms)",
                      100 * dip, recovery * 1e3)};
}

Verdict law_identity() {
  Rng rng(4242);
  double worst = 0.0;
  double worst_bracket = 0.0;
  double worst_scaled = 0.0;
  int over = 0;
  int samples = 0;
  const ConverterParams params[] = {testing::boost_params(), testing::buck_params(), testing::buckboost_params()};
  const double targets[] = {36.0, 20.0, 16.0};
  const double gains[] = {0.02, 0.3, 0.02};
  const Fig8 f = testing::fig8();
  for (std::size_t t = 0; t < 3; ++t) {
    ConverterParams p = params[t];
    p.virtual_load = f.network.allocation.leaf_loads[t];
    const ConverterModel m = make_converter(p);
    const OperatingPoint op = solve_steady_state(m, targets[t]);
    const ErrorModel em(m, op);
    const PbcController c = make_controller(m, op, gains[t]);
    for (int k = 0; k < 10000; ++k) {
      Vector x(2);
      x << rng.uniform(0.0, 3.0 * op.x_desired(0)), rng.uniform(0.0, 3.0 * op.x_desired(1));
      const double supplied = supplied_power_under_law(em, c, x, Limiter::Unclamped);
      const double expected = -c.gain * c.law_bracket(x) * c.supply_bracket(x);
      ++samples;
      const double r = rel(supplied, expected);
      if (r > 1e-12) ++over;
      if (r > worst) {
        worst = r;
        worst_bracket = c.law_bracket(x);
      }
      // magnitude of the terms summed in x~' g~ u~
      const Vector duty = Vector::Constant(1, c.raw_duty(x));
      const double scale = em.error(x).cwiseAbs().dot(em.supply_map(duty).cwiseAbs() * em.supply_input().cwiseAbs());
      worst_scaled = std::max(worst_scaled, std::abs(supplied - expected) / scale);
    }
  }
  return {worst < 1e-12,
          fmt::format("3 topologies x 1e4 states: max rel diff {:.2e} (tol 1e-12), {} of {} states over "
                      "tolerance, worst at bracket {:.1e}; diff relative to summed term magnitudes {:.2e}",
                      worst, over, samples, worst_bracket, worst_scaled)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"steady-state reproduction", steady_state},
      {"ideal convergence", ideal_convergence},
      {"lyapunov monotonicity", lyapunov},
      {"composition oracle", composition},
      {"energy identity", energy_identity},
      {"perturbation robustness", perturbation},
      {"load-dip recovery", load_dip},
      {"law identity", law_identity},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    fmt::print("{} {}: {}\n", v.pass ? "PASS" : "FAIL", name, v.detail);
    failed += v.pass ? 0 : 1;
  }
  fmt::print("{}/{} criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
