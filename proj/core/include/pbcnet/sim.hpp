#pragma once

// Sampled-data closed loop of a composed network under PBC.
//
// Controllers sample the state every controller period and the duty ratios
// are held (zero-order hold) while the averaged error dynamics
//
//   A_n x~' = {J_n(s) - R_n} x~ + g~_n(s) u~_n
//
// are advanced with fixed-step classical Runge-Kutta.

#include "pbcnet/model.hpp"
#include "pbcnet/network.hpp"
#include "pbcnet/pbc.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace pbcnet {

struct IdealScenario {};

/// Uniform source noise in [E - pp/2, E + pp/2], redrawn every hold period.
struct InputPerturbation {
  double peak_to_peak = 10.0;  // V
  std::uint64_t seed = 1;
  double hold_period = 1e-6;   // s
};

/// Physical load multiplied by `factor` on [t_start, t_end).
struct LoadFluctuation {
  double factor = 0.7;
  double t_start = 20e-3;
  double t_end = 25e-3;
};

using Disturbance = std::variant<IdealScenario, InputPerturbation, LoadFluctuation>;

struct Scenario {
  Disturbance disturbance = IdealScenario{};
  double dt = 1e-6;
  double t_end = 20e-3;
  double controller_period = 1e-6;
  std::vector<Vector> initial_state;  // per leaf; empty starts at the desired state

  /// Throws DomainError on invalid timing or disturbance parameters.
  void validate() const;
  int steps_per_period() const;
  /// Number of controller periods in [0, t_end]; the trace has one more row.
  std::size_t period_count() const;
};

struct LeafSample {
  double current = 0.0;  // x(0)
  double voltage = 0.0;  // p'x
  double duty = 0.0;
  double supplied = 0.0;  // x~_m' g~_m(s_m) u~_m, W
};

struct TraceRecord {
  double t = 0.0;
  std::vector<LeafSample> leaves;
  double storage = 0.0;       // H, J
  double storage_rate = 0.0;  // analytic dH/dt at the sample, W
  std::vector<double> effective_sources;
  double effective_load = 0.0;
};

using Trace = std::vector<TraceRecord>;

/// Averaged plant of a composed network around a fixed desired state.
class ClosedLoopPlant {
 public:
  ClosedLoopPlant(ComposedModel composed, OperatingPoint desired);

  const ComposedModel& composed() const { return composed_; }
  const OperatingPoint& desired() const { return desired_; }

  /// x' for held duties and the given stacked source vector.
  Vector derivative(const Vector& x, const Vector& duty, const Vector& source) const;
  /// One RK4 step with duties and sources held. Throws NumericalBlowup.
  Vector step(const Vector& x, const Vector& duty, const Vector& source, double dt,
              double time = 0.0) const;

  double storage(const Vector& x) const;
  PowerSplit power(const Vector& x, const Vector& duty, const Vector& source) const;
  std::vector<double> leaf_supplied(const Vector& x, const Vector& duty, const Vector& source) const;

 private:
  struct HeldStep {
    Matrix drift;  // A^-1 (J(s) - R_n)
    Vector bias;   // A^-1 ((J(s) - R') x_d + g(s) u)
  };
  HeldStep hold(const Vector& duty, const Vector& source) const;

  ComposedModel composed_;
  OperatingPoint desired_;
  Matrix inertia_inverse_;
};

/// One RK4 step of the composed plant with duties held, desired state taken
/// from the controllers.
Vector step(const ComposedModel& composed, std::span<const PbcController> controllers,
            const Vector& x, const Vector& held_duties, double dt);

std::vector<PbcController> make_controllers(const AssembledNetwork& network,
                                            std::span<const double> gains);

/// Simulates `scenario`. Leaf models are raw (virtual loads are applied
/// here); controllers are one per leaf in declaration order.
Trace run(const NetworkSpec& spec, std::span<const ConverterModel> leaves,
          const Scenario& scenario, std::span<const PbcController> controllers);

struct LyapunovViolation {
  enum class Kind { StorageIncrease, TotalSupplyPositive, LeafSupplyPositive };
  Kind kind;
  double t;
  std::optional<std::size_t> leaf;
  double value;
  std::vector<LeafSample> state;
};

struct LyapunovReport {
  bool passed = true;
  std::size_t samples = 0;
  double max_storage_increase = 0.0;  // relative to H(0)
  double max_leaf_supplied = 0.0;
  std::optional<LyapunovViolation> first_violation;
  std::string message;
};

inline constexpr double kStorageIncreaseTolerance = 1e-6;  // fraction of H(0) per sample
inline constexpr double kSupplyTolerance = 1e-9;           // W

/// Stepwise non-increase of H, and non-positive total and per-leaf supplied
/// power at every sample.
LyapunovReport monitor_lyapunov(const Trace& trace);

/// max over leaves of |i - i_d| / |i_d| and |v - v_d| / |v_d|.
double max_relative_error(const TraceRecord& record, std::span<const OperatingPoint> points);

struct ErrorBand {
  double current = 0.0;  // max relative current error
  double voltage = 0.0;  // max relative voltage error
  double duty = 0.0;     // max |mu - mu_d|
};

ErrorBand error_band(const Trace& trace, std::span<const OperatingPoint> points, double t_from);

/// Earliest sample time >= t_from after which every later sample stays
/// below `tolerance` relative error; nullopt if the trace never settles.
std::optional<double> settling_time(const Trace& trace, std::span<const OperatingPoint> points,
                                    double tolerance, double t_from = 0.0);

}  // namespace pbcnet
