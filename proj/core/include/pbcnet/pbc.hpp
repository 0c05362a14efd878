#pragma once

// Passivity-based duty-ratio laws for the built-in converters.
//
// Each law has the form  mu = clamp(mu_d - k * c(x), 0, 1)  where c is the
// law bracket. The supplied power of the error model factors as
// (mu - mu_d) * w(x) with the supply bracket w; for boost and buck-boost
// w = c, for the buck w = E * c. Substituting the unclamped law therefore
// gives  x~' g~ u~ = -k * c(x) * w(x) <= 0.

#include "pbcnet/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pbcnet {

/// Aggregate so tests can build deliberately broken laws (k <= 0);
/// make_controller enforces k > 0.
struct PbcController {
  Topology topology = Topology::Boost;
  double gain = 0.0;
  OperatingPoint operating_point;
  double source_voltage = 0.0;  // nominal E, used by the buck-boost law

  double law_bracket(const Vector& x) const;
  double supply_bracket(const Vector& x) const;
  double raw_duty(const Vector& x) const;
  /// Hard-limited to [0,1].
  double duty(const Vector& x) const;
};

PbcController make_controller(const ConverterModel& model, const OperatingPoint& op, double gain);

/// mu = clamp(mu_d - k (i v_d - i_d v), 0, 1)
double duty_boost(const Vector& x, const OperatingPoint& op, double k);
/// mu = clamp(mu_d - k (i - i_d), 0, 1)
double duty_buck(const Vector& x, const OperatingPoint& op, double k);
/// mu = clamp(mu_d - k {i (v_d + E) - i_d (v + E)}, 0, 1)
double duty_buckboost(const Vector& x, const OperatingPoint& op, double k, double source_voltage);

enum class Limiter { Clamped, Unclamped };

/// x~' g~(mu) u~ with mu taken from the controller's law.
double supplied_power_under_law(const ErrorModel& model, const PbcController& controller,
                                const Vector& x, Limiter limiter = Limiter::Clamped);

struct StateBox {
  Vector lower;
  Vector upper;
};

enum class LawVerdict { Pass, Violation, NoInjectedDamping };

struct LawReport {
  LawVerdict verdict = LawVerdict::Pass;
  std::size_t samples = 0;
  double worst_supplied = 0.0;          // largest supplied power seen
  Vector worst_state;
  std::vector<Vector> offending_states;  // at most kMaxOffending
  bool boundary_operating_point = false;  // mu_d in {0,1}: strict decrease not asserted
  std::string message;

  static constexpr std::size_t kMaxOffending = 16;

  bool passed() const { return verdict == LawVerdict::Pass; }
};

/// Samples states uniformly in `box` and checks that the law never supplies
/// power and that dH/dt < 0 off the law's null set.
LawReport validate_pbc_law(const ErrorModel& model, const PbcController& controller,
                           std::size_t sample_count, const StateBox& box,
                           std::uint64_t seed = 0x5eed);

}  // namespace pbcnet
