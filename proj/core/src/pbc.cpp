#include "pbcnet/pbc.hpp"

#include "pbcnet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace pbcnet {

namespace {

double clamp_unit(double mu) { return std::clamp(mu, 0.0, 1.0); }

double boost_bracket(const Vector& x, const OperatingPoint& op) {
  return x(0) * op.x_desired(1) - op.x_desired(0) * x(1);
}

double buck_bracket(const Vector& x, const OperatingPoint& op) { return x(0) - op.x_desired(0); }

double buckboost_bracket(const Vector& x, const OperatingPoint& op, double e) {
  return x(0) * (op.x_desired(1) + e) - op.x_desired(0) * (x(1) + e);
}

// Uniform in [0,1) from the top 53 bits; identical on every platform.
double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

double duty_boost(const Vector& x, const OperatingPoint& op, double k) {
  return clamp_unit(op.duty_desired(0) - k * boost_bracket(x, op));
}

double duty_buck(const Vector& x, const OperatingPoint& op, double k) {
  return clamp_unit(op.duty_desired(0) - k * buck_bracket(x, op));
}

double duty_buckboost(const Vector& x, const OperatingPoint& op, double k, double source_voltage) {
  return clamp_unit(op.duty_desired(0) - k * buckboost_bracket(x, op, source_voltage));
}

double PbcController::law_bracket(const Vector& x) const {
  switch (topology) {
    case Topology::Boost:
      return boost_bracket(x, operating_point);
    case Topology::Buck:
      return buck_bracket(x, operating_point);
    case Topology::BuckBoost:
      return buckboost_bracket(x, operating_point, source_voltage);
  }
  return 0.0;
}

double PbcController::supply_bracket(const Vector& x) const {
  const double c = law_bracket(x);
  return topology == Topology::Buck ? source_voltage * c : c;
}

double PbcController::raw_duty(const Vector& x) const {
  return operating_point.duty_desired(0) - gain * law_bracket(x);
}

double PbcController::duty(const Vector& x) const { return clamp_unit(raw_duty(x)); }

PbcController make_controller(const ConverterModel& model, const OperatingPoint& op, double gain) {
  if (!model.topology) throw DomainError("make_controller: model has no built-in topology");
  if (!(gain > 0.0)) throw DomainError("make_controller: gain must be positive");
  if (op.x_desired.size() != 2 || op.duty_desired.size() != 1) {
    throw DomainError("make_controller: operating point is not a single-switch second-order point");
  }
  return PbcController{*model.topology, gain, op, model.source(0)};
}

double supplied_power_under_law(const ErrorModel& model, const PbcController& controller,
                                const Vector& x, Limiter limiter) {
  const double mu = limiter == Limiter::Clamped ? controller.duty(x) : controller.raw_duty(x);
  return model.supplied_power_unchecked(x, Vector::Constant(1, mu));
}

LawReport validate_pbc_law(const ErrorModel& model, const PbcController& controller,
                           std::size_t sample_count, const StateBox& box, std::uint64_t seed) {
  const int n = model.base().state_dim();
  if (box.lower.size() != n || box.upper.size() != n || !box.lower.allFinite() ||
      !box.upper.allFinite()) {
    throw DomainError("validate_pbc_law: state box must be finite and match the state dimension");
  }

  LawReport report;
  report.samples = sample_count;
  report.worst_supplied = -std::numeric_limits<double>::infinity();
  const double mu_d = controller.operating_point.duty_desired(0);
  report.boundary_operating_point = mu_d <= 0.0 || mu_d >= 1.0;

  // Power scale for the round-off allowance on the sign checks.
  const double power_tol = 1e-9;
  std::mt19937_64 rng(seed);
  std::size_t violations = 0;
  bool any_nonzero_supply = false;
  bool any_error = false;

  for (std::size_t k = 0; k < sample_count; ++k) {
    Vector x(n);
    for (int j = 0; j < n; ++j) {
      x(j) = box.lower(j) + (box.upper(j) - box.lower(j)) * unit_uniform(rng);
    }
    const Vector duty = Vector::Constant(1, controller.duty(x));
    const PowerSplit split = storage_rate_decomposition(model, x, duty);
    const bool off_null_set = std::abs(controller.law_bracket(x)) > 1e-9;
    any_error = any_error || model.error(x).norm() > 0.0;
    any_nonzero_supply = any_nonzero_supply || std::abs(split.supplied) > power_tol;

    if (split.supplied > report.worst_supplied) {
      report.worst_supplied = split.supplied;
      report.worst_state = x;
    }
    const bool positive_supply = split.supplied > power_tol;
    const bool not_decreasing = off_null_set && !report.boundary_operating_point &&
                                controller.gain > 0.0 && !(split.total() < 0.0);
    if (positive_supply || not_decreasing) {
      ++violations;
      if (report.offending_states.size() < LawReport::kMaxOffending) {
        report.offending_states.push_back(x);
      }
    }
  }

  std::ostringstream os;
  if (violations > 0) {
    report.verdict = LawVerdict::Violation;
    os << violations << " of " << sample_count << " samples violate the passivity condition; "
       << "worst supplied power " << report.worst_supplied << " W";
  } else if (any_error && !any_nonzero_supply) {
    report.verdict = LawVerdict::NoInjectedDamping;
    os << "no injected damping: supplied power is identically zero";
  } else {
    os << "pass over " << sample_count << " samples";
    if (report.boundary_operating_point) os << " (mu_d on the limiter boundary)";
  }
  report.message = os.str();
  return report;
}

}  // namespace pbcnet
