#pragma once

// General averaged converter model
//
//   A x' = {J(s) - R} x + g(s) u,   J(s) = J0 + sum_k s_k Jk,   g(s) = g0 + sum_k s_k gk
//
// together with its error-coordinate form around a steady state (x_d, s_d):
//
//   A x~' = {J(s) - R} x~ + g~(s) u~,   g~(s) = [J(s) - R_sup | g(s)],   u~ = [x_d; u]
//
// R_sup is the dissipation used when the operating point was solved. For a
// single converter it equals R; for a composed network it is the stacked
// per-leaf (virtual load) dissipation while R is the coupled network matrix.

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace pbcnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Topology { Boost, Buck, BuckBoost };

std::string to_string(Topology topology);
std::optional<Topology> topology_from_string(const std::string& name);

struct ConverterModel {
  Matrix inertia;                              // A, symmetric positive definite
  Matrix interconnection_const;                // J0, skew-symmetric
  std::vector<Matrix> interconnection_duty;    // Jk, skew-symmetric
  Matrix dissipation;                          // R, symmetric PSD
  Matrix input_map_const;                      // g0
  std::vector<Matrix> input_map_duty;          // gk
  Vector source;                               // u
  Vector output_voltage_selector;              // p, output voltage = p'x
  double virtual_load = 0.0;                   // ohms
  std::optional<Topology> topology;            // set for the built-in converters

  int state_dim() const { return static_cast<int>(inertia.rows()); }
  int input_dim() const { return static_cast<int>(source.size()); }
  int duty_dim() const { return static_cast<int>(interconnection_duty.size()); }

  Matrix interconnection(const Vector& duty) const;
  Matrix input_map(const Vector& duty) const;
};

struct OperatingPoint {
  Vector x_desired;
  Vector duty_desired;
  double residual_norm = 0.0;
};

enum class ModelViolation {
  ShapeMismatch,
  InertiaNotSymmetric,
  InertiaNotPositiveDefinite,
  InterconnectionNotSkew,
  DissipationNotSymmetric,
  DissipationNotPsd,
  DissipationNotLoadOnly,
};

struct ValidationIssue {
  ModelViolation kind;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool ok() const { return issues.empty(); }
  bool has(ModelViolation kind) const;
};

/// Checks the structural properties the stability argument relies on.
ValidationReport validate_model(const ConverterModel& model);

/// {J(s) - R} x + g(s) u. Throws DomainError when s leaves [0,1]^l.
Vector null_residual(const ConverterModel& model, const Vector& x, const Vector& duty);

/// Steady state whose output voltage p'x equals `target_output_voltage`.
///
/// Boost, buck and buck-boost models use closed forms; other models are
/// solved by Newton iteration on the null dynamics seeded at s = 0.5.
/// Throws InfeasibleTarget when the target is out of reach or the duty
/// ratios leave [0,1].
OperatingPoint solve_steady_state(const ConverterModel& model, double target_output_voltage);

/// Newton path only, regardless of topology. Exposed so the closed forms can
/// be cross-checked.
OperatingPoint solve_steady_state_newton(const ConverterModel& model,
                                         double target_output_voltage);

inline constexpr double kResidualTolerance = 1e-9;

/// Split of dH/dt into internal dissipation and power supplied from outside.
struct PowerSplit {
  double dissipation = 0.0;  // -x~' R x~, never positive
  double supplied = 0.0;     // x~' g~(s) u~

  double total() const { return dissipation + supplied; }
};

class ErrorModel {
 public:
  ErrorModel(ConverterModel base, OperatingPoint operating_point);
  ErrorModel(ConverterModel base, OperatingPoint operating_point, Matrix supply_dissipation);

  const ConverterModel& base() const { return base_; }
  const OperatingPoint& operating_point() const { return op_; }
  const Matrix& supply_dissipation() const { return supply_dissipation_; }

  Vector error(const Vector& x) const { return x - op_.x_desired; }

  /// g~(s) = [J(s) - R_sup | g(s)], n x (n+m).
  Matrix supply_map(const Vector& duty) const;
  /// u~ = [x_d; u].
  Vector supply_input() const;

  /// {J(s) - R} x~ + g~(s) u~, the right-hand side of A x~'.
  Vector error_dynamics(const Vector& x, const Vector& duty) const;

  /// x~' g~(s) u~ without the [0,1] check, for unclamped control laws.
  double supplied_power_unchecked(const Vector& x, const Vector& duty) const;

 private:
  ConverterModel base_;
  OperatingPoint op_;
  Matrix supply_dissipation_;
  Vector drive_at_desired_;  // g~(s_d) u~, the null residual at the operating point
  Matrix drive_per_duty_;    // column k: J_k x_d + g_k u
};

/// H = 1/2 x~' A x~.
double storage(const ErrorModel& model, const Vector& x);

/// (-x~' R x~, x~' g~(s) u~). Throws DomainError when s leaves [0,1]^l.
PowerSplit storage_rate_decomposition(const ErrorModel& model, const Vector& x,
                                      const Vector& duty);

/// Throws DomainError unless every entry of `duty` lies in [0,1].
void check_duty_range(const Vector& duty);

}  // namespace pbcnet
