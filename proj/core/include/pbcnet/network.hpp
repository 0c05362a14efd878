#pragma once

// Output series-parallel composition of converters sharing one physical load.
//
// Each subtree is summarised by an output-voltage selector p and a
// resistance R such that the subtree's output voltage error is p'x~:
//
//   Leaf      (p_m, R_m)
//   Series    (sum p_c, sum R_c)
//   Parallel  (R_par * sum p_c / R_c, R_par = 1 / sum 1/R_c)
//
// The network dissipation is R_n = p p' / R_load, which reproduces
// (v~_1 + v~_2)^2 / (R_1 + R_2) for a series pair and
// R_1 R_2 / (R_1 + R_2) (i~_1 + i~_2)^2 with i~_m = v~_m / R_m for a
// parallel pair. Inertia, interconnection and input maps stack
// block-diagonally, so the composed network is again a ConverterModel.

#include "pbcnet/model.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pbcnet {

struct NetworkNode {
  enum class Kind { Leaf, Series, Parallel };

  Kind kind = Kind::Leaf;
  std::size_t leaf = 0;              // Leaf only
  std::vector<NetworkNode> children;  // Series / Parallel
  std::vector<double> split;          // Parallel only: branch current fractions

  static NetworkNode make_leaf(std::size_t index);
  static NetworkNode series(std::vector<NetworkNode> children);
  static NetworkNode parallel(std::vector<NetworkNode> children, std::vector<double> split);

  bool operator==(const NetworkNode&) const = default;
};

struct NetworkSpec {
  NetworkNode root;
  double physical_load = 0.0;            // ohm
  std::vector<double> voltage_targets;   // per leaf, volts
  std::vector<std::string> leaf_names;   // optional, for diagnostics

  std::size_t leaf_count() const { return voltage_targets.size(); }
  std::string leaf_name(std::size_t leaf) const;
};

/// Structural checks: every leaf referenced exactly once, no empty internal
/// node, split fractions positive and summing to 1. Throws ConsistencyError.
void validate_spec(const NetworkSpec& spec);

struct LoadAllocation {
  std::vector<double> leaf_loads;     // R_m, ohm
  std::vector<double> leaf_currents;  // branch current through leaf m's load share, A
  double load_voltage = 0.0;
  double load_current = 0.0;
};

/// Virtual loads R_m = v_m / i_m that recombine into the physical load.
/// Throws ConsistencyError when parallel siblings disagree on voltage.
LoadAllocation allocate_virtual_loads(const NetworkSpec& spec);

/// Leaf models with dissipation rebuilt for the allocated virtual loads.
std::vector<ConverterModel> apply_virtual_loads(std::span<const ConverterModel> leaves,
                                                const LoadAllocation& allocation);

struct LeafBlock {
  Eigen::Index state_offset = 0;
  Eigen::Index state_dim = 0;
  Eigen::Index duty_offset = 0;
  Eigen::Index duty_dim = 0;
  Eigen::Index input_offset = 0;
  Eigen::Index input_dim = 0;
};

struct ComposedModel {
  ConverterModel stacked;        // dissipation R_n, selector p_total, virtual_load = R_load
  Matrix leaf_dissipation;       // R' = blockdiag(R_m)
  std::vector<LeafBlock> blocks;
  std::vector<Vector> leaf_selectors;  // p_m in leaf coordinates
  std::vector<double> leaf_loads;      // R_m
  double physical_load = 0.0;
  double recombined_load = 0.0;  // tree recombination of the leaf loads

  std::size_t leaf_count() const { return blocks.size(); }
};

/// Throws ConsistencyError if the leaf loads do not recombine into the
/// physical load within 1e-9 relative, DomainError for invalid leaf models.
ComposedModel compose(const NetworkSpec& spec, std::span<const ConverterModel> leaves);

/// Stacks per-leaf operating points in block order.
OperatingPoint stack_operating_points(std::span<const OperatingPoint> points);

/// Error model of the composed network; g~ uses the per-leaf dissipation R'.
ErrorModel composed_error_model(const ComposedModel& composed,
                                std::span<const OperatingPoint> points);

/// Block-diagonal g~_n(s) = diag(g~_1(s_1), ..., g~_N(s_N)).
Matrix block_supply_map(const ComposedModel& composed, const Vector& duty);
/// Stacked u~_n = [x_d1; u_1; ...; x_dN; u_N].
Vector block_supply_input(const ComposedModel& composed, std::span<const OperatingPoint> points);

struct InteractionTerm {
  Vector b;                              // (R' - R_n) x~
  std::vector<LeafBlock> blocks;
  std::vector<double> leaf_loads;
  std::vector<double> output_errors;     // v~_m

  Vector leaf_slice(std::size_t leaf) const;
  /// x~_m' b_m, the power leaf m receives through the output interaction.
  double leaf_power(std::size_t leaf, const Vector& x_error) const;
  /// w_m from x~_m' b_m = v~_m w_m / R_m; positive w_m opposes v~_m at the load.
  std::optional<double> series_voltage_interaction(std::size_t leaf, const Vector& x_error) const;
  /// j_m from x~_m' b_m = R_m i~_m j_m with i~_m = v~_m / R_m.
  std::optional<double> parallel_current_interaction(std::size_t leaf, const Vector& x_error) const;
};

InteractionTerm interaction(const ComposedModel& composed, const Vector& x_error);
InteractionTerm interaction(const ComposedModel& composed, const Matrix& leaf_dissipation,
                            const Vector& x_error);

/// Per-leaf steady states for the allocated virtual loads. The composed null
/// residual is checked against kResidualTolerance. Throws InfeasibleTarget
/// naming the leaf.
std::vector<OperatingPoint> solve_network_steady_state(const NetworkSpec& spec,
                                                       std::span<const ConverterModel> leaves);

/// Everything a simulation needs, assembled from a spec and raw leaf models.
struct AssembledNetwork {
  LoadAllocation allocation;
  std::vector<ConverterModel> leaves;  // with virtual loads applied
  ComposedModel composed;
  std::vector<OperatingPoint> operating_points;
};

AssembledNetwork assemble_network(const NetworkSpec& spec, std::span<const ConverterModel> leaves);

}  // namespace pbcnet
