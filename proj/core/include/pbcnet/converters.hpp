#pragma once

// Averaged models of the ideal boost, buck and buck-boost converters.
// State ordering is (inductor current i, capacitor voltage v) for all three;
// the single duty ratio mu drives the switch and the output port is v.

#include "pbcnet/model.hpp"

namespace pbcnet {

struct ConverterParams {
  Topology topology = Topology::Boost;
  double inductance = 0.0;      // H
  double capacitance = 0.0;     // F
  double source_voltage = 0.0;  // V
  double virtual_load = 0.0;    // ohm
};

/// Throws DomainError unless L, C, E and R are all positive.
void check_params(const ConverterParams& params);

/// diag(L, C) [i; v]' = [0, -(1-mu); 1-mu, -1/R] [i; v] + [1; 0] E
ConverterModel make_boost(const ConverterParams& params);
/// diag(L, C) [i; v]' = [0, -1; 1, -1/R] [i; v] + [mu; 0] E
ConverterModel make_buck(const ConverterParams& params);
/// diag(L, C) [i; v]' = [0, -(1-mu); 1-mu, -1/R] [i; v] + [mu; 0] E
ConverterModel make_buckboost(const ConverterParams& params);

/// Dispatches on params.topology.
ConverterModel make_converter(const ConverterParams& params);

/// Copy of a load-only model with its dissipation rebuilt for a new load.
ConverterModel with_virtual_load(ConverterModel model, double virtual_load);

}  // namespace pbcnet
