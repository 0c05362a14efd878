#pragma once

#include "pbcnet/sim.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace pbcnet::cli {

/// t, then i_<id>, v_<id>, mu_<id>, psup_<id> per converter in declaration
/// order, then H_total, dHdt, E_<id> per converter, R_load_eff.
std::vector<std::string> trace_columns(const std::vector<std::string>& ids);

void write_trace_csv(std::ostream& out, const Trace& trace, const std::vector<std::string>& ids);

}  // namespace pbcnet::cli
