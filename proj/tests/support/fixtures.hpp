#pragma once
// Shared test inputs: the three-converter reference network and a generator
// of random feasible series-parallel trees.

#include "pbcnet/converters.hpp"
#include "pbcnet/network.hpp"
#include "pbcnet/pbc.hpp"
#include "pbcnet/sim.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace pbcnet::testing {

// Reference converter parameters
ConverterParams boost_params();
ConverterParams buck_params();
ConverterParams buckboost_params();

struct Fig8 {
  NetworkSpec spec;
  std::vector<ConverterModel> leaves;  // raw, virtual loads not yet applied
  std::vector<double> gains;
  std::vector<Vector> initial_state;   // start-up state
  AssembledNetwork network;
  std::vector<PbcController> controllers;
};

Fig8 fig8();

Scenario fig8_ideal(const Fig8& f, double t_end = 20e-3);

/// Small deterministic generator; uniform doubles use the top 53 bits.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(engine_() >> 11) * 0x1p-53);
  }
  int integer(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  Vector vector(Eigen::Index n, double lo, double hi) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform(lo, hi);
    return v;
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

struct RandomNetwork {
  NetworkSpec spec;
  std::vector<ConverterModel> leaves;
  std::vector<Topology> topologies;
  std::vector<double> gains;
  std::vector<Vector> initial_state;
  AssembledNetwork network;
  std::vector<PbcController> controllers;
};

/// 1..max_leaves converters with feasible targets, random L, C, E and gains,
/// initial states within +-30 % of the desired state.
RandomNetwork random_network(Rng& rng, int max_leaves = 6);

/// Node-by-node scalar evaluation of the output-error dissipation:
/// (v~, R) per subtree, series (sum v~, sum R), parallel current-sum form.
struct ScalarNode {
  double voltage_error = 0.0;
  double resistance = 0.0;
  double dissipation() const { return voltage_error * voltage_error / resistance; }
};
ScalarNode scalar_dissipation(const NetworkNode& node, const ComposedModel& composed,
                              const Vector& x_error);

}  // namespace pbcnet::testing
