#include "fixtures.hpp"

#include <numeric>

namespace pbcnet::testing {

ConverterParams boost_params() { return {Topology::Boost, 470e-6, 10e-6, 18.0, 1.0}; }
ConverterParams buck_params() { return {Topology::Buck, 500e-6, 33e-6, 40.0, 1.0}; }
ConverterParams buckboost_params() { return {Topology::BuckBoost, 330e-6, 20e-6, 24.0, 1.0}; }

Fig8 fig8() {
  Fig8 f;
  f.spec.root = NetworkNode::parallel(
      {NetworkNode::make_leaf(0),
       NetworkNode::series({NetworkNode::make_leaf(1), NetworkNode::make_leaf(2)})},
      {0.325, 0.675});
  f.spec.physical_load = 12.0;
  f.spec.voltage_targets = {36.0, 20.0, 16.0};
  f.spec.leaf_names = {"boost", "buck", "buckboost"};
  f.leaves = {make_boost(boost_params()), make_buck(buck_params()),
              make_buckboost(buckboost_params())};
  f.gains = {0.02, 0.3, 0.02};
  f.initial_state = {Vector::Zero(2), Vector::Zero(2), Vector::Zero(2)};
  f.initial_state[0] << 1.4, 10.0;
  f.initial_state[1] << 1.3, 16.0;
  f.initial_state[2] << 2.8, 12.0;
  f.network = assemble_network(f.spec, f.leaves);
  f.controllers = make_controllers(f.network, f.gains);
  return f;
}

Scenario fig8_ideal(const Fig8& f, double t_end) {
  Scenario s;
  s.t_end = t_end;
  s.initial_state = f.initial_state;
  return s;
}

namespace {

struct Builder {
  Rng& rng;
  std::vector<double> targets;

  std::vector<int> partition(int n) {
    const int parts = rng.integer(2, n);
    std::vector<int> sizes(static_cast<std::size_t>(parts), 1);
    for (int extra = n - parts; extra > 0; --extra) ++sizes[static_cast<std::size_t>(rng.integer(0, parts - 1))];
    return sizes;
  }

  NetworkNode build(int n, double voltage, std::size_t& next_leaf) {
    if (n == 1) {
      targets.push_back(voltage);
      return NetworkNode::make_leaf(next_leaf++);
    }
    const std::vector<int> sizes = partition(n);
    std::vector<NetworkNode> children;
    if (rng.uniform(0, 1) < 0.5) {
      std::vector<double> shares;
      for (std::size_t c = 0; c < sizes.size(); ++c) shares.push_back(rng.uniform(0.5, 1.5));
      const double total = std::accumulate(shares.begin(), shares.end(), 0.0);
      for (std::size_t c = 0; c < sizes.size(); ++c)
        children.push_back(build(sizes[c], voltage * shares[c] / total, next_leaf));
      return NetworkNode::series(std::move(children));
    }
    std::vector<double> split;
    for (std::size_t c = 0; c < sizes.size(); ++c) split.push_back(rng.uniform(0.5, 1.5));
    const double total = std::accumulate(split.begin(), split.end(), 0.0);
    for (double& s : split) s /= total;
    for (std::size_t c = 0; c < sizes.size(); ++c) children.push_back(build(sizes[c], voltage, next_leaf));
    return NetworkNode::parallel(std::move(children), std::move(split));
  }
};

}  // namespace

RandomNetwork random_network(Rng& rng, int max_leaves) {
  RandomNetwork r;
  const int n = rng.integer(1, max_leaves);
  Builder builder{rng, {}};
  std::size_t next = 0;
  r.spec.root = builder.build(n, rng.uniform(10.0, 60.0), next);
  r.spec.voltage_targets = builder.targets;
  r.spec.physical_load = rng.uniform(5.0, 50.0);

  for (double v : r.spec.voltage_targets) {
    ConverterParams p;
    p.topology = static_cast<Topology>(rng.integer(0, 2));
    p.inductance = rng.uniform(100e-6, 1e-3);
    p.capacitance = rng.uniform(5e-6, 50e-6);
    p.virtual_load = 1.0;
    double k = 0.0;
    switch (p.topology) {
      case Topology::Boost:
        p.source_voltage = v * rng.uniform(0.3, 0.8);
        k = rng.uniform(0.2, 1.0) / v;
        break;
      case Topology::Buck:
        p.source_voltage = v / rng.uniform(0.3, 0.8);
        k = rng.uniform(0.1, 0.5);
        break;
      case Topology::BuckBoost:
        p.source_voltage = v * rng.uniform(0.5, 2.0);
        k = rng.uniform(0.2, 1.0) / (v + p.source_voltage);
        break;
    }
    r.topologies.push_back(p.topology);
    r.leaves.push_back(make_converter(p));
    r.gains.push_back(k);
  }

  r.network = assemble_network(r.spec, r.leaves);
  r.controllers = make_controllers(r.network, r.gains);
  for (const OperatingPoint& op : r.network.operating_points) {
    Vector x = op.x_desired;
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) *= 1.0 + rng.uniform(-0.3, 0.3);
    r.initial_state.push_back(x);
  }
  return r;
}

ScalarNode scalar_dissipation(const NetworkNode& node, const ComposedModel& composed,
                              const Vector& x_error) {
  switch (node.kind) {
    case NetworkNode::Kind::Leaf: {
      const LeafBlock& b = composed.blocks[node.leaf];
      const Vector xm = x_error.segment(b.state_offset, b.state_dim);
      return {composed.leaf_selectors[node.leaf].dot(xm), composed.leaf_loads[node.leaf]};
    }
    case NetworkNode::Kind::Series: {
      ScalarNode out;
      for (const NetworkNode& c : node.children) {
        const ScalarNode s = scalar_dissipation(c, composed, x_error);
        out.voltage_error += s.voltage_error;
        out.resistance += s.resistance;
      }
      return out;
    }
    case NetworkNode::Kind::Parallel: {
      double conductance = 0.0;
      double current = 0.0;
      for (const NetworkNode& c : node.children) {
        const ScalarNode s = scalar_dissipation(c, composed, x_error);
        conductance += 1.0 / s.resistance;
        current += s.voltage_error / s.resistance;
      }
      return {current / conductance, 1.0 / conductance};
    }
  }
  return {};
}

}  // namespace pbcnet::testing
