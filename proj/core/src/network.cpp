#include "pbcnet/network.hpp"

#include "pbcnet/converters.hpp"
#include "pbcnet/errors.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace pbcnet {

NetworkNode NetworkNode::make_leaf(std::size_t index) {
  NetworkNode node;
  node.kind = Kind::Leaf;
  node.leaf = index;
  return node;
}

NetworkNode NetworkNode::series(std::vector<NetworkNode> children) {
  NetworkNode node;
  node.kind = Kind::Series;
  node.children = std::move(children);
  return node;
}

NetworkNode NetworkNode::parallel(std::vector<NetworkNode> children, std::vector<double> split) {
  NetworkNode node;
  node.kind = Kind::Parallel;
  node.children = std::move(children);
  node.split = std::move(split);
  return node;
}

std::string NetworkSpec::leaf_name(std::size_t leaf) const {
  if (leaf < leaf_names.size() && !leaf_names[leaf].empty()) return leaf_names[leaf];
  return "#" + std::to_string(leaf);
}

namespace {

constexpr double kSplitTolerance = 1e-9;
constexpr double kRecombinationTolerance = 1e-9;

void check_node(const NetworkNode& node, const NetworkSpec& spec, std::vector<int>& seen) {
  switch (node.kind) {
    case NetworkNode::Kind::Leaf:
      if (node.leaf >= spec.leaf_count()) {
        throw ConsistencyError("network references undefined leaf " + std::to_string(node.leaf));
      }
      if (++seen[node.leaf] > 1) {
        throw ConsistencyError("leaf " + spec.leaf_name(node.leaf) + " appears more than once");
      }
      return;
    case NetworkNode::Kind::Series:
    case NetworkNode::Kind::Parallel:
      if (node.children.empty()) throw ConsistencyError("empty series/parallel node");
      break;
  }
  if (node.kind == NetworkNode::Kind::Parallel) {
    if (node.split.size() != node.children.size()) {
      throw ConsistencyError("parallel node needs one split fraction per branch");
    }
    double sum = 0.0;
    for (double f : node.split) {
      if (!(f > 0.0)) throw ConsistencyError("split fractions must be positive");
      sum += f;
    }
    if (std::abs(sum - 1.0) > kSplitTolerance) {
      std::ostringstream os;
      os << "split fractions sum to " << sum << ", expected 1";
      throw ConsistencyError(os.str());
    }
  }
  for (const auto& child : node.children) check_node(child, spec, seen);
}

double node_voltage(const NetworkNode& node, const NetworkSpec& spec) {
  switch (node.kind) {
    case NetworkNode::Kind::Leaf:
      return spec.voltage_targets[node.leaf];
    case NetworkNode::Kind::Series: {
      double v = 0.0;
      for (const auto& child : node.children) v += node_voltage(child, spec);
      return v;
    }
    case NetworkNode::Kind::Parallel: {
      const double v = node_voltage(node.children.front(), spec);
      for (std::size_t c = 1; c < node.children.size(); ++c) {
        const double vc = node_voltage(node.children[c], spec);
        if (std::abs(vc - v) > 1e-9 * std::max(1.0, std::abs(v))) {
          std::ostringstream os;
          os << "parallel branches disagree on output voltage (" << v << " V vs " << vc << " V)";
          throw ConsistencyError(os.str());
        }
      }
      return v;
    }
  }
  return 0.0;
}

void distribute_current(const NetworkNode& node, double current, std::vector<double>& leaf_currents) {
  switch (node.kind) {
    case NetworkNode::Kind::Leaf:
      leaf_currents[node.leaf] = current;
      return;
    case NetworkNode::Kind::Series:
      for (const auto& child : node.children) distribute_current(child, current, leaf_currents);
      return;
    case NetworkNode::Kind::Parallel:
      for (std::size_t c = 0; c < node.children.size(); ++c) {
        distribute_current(node.children[c], current * node.split[c], leaf_currents);
      }
      return;
  }
}

struct Port {
  Vector selector;
  double resistance;
};

Port reduce(const NetworkNode& node, std::span<const ConverterModel> leaves,
            const std::vector<LeafBlock>& blocks, Eigen::Index n) {
  if (node.kind == NetworkNode::Kind::Leaf) {
    const LeafBlock& block = blocks[node.leaf];
    Port port{Vector::Zero(n), leaves[node.leaf].virtual_load};
    port.selector.segment(block.state_offset, block.state_dim) =
        leaves[node.leaf].output_voltage_selector;
    return port;
  }
  std::vector<Port> ports;
  for (const auto& child : node.children) ports.push_back(reduce(child, leaves, blocks, n));
  Port out{Vector::Zero(n), 0.0};
  if (node.kind == NetworkNode::Kind::Series) {
    for (const auto& port : ports) {
      out.selector += port.selector;
      out.resistance += port.resistance;
    }
    return out;
  }
  double conductance = 0.0;
  for (const auto& port : ports) conductance += 1.0 / port.resistance;
  out.resistance = 1.0 / conductance;
  for (const auto& port : ports) out.selector += (out.resistance / port.resistance) * port.selector;
  return out;
}

Matrix block_diag(const std::vector<const Matrix*>& parts) {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  for (const Matrix* m : parts) {
    rows += m->rows();
    cols += m->cols();
  }
  Matrix out = Matrix::Zero(rows, cols);
  Eigen::Index r = 0;
  Eigen::Index c = 0;
  for (const Matrix* m : parts) {
    out.block(r, c, m->rows(), m->cols()) = *m;
    r += m->rows();
    c += m->cols();
  }
  return out;
}

}  // namespace

void validate_spec(const NetworkSpec& spec) {
  if (spec.leaf_count() == 0) throw ConsistencyError("network has no leaves");
  if (!(spec.physical_load > 0.0)) throw ConsistencyError("physical load must be positive");
  std::vector<int> seen(spec.leaf_count(), 0);
  check_node(spec.root, spec, seen);
  for (std::size_t m = 0; m < seen.size(); ++m) {
    if (seen[m] == 0) throw ConsistencyError("leaf " + spec.leaf_name(m) + " is not in the network");
  }
  for (std::size_t m = 0; m < spec.leaf_count(); ++m) {
    if (!(spec.voltage_targets[m] > 0.0)) {
      throw ConsistencyError("leaf " + spec.leaf_name(m) + " needs a positive voltage target");
    }
  }
}

LoadAllocation allocate_virtual_loads(const NetworkSpec& spec) {
  validate_spec(spec);
  LoadAllocation out;
  out.load_voltage = node_voltage(spec.root, spec);
  out.load_current = out.load_voltage / spec.physical_load;
  out.leaf_currents.assign(spec.leaf_count(), 0.0);
  distribute_current(spec.root, out.load_current, out.leaf_currents);
  out.leaf_loads.resize(spec.leaf_count());
  for (std::size_t m = 0; m < spec.leaf_count(); ++m) {
    out.leaf_loads[m] = spec.voltage_targets[m] / out.leaf_currents[m];
  }
  return out;
}

std::vector<ConverterModel> apply_virtual_loads(std::span<const ConverterModel> leaves,
                                                const LoadAllocation& allocation) {
  if (leaves.size() != allocation.leaf_loads.size()) {
    throw ConsistencyError("leaf model count does not match the allocation");
  }
  std::vector<ConverterModel> out;
  out.reserve(leaves.size());
  for (std::size_t m = 0; m < leaves.size(); ++m) {
    out.push_back(with_virtual_load(leaves[m], allocation.leaf_loads[m]));
  }
  return out;
}

ComposedModel compose(const NetworkSpec& spec, std::span<const ConverterModel> leaves) {
  validate_spec(spec);
  if (leaves.size() != spec.leaf_count()) {
    throw ConsistencyError("leaf model count does not match the network");
  }
  for (std::size_t m = 0; m < leaves.size(); ++m) {
    const ValidationReport report = validate_model(leaves[m]);
    if (!report.ok()) {
      throw DomainError("leaf " + spec.leaf_name(m) + " is not a valid model: " +
                        report.issues.front().detail);
    }
  }

  ComposedModel out;
  out.physical_load = spec.physical_load;
  Eigen::Index n = 0;
  Eigen::Index l = 0;
  Eigen::Index m_in = 0;
  for (const auto& leaf : leaves) {
    out.blocks.push_back({n, leaf.state_dim(), l, leaf.duty_dim(), m_in, leaf.input_dim()});
    out.leaf_selectors.push_back(leaf.output_voltage_selector);
    out.leaf_loads.push_back(leaf.virtual_load);
    n += leaf.state_dim();
    l += leaf.duty_dim();
    m_in += leaf.input_dim();
  }

  auto stack = [&](auto&& pick) {
    std::vector<const Matrix*> parts;
    for (const auto& leaf : leaves) parts.push_back(&pick(leaf));
    return block_diag(parts);
  };
  ConverterModel& s = out.stacked;
  s.inertia = stack([](const ConverterModel& c) -> const Matrix& { return c.inertia; });
  s.interconnection_const =
      stack([](const ConverterModel& c) -> const Matrix& { return c.interconnection_const; });
  s.input_map_const = stack([](const ConverterModel& c) -> const Matrix& { return c.input_map_const; });
  out.leaf_dissipation = stack([](const ConverterModel& c) -> const Matrix& { return c.dissipation; });
  s.source = Vector(m_in);
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    const LeafBlock& b = out.blocks[k];
    s.source.segment(b.input_offset, b.input_dim) = leaves[k].source;
    for (Eigen::Index d = 0; d < b.duty_dim; ++d) {
      const auto dd = static_cast<std::size_t>(d);
      Matrix jk = Matrix::Zero(n, n);
      jk.block(b.state_offset, b.state_offset, b.state_dim, b.state_dim) =
          leaves[k].interconnection_duty[dd];
      Matrix gk = Matrix::Zero(n, m_in);
      gk.block(b.state_offset, b.input_offset, b.state_dim, b.input_dim) =
          leaves[k].input_map_duty[dd];
      s.interconnection_duty.push_back(std::move(jk));
      s.input_map_duty.push_back(std::move(gk));
    }
  }

  const Port root = reduce(spec.root, leaves, out.blocks, n);
  out.recombined_load = root.resistance;
  if (std::abs(root.resistance - spec.physical_load) > kRecombinationTolerance * spec.physical_load) {
    std::ostringstream os;
    os << "leaf loads recombine to " << root.resistance << " ohm, physical load is "
       << spec.physical_load << " ohm";
    throw ConsistencyError(os.str());
  }
  s.output_voltage_selector = root.selector;
  s.virtual_load = spec.physical_load;
  s.dissipation = root.selector * root.selector.transpose() / spec.physical_load;
  return out;
}

OperatingPoint stack_operating_points(std::span<const OperatingPoint> points) {
  Eigen::Index n = 0;
  Eigen::Index l = 0;
  for (const auto& p : points) {
    n += p.x_desired.size();
    l += p.duty_desired.size();
  }
  OperatingPoint out{Vector(n), Vector(l), 0.0};
  n = 0;
  l = 0;
  for (const auto& p : points) {
    out.x_desired.segment(n, p.x_desired.size()) = p.x_desired;
    out.duty_desired.segment(l, p.duty_desired.size()) = p.duty_desired;
    n += p.x_desired.size();
    l += p.duty_desired.size();
    out.residual_norm = std::max(out.residual_norm, p.residual_norm);
  }
  return out;
}

ErrorModel composed_error_model(const ComposedModel& composed,
                                std::span<const OperatingPoint> points) {
  return ErrorModel(composed.stacked, stack_operating_points(points), composed.leaf_dissipation);
}

Matrix block_supply_map(const ComposedModel& composed, const Vector& duty) {
  const ConverterModel& s = composed.stacked;
  const Matrix j = s.interconnection(duty) - composed.leaf_dissipation;
  const Matrix g = s.input_map(duty);
  Eigen::Index cols = 0;
  for (const auto& b : composed.blocks) cols += b.state_dim + b.input_dim;
  Matrix out = Matrix::Zero(s.state_dim(), cols);
  Eigen::Index c = 0;
  for (const auto& b : composed.blocks) {
    out.block(b.state_offset, c, b.state_dim, b.state_dim) =
        j.block(b.state_offset, b.state_offset, b.state_dim, b.state_dim);
    out.block(b.state_offset, c + b.state_dim, b.state_dim, b.input_dim) =
        g.block(b.state_offset, b.input_offset, b.state_dim, b.input_dim);
    c += b.state_dim + b.input_dim;
  }
  return out;
}

Vector block_supply_input(const ComposedModel& composed, std::span<const OperatingPoint> points) {
  if (points.size() != composed.leaf_count()) {
    throw ConsistencyError("operating point count does not match the network");
  }
  Eigen::Index rows = 0;
  for (const auto& b : composed.blocks) rows += b.state_dim + b.input_dim;
  Vector out(rows);
  Eigen::Index r = 0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const LeafBlock& b = composed.blocks[k];
    out.segment(r, b.state_dim) = points[k].x_desired;
    out.segment(r + b.state_dim, b.input_dim) = composed.stacked.source.segment(b.input_offset, b.input_dim);
    r += b.state_dim + b.input_dim;
  }
  return out;
}

Vector InteractionTerm::leaf_slice(std::size_t leaf) const {
  const LeafBlock& blk = blocks.at(leaf);
  return b.segment(blk.state_offset, blk.state_dim);
}

double InteractionTerm::leaf_power(std::size_t leaf, const Vector& x_error) const {
  const LeafBlock& blk = blocks.at(leaf);
  return x_error.segment(blk.state_offset, blk.state_dim).dot(leaf_slice(leaf));
}

std::optional<double> InteractionTerm::series_voltage_interaction(std::size_t leaf,
                                                                  const Vector& x_error) const {
  const double v = output_errors.at(leaf);
  if (v == 0.0) return std::nullopt;
  return leaf_loads[leaf] * leaf_power(leaf, x_error) / v;
}

std::optional<double> InteractionTerm::parallel_current_interaction(std::size_t leaf,
                                                                    const Vector& x_error) const {
  const double v = output_errors.at(leaf);
  if (v == 0.0) return std::nullopt;
  return leaf_power(leaf, x_error) / v;
}

InteractionTerm interaction(const ComposedModel& composed, const Vector& x_error) {
  return interaction(composed, composed.leaf_dissipation, x_error);
}

InteractionTerm interaction(const ComposedModel& composed, const Matrix& leaf_dissipation,
                            const Vector& x_error) {
  InteractionTerm out;
  out.b = (leaf_dissipation - composed.stacked.dissipation) * x_error;
  out.blocks = composed.blocks;
  out.leaf_loads = composed.leaf_loads;
  for (std::size_t k = 0; k < composed.blocks.size(); ++k) {
    const LeafBlock& blk = composed.blocks[k];
    out.output_errors.push_back(
        composed.leaf_selectors[k].dot(x_error.segment(blk.state_offset, blk.state_dim)));
  }
  return out;
}

std::vector<OperatingPoint> solve_network_steady_state(const NetworkSpec& spec,
                                                       std::span<const ConverterModel> leaves) {
  return assemble_network(spec, leaves).operating_points;
}

AssembledNetwork assemble_network(const NetworkSpec& spec, std::span<const ConverterModel> leaves) {
  AssembledNetwork out;
  out.allocation = allocate_virtual_loads(spec);
  out.leaves = apply_virtual_loads(leaves, out.allocation);
  out.composed = compose(spec, out.leaves);
  for (std::size_t m = 0; m < out.leaves.size(); ++m) {
    try {
      out.operating_points.push_back(solve_steady_state(out.leaves[m], spec.voltage_targets[m]));
    } catch (const InfeasibleTarget& e) {
      throw InfeasibleTarget("leaf " + spec.leaf_name(m) + ": " + e.what());
    }
  }
  const OperatingPoint stacked = stack_operating_points(out.operating_points);
  const Vector residual =
      (out.composed.stacked.interconnection(stacked.duty_desired) - out.composed.stacked.dissipation) *
          stacked.x_desired +
      out.composed.stacked.input_map(stacked.duty_desired) * out.composed.stacked.source;
  const double norm = residual.lpNorm<Eigen::Infinity>();
  if (norm > kResidualTolerance) {
    std::ostringstream os;
    os << "composed null residual " << norm << " exceeds tolerance";
    throw InfeasibleTarget(os.str());
  }
  return out;
}

}  // namespace pbcnet
