#include "pbcnet/converters.hpp"

#include "pbcnet/errors.hpp"

namespace pbcnet {

namespace {

constexpr int kCurrent = 0;
constexpr int kVoltage = 1;

ConverterModel second_order_frame(const ConverterParams& params) {
  check_params(params);
  ConverterModel model;
  model.inertia = Matrix::Zero(2, 2);
  model.inertia(kCurrent, kCurrent) = params.inductance;
  model.inertia(kVoltage, kVoltage) = params.capacitance;
  model.interconnection_const = Matrix::Zero(2, 2);
  model.interconnection_duty = {Matrix::Zero(2, 2)};
  model.input_map_const = Matrix::Zero(2, 1);
  model.input_map_duty = {Matrix::Zero(2, 1)};
  model.source = Vector::Constant(1, params.source_voltage);
  model.output_voltage_selector = Vector::Unit(2, kVoltage);
  model.topology = params.topology;
  return with_virtual_load(std::move(model), params.virtual_load);
}

// J(mu) = (1 - mu) S with S = [0, -1; 1, 0]
void set_switched_coupling(ConverterModel& model) {
  model.interconnection_const(kCurrent, kVoltage) = -1.0;
  model.interconnection_const(kVoltage, kCurrent) = 1.0;
  model.interconnection_duty[0](kCurrent, kVoltage) = 1.0;
  model.interconnection_duty[0](kVoltage, kCurrent) = -1.0;
}

}  // namespace

void check_params(const ConverterParams& p) {
  if (!(p.inductance > 0.0 && p.capacitance > 0.0 && p.source_voltage > 0.0 &&
        p.virtual_load > 0.0)) {
    throw DomainError("converter parameters L, C, E and R must be positive");
  }
}

ConverterModel make_boost(const ConverterParams& params) {
  ConverterParams p = params;
  p.topology = Topology::Boost;
  ConverterModel model = second_order_frame(p);
  set_switched_coupling(model);
  model.input_map_const(kCurrent, 0) = 1.0;
  return model;
}

ConverterModel make_buck(const ConverterParams& params) {
  ConverterParams p = params;
  p.topology = Topology::Buck;
  ConverterModel model = second_order_frame(p);
  model.interconnection_const(kCurrent, kVoltage) = -1.0;
  model.interconnection_const(kVoltage, kCurrent) = 1.0;
  model.input_map_duty[0](kCurrent, 0) = 1.0;
  return model;
}

ConverterModel make_buckboost(const ConverterParams& params) {
  ConverterParams p = params;
  p.topology = Topology::BuckBoost;
  ConverterModel model = second_order_frame(p);
  set_switched_coupling(model);
  model.input_map_duty[0](kCurrent, 0) = 1.0;
  return model;
}

ConverterModel make_converter(const ConverterParams& params) {
  switch (params.topology) {
    case Topology::Boost:
      return make_boost(params);
    case Topology::Buck:
      return make_buck(params);
    case Topology::BuckBoost:
      return make_buckboost(params);
  }
  throw DomainError("unknown topology");
}

ConverterModel with_virtual_load(ConverterModel model, double virtual_load) {
  if (!(virtual_load > 0.0)) throw DomainError("virtual load must be positive");
  const Vector& p = model.output_voltage_selector;
  model.virtual_load = virtual_load;
  model.dissipation = p * p.transpose() / virtual_load;
  return model;
}

}  // namespace pbcnet
