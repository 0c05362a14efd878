#include "pbcnet/sim.hpp"

#include "pbcnet/errors.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace pbcnet {

namespace {

bool is_integer_multiple(double value, double unit) {
  const double ratio = value / unit;
  return std::abs(ratio - std::round(ratio)) <= 1e-9 * std::max(1.0, ratio);
}

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

void Scenario::validate() const {
  if (!(dt > 0.0)) throw DomainError("scenario: dt must be positive");
  if (!(t_end > 0.0)) throw DomainError("scenario: t_end must be positive");
  if (!(controller_period >= dt * (1.0 - 1e-12)) || !is_integer_multiple(controller_period, dt)) {
    throw DomainError("scenario: controller period must be an integer multiple of dt");
  }
  if (const auto* p = std::get_if<InputPerturbation>(&disturbance)) {
    if (!(p->peak_to_peak >= 0.0)) throw DomainError("scenario: peak-to-peak must be non-negative");
    if (!(p->hold_period >= controller_period * (1.0 - 1e-12)) ||
        !is_integer_multiple(p->hold_period, controller_period)) {
      throw DomainError("scenario: hold period must be an integer multiple of the controller period");
    }
  }
  if (const auto* f = std::get_if<LoadFluctuation>(&disturbance)) {
    if (!(f->factor > 0.0 && f->factor <= 1.0)) throw DomainError("scenario: load factor must lie in (0,1]");
    if (!(f->t_start >= 0.0 && f->t_end > f->t_start)) {
      throw DomainError("scenario: load fluctuation window must satisfy 0 <= t_start < t_end");
    }
  }
}

int Scenario::steps_per_period() const {
  return static_cast<int>(std::lround(controller_period / dt));
}

std::size_t Scenario::period_count() const {
  return static_cast<std::size_t>(std::floor(t_end / controller_period + 1e-9));
}

ClosedLoopPlant::ClosedLoopPlant(ComposedModel composed, OperatingPoint desired)
    : composed_(std::move(composed)), desired_(std::move(desired)) {
  const ConverterModel& s = composed_.stacked;
  if (desired_.x_desired.size() != s.state_dim() || desired_.duty_desired.size() != s.duty_dim()) {
    throw DomainError("ClosedLoopPlant: desired state does not match the composed model");
  }
  inertia_inverse_ = s.inertia.llt().solve(Matrix::Identity(s.state_dim(), s.state_dim()));
}

ClosedLoopPlant::HeldStep ClosedLoopPlant::hold(const Vector& duty, const Vector& source) const {
  const ConverterModel& s = composed_.stacked;
  const Matrix j = s.interconnection(duty);
  HeldStep out;
  out.drift = inertia_inverse_ * (j - s.dissipation);
  out.bias = inertia_inverse_ *
             ((j - composed_.leaf_dissipation) * desired_.x_desired + s.input_map(duty) * source);
  return out;
}

Vector ClosedLoopPlant::derivative(const Vector& x, const Vector& duty, const Vector& source) const {
  const HeldStep h = hold(duty, source);
  return h.drift * (x - desired_.x_desired) + h.bias;
}

Vector ClosedLoopPlant::step(const Vector& x, const Vector& duty, const Vector& source, double dt,
                             double time) const {
  const HeldStep h = hold(duty, source);
  // The held dynamics are affine in the error, so RK4 acts on x~ directly.
  const Vector e = x - desired_.x_desired;
  const Vector k1 = h.drift * e + h.bias;
  const Vector k2 = h.drift * (e + 0.5 * dt * k1) + h.bias;
  const Vector k3 = h.drift * (e + 0.5 * dt * k2) + h.bias;
  const Vector k4 = h.drift * (e + dt * k3) + h.bias;
  Vector next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!next.allFinite()) {
    std::ostringstream os;
    os << "non-finite state after step at t = " << time << " s";
    throw NumericalBlowup(os.str(), time);
  }
  return next;
}

double ClosedLoopPlant::storage(const Vector& x) const {
  const Vector e = x - desired_.x_desired;
  return 0.5 * e.dot(composed_.stacked.inertia * e);
}

std::vector<double> ClosedLoopPlant::leaf_supplied(const Vector& x, const Vector& duty,
                                                   const Vector& source) const {
  const ConverterModel& s = composed_.stacked;
  const Matrix j = s.interconnection(duty);
  const Matrix g = s.input_map(duty);
  std::vector<double> out;
  out.reserve(composed_.blocks.size());
  for (const LeafBlock& b : composed_.blocks) {
    const auto rows = Eigen::seqN(b.state_offset, b.state_dim);
    const Vector xd = desired_.x_desired(rows);
    const Vector drive = (j(rows, rows) - composed_.leaf_dissipation(rows, rows)) * xd +
                         g(rows, Eigen::seqN(b.input_offset, b.input_dim)) *
                             source.segment(b.input_offset, b.input_dim);
    out.push_back((x(rows) - xd).dot(drive));
  }
  return out;
}

PowerSplit ClosedLoopPlant::power(const Vector& x, const Vector& duty, const Vector& source) const {
  const Vector e = x - desired_.x_desired;
  PowerSplit out;
  out.dissipation = -e.dot(composed_.stacked.dissipation * e);
  for (double p : leaf_supplied(x, duty, source)) out.supplied += p;
  return out;
}

Vector step(const ComposedModel& composed, std::span<const PbcController> controllers,
            const Vector& x, const Vector& held_duties, double dt) {
  check_duty_range(held_duties);
  std::vector<OperatingPoint> points;
  for (const auto& c : controllers) points.push_back(c.operating_point);
  const ClosedLoopPlant plant(composed, stack_operating_points(points));
  return plant.step(x, held_duties, composed.stacked.source, dt);
}

std::vector<PbcController> make_controllers(const AssembledNetwork& network,
                                            std::span<const double> gains) {
  if (gains.size() != network.leaves.size()) throw DomainError("one gain per leaf is required");
  std::vector<PbcController> out;
  for (std::size_t m = 0; m < gains.size(); ++m) {
    out.push_back(make_controller(network.leaves[m], network.operating_points[m], gains[m]));
  }
  return out;
}

Trace run(const NetworkSpec& spec, std::span<const ConverterModel> leaves, const Scenario& scenario,
          std::span<const PbcController> controllers) {
  scenario.validate();
  const AssembledNetwork nominal = assemble_network(spec, leaves);
  const std::size_t leaf_count = nominal.leaves.size();
  if (controllers.size() != leaf_count) throw DomainError("run: one controller per leaf is required");
  const OperatingPoint desired = stack_operating_points(nominal.operating_points);
  const ClosedLoopPlant plant(nominal.composed, desired);

  // The load dip re-derives the virtual loads and R_n for the reduced load;
  // the desired state stays at the nominal one.
  std::optional<ClosedLoopPlant> dipped;
  const auto* fluctuation = std::get_if<LoadFluctuation>(&scenario.disturbance);
  if (fluctuation) {
    NetworkSpec reduced = spec;
    reduced.physical_load = spec.physical_load * fluctuation->factor;
    const LoadAllocation allocation = allocate_virtual_loads(reduced);
    const auto reduced_leaves = apply_virtual_loads(leaves, allocation);
    dipped.emplace(compose(reduced, reduced_leaves), desired);
  }

  const Vector nominal_source = nominal.composed.stacked.source;
  Vector source = nominal_source;
  const auto* perturbation = std::get_if<InputPerturbation>(&scenario.disturbance);
  std::mt19937_64 rng(perturbation ? perturbation->seed : 0);
  const std::size_t hold_samples =
      perturbation ? static_cast<std::size_t>(std::lround(perturbation->hold_period / scenario.controller_period))
                   : 1;

  Vector x(desired.x_desired.size());
  for (std::size_t m = 0; m < leaf_count; ++m) {
    const LeafBlock& b = nominal.composed.blocks[m];
    if (scenario.initial_state.empty()) {
      x.segment(b.state_offset, b.state_dim) = nominal.operating_points[m].x_desired;
    } else {
      if (scenario.initial_state.size() != leaf_count ||
          scenario.initial_state[m].size() != b.state_dim) {
        throw DomainError("run: initial state does not match the network");
      }
      x.segment(b.state_offset, b.state_dim) = scenario.initial_state[m];
    }
  }

  const std::size_t periods = scenario.period_count();
  const int steps = scenario.steps_per_period();
  Trace trace;
  trace.reserve(periods + 1);
  Vector duty(desired.duty_desired.size());

  for (std::size_t k = 0; k <= periods; ++k) {
    const double t = static_cast<double>(k) * scenario.controller_period;
    const double eps = 1e-9 * scenario.controller_period;
    const bool dip = fluctuation && t >= fluctuation->t_start - eps && t < fluctuation->t_end - eps;
    const ClosedLoopPlant& active = dip ? *dipped : plant;

    if (perturbation && k % hold_samples == 0) {
      for (Eigen::Index j = 0; j < source.size(); ++j) {
        source(j) = nominal_source(j) + perturbation->peak_to_peak * (unit_uniform(rng) - 0.5);
      }
    }

    TraceRecord record;
    record.t = t;
    for (std::size_t m = 0; m < leaf_count; ++m) {
      const LeafBlock& b = nominal.composed.blocks[m];
      const Vector xm = x.segment(b.state_offset, b.state_dim);
      duty.segment(b.duty_offset, b.duty_dim).setConstant(controllers[m].duty(xm));
    }
    const std::vector<double> supplied = active.leaf_supplied(x, duty, source);
    double total_supplied = 0.0;
    for (std::size_t m = 0; m < leaf_count; ++m) {
      const LeafBlock& b = nominal.composed.blocks[m];
      const Vector xm = x.segment(b.state_offset, b.state_dim);
      record.leaves.push_back({xm(0), nominal.composed.leaf_selectors[m].dot(xm), duty(b.duty_offset),
                               supplied[m]});
      record.effective_sources.push_back(source(b.input_offset));
      total_supplied += supplied[m];
    }
    const Vector e = x - desired.x_desired;
    record.storage = active.storage(x);
    record.storage_rate = -e.dot(active.composed().stacked.dissipation * e) + total_supplied;
    record.effective_load = active.composed().physical_load;
    trace.push_back(std::move(record));

    if (k == periods) break;
    for (int s = 0; s < steps; ++s) {
      x = active.step(x, duty, source, scenario.dt, t + s * scenario.dt);
    }
  }
  return trace;
}

LyapunovReport monitor_lyapunov(const Trace& trace) {
  LyapunovReport report;
  report.samples = trace.size();
  if (trace.empty()) {
    report.message = "empty trace";
    return report;
  }
  const double h0 = trace.front().storage;
  const double allowance = kStorageIncreaseTolerance * h0;
  auto flag = [&report](LyapunovViolation v) {
    if (report.passed) {
      report.passed = false;
      report.first_violation = std::move(v);
    }
  };

  for (std::size_t k = 0; k < trace.size(); ++k) {
    const TraceRecord& r = trace[k];
    double total = 0.0;
    for (std::size_t m = 0; m < r.leaves.size(); ++m) {
      const double p = r.leaves[m].supplied;
      total += p;
      report.max_leaf_supplied = std::max(report.max_leaf_supplied, p);
      if (p > kSupplyTolerance) {
        flag({LyapunovViolation::Kind::LeafSupplyPositive, r.t, m, p, r.leaves});
      }
    }
    if (total > kSupplyTolerance) {
      flag({LyapunovViolation::Kind::TotalSupplyPositive, r.t, std::nullopt, total, r.leaves});
    }
    if (k > 0) {
      const double increase = r.storage - trace[k - 1].storage;
      if (h0 > 0.0) report.max_storage_increase = std::max(report.max_storage_increase, increase / h0);
      if (increase > allowance) {
        flag({LyapunovViolation::Kind::StorageIncrease, r.t, std::nullopt, increase, r.leaves});
      }
    }
  }

  std::ostringstream os;
  if (report.passed) {
    os << "storage non-increasing and supplied power non-positive over " << trace.size() << " samples";
  } else {
    const LyapunovViolation& v = *report.first_violation;
    switch (v.kind) {
      case LyapunovViolation::Kind::StorageIncrease:
        os << "storage increased by " << v.value << " J at t = " << v.t << " s";
        break;
      case LyapunovViolation::Kind::TotalSupplyPositive:
        os << "total supplied power " << v.value << " W at t = " << v.t << " s";
        break;
      case LyapunovViolation::Kind::LeafSupplyPositive:
        os << "leaf " << *v.leaf << " supplied power " << v.value << " W at t = " << v.t << " s";
        break;
    }
  }
  report.message = os.str();
  return report;
}

double max_relative_error(const TraceRecord& record, std::span<const OperatingPoint> points) {
  double worst = 0.0;
  for (std::size_t m = 0; m < record.leaves.size(); ++m) {
    const Vector& xd = points[m].x_desired;
    worst = std::max(worst, std::abs(record.leaves[m].current - xd(0)) / std::abs(xd(0)));
    worst = std::max(worst, std::abs(record.leaves[m].voltage - xd(1)) / std::abs(xd(1)));
  }
  return worst;
}

ErrorBand error_band(const Trace& trace, std::span<const OperatingPoint> points, double t_from) {
  ErrorBand band;
  for (const TraceRecord& r : trace) {
    if (r.t < t_from) continue;
    for (std::size_t m = 0; m < r.leaves.size(); ++m) {
      const OperatingPoint& op = points[m];
      band.current = std::max(band.current, std::abs(r.leaves[m].current - op.x_desired(0)) /
                                                std::abs(op.x_desired(0)));
      band.voltage = std::max(band.voltage, std::abs(r.leaves[m].voltage - op.x_desired(1)) /
                                                std::abs(op.x_desired(1)));
      band.duty = std::max(band.duty, std::abs(r.leaves[m].duty - op.duty_desired(0)));
    }
  }
  return band;
}

std::optional<double> settling_time(const Trace& trace, std::span<const OperatingPoint> points,
                                    double tolerance, double t_from) {
  std::optional<double> settled;
  for (const TraceRecord& r : trace) {
    if (r.t < t_from) continue;
    if (max_relative_error(r, points) < tolerance) {
      if (!settled) settled = r.t;
    } else {
      settled.reset();
    }
  }
  return settled;
}

}  // namespace pbcnet
