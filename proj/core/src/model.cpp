#include "pbcnet/model.hpp"

#include "pbcnet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pbcnet {

std::string to_string(Topology topology) {
  switch (topology) {
    case Topology::Boost:
      return "boost";
    case Topology::Buck:
      return "buck";
    case Topology::BuckBoost:
      return "buckboost";
  }
  return "unknown";
}

std::optional<Topology> topology_from_string(const std::string& name) {
  if (name == "boost") return Topology::Boost;
  if (name == "buck") return Topology::Buck;
  if (name == "buckboost" || name == "buck-boost") return Topology::BuckBoost;
  return std::nullopt;
}

Matrix ConverterModel::interconnection(const Vector& duty) const {
  Matrix j = interconnection_const;
  for (int k = 0; k < duty_dim(); ++k) {
    j += duty(k) * interconnection_duty[static_cast<std::size_t>(k)];
  }
  return j;
}

Matrix ConverterModel::input_map(const Vector& duty) const {
  Matrix g = input_map_const;
  for (int k = 0; k < duty_dim(); ++k) {
    g += duty(k) * input_map_duty[static_cast<std::size_t>(k)];
  }
  return g;
}

bool ValidationReport::has(ModelViolation kind) const {
  return std::any_of(issues.begin(), issues.end(),
                     [kind](const ValidationIssue& issue) { return issue.kind == kind; });
}

namespace {

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

bool exactly_skew(const Matrix& m) { return ((m + m.transpose()).array() == 0.0).all(); }

// Corners of [0,1]^l plus a few interior points.
std::vector<Vector> duty_samples(int l) {
  std::vector<Vector> out;
  out.push_back(Vector::Zero(l));
  out.push_back(Vector::Ones(l));
  out.push_back(Vector::Constant(l, 0.5));
  Vector ramp(l);
  for (int k = 0; k < l; ++k) ramp(k) = (k + 1.0) / (l + 1.0);
  out.push_back(ramp);
  out.push_back(Vector::Ones(l) - ramp);
  return out;
}

}  // namespace

ValidationReport validate_model(const ConverterModel& model) {
  ValidationReport report;
  auto add = [&report](ModelViolation kind, std::string detail) {
    report.issues.push_back({kind, std::move(detail)});
  };

  const auto n = model.inertia.rows();
  const auto m = model.source.size();
  const auto l = model.interconnection_duty.size();
  bool shapes_ok = n > 0 && model.inertia.cols() == n && m > 0 && l > 0 &&
                   model.input_map_duty.size() == l &&
                   model.interconnection_const.rows() == n &&
                   model.interconnection_const.cols() == n && model.dissipation.rows() == n &&
                   model.dissipation.cols() == n && model.input_map_const.rows() == n &&
                   model.input_map_const.cols() == m && model.output_voltage_selector.size() == n;
  for (std::size_t k = 0; shapes_ok && k < l; ++k) {
    shapes_ok = model.interconnection_duty[k].rows() == n &&
                model.interconnection_duty[k].cols() == n &&
                model.input_map_duty[k].rows() == n && model.input_map_duty[k].cols() == m;
  }
  if (!shapes_ok) {
    add(ModelViolation::ShapeMismatch, "matrix dimensions are inconsistent with (n, m, l)");
    return report;
  }

  const double a_scale = max_abs(model.inertia);
  if (max_abs(model.inertia - model.inertia.transpose()) > 1e-12 * a_scale) {
    add(ModelViolation::InertiaNotSymmetric, "A differs from its transpose");
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(model.inertia, Eigen::EigenvaluesOnly);
    const double min_eig = eig.eigenvalues().minCoeff();
    if (!(min_eig > 0.0)) {
      std::ostringstream os;
      os << "smallest eigenvalue of A is " << min_eig;
      add(ModelViolation::InertiaNotPositiveDefinite, os.str());
    }
  }

  if (!exactly_skew(model.interconnection_const)) {
    add(ModelViolation::InterconnectionNotSkew, "J0 + J0' != 0");
  }
  for (std::size_t k = 0; k < l; ++k) {
    if (!exactly_skew(model.interconnection_duty[k])) {
      add(ModelViolation::InterconnectionNotSkew, "J" + std::to_string(k + 1) + " + J' != 0");
    }
  }
  if (!report.has(ModelViolation::InterconnectionNotSkew)) {
    for (const Vector& s : duty_samples(static_cast<int>(l))) {
      if (!exactly_skew(model.interconnection(s))) {
        add(ModelViolation::InterconnectionNotSkew, "J(s) not skew at a sampled duty vector");
        break;
      }
    }
  }

  const Matrix& r = model.dissipation;
  const double r_scale = std::max(max_abs(r), 1.0);
  if (max_abs(r - r.transpose()) > 1e-12 * r_scale) {
    add(ModelViolation::DissipationNotSymmetric, "R differs from its transpose");
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(r, Eigen::EigenvaluesOnly);
    const double min_eig = eig.eigenvalues().minCoeff();
    if (min_eig < -1e-12 * r_scale) {
      std::ostringstream os;
      os << "smallest eigenvalue of R is " << min_eig;
      add(ModelViolation::DissipationNotPsd, os.str());
    }
  }

  if (!(model.virtual_load > 0.0)) {
    add(ModelViolation::DissipationNotLoadOnly, "virtual load must be positive");
  } else {
    const Vector& p = model.output_voltage_selector;
    const Matrix load_only = p * p.transpose() / model.virtual_load;
    const double scale = std::max(max_abs(r), max_abs(load_only));
    if (max_abs(r - load_only) > 1e-12 * std::max(scale, 1e-300)) {
      add(ModelViolation::DissipationNotLoadOnly, "R != p p' / R_load");
    }
  }
  return report;
}

void check_duty_range(const Vector& duty) {
  for (Eigen::Index k = 0; k < duty.size(); ++k) {
    if (!(duty(k) >= 0.0 && duty(k) <= 1.0)) {
      std::ostringstream os;
      os << "duty ratio s[" << k << "] = " << duty(k) << " outside [0,1]";
      throw DomainError(os.str());
    }
  }
}

Vector null_residual(const ConverterModel& model, const Vector& x, const Vector& duty) {
  if (duty.size() != model.duty_dim() || x.size() != model.state_dim()) {
    throw DomainError("null_residual: state or duty dimension mismatch");
  }
  check_duty_range(duty);
  return (model.interconnection(duty) - model.dissipation) * x +
         model.input_map(duty) * model.source;
}

namespace {

OperatingPoint finish(const ConverterModel& model, Vector x, Vector s) {
  OperatingPoint op{std::move(x), std::move(s), 0.0};
  op.residual_norm = null_residual(model, op.x_desired, op.duty_desired).lpNorm<Eigen::Infinity>();
  if (op.residual_norm > kResidualTolerance) {
    std::ostringstream os;
    os << "steady-state residual " << op.residual_norm << " exceeds tolerance";
    throw InfeasibleTarget(os.str());
  }
  return op;
}

[[noreturn]] void unreachable(const std::string& topology, double target, const std::string& why) {
  std::ostringstream os;
  os << topology << ": output voltage " << target << " V is unreachable (" << why << ")";
  throw InfeasibleTarget(os.str());
}

OperatingPoint closed_form(const ConverterModel& model, Topology topology, double v) {
  const double e = model.source(0);
  const double r = model.virtual_load;
  if (!(r > 0.0)) throw InfeasibleTarget("virtual load must be positive");
  double mu = 0.0;
  double i = 0.0;
  switch (topology) {
    case Topology::Boost:
      if (!(v >= e)) unreachable("boost", v, "requires v_d >= E");
      mu = 1.0 - e / v;
      i = v * v / (r * e);
      break;
    case Topology::Buck:
      if (!(v >= 0.0 && v <= e)) unreachable("buck", v, "requires 0 <= v_d <= E");
      mu = v / e;
      i = v / r;
      break;
    case Topology::BuckBoost:
      if (!(v >= 0.0)) unreachable("buckboost", v, "requires v_d >= 0");
      mu = v / (v + e);
      i = v * (v + e) / (r * e);
      break;
  }
  Vector x(2);
  x << i, v;
  return finish(model, std::move(x), Vector::Constant(1, mu));
}

}  // namespace

OperatingPoint solve_steady_state_newton(const ConverterModel& model, double target) {
  const int n = model.state_dim();
  const int l = model.duty_dim();
  const Vector& p = model.output_voltage_selector;

  Vector s = Vector::Constant(l, 0.5);
  Vector x = Vector::Zero(n);
  {
    Eigen::FullPivLU<Matrix> lu(model.interconnection(s) - model.dissipation);
    if (lu.isInvertible()) x = lu.solve(-model.input_map(s) * model.source);
  }

  auto residual = [&](const Vector& xx, const Vector& ss) {
    Vector f(n + 1);
    f.head(n) = (model.interconnection(ss) - model.dissipation) * xx + model.input_map(ss) * model.source;
    f(n) = p.dot(xx) - target;
    return f;
  };

  Vector f = residual(x, s);
  for (int iter = 0; iter < 100 && f.lpNorm<Eigen::Infinity>() > 1e-13 * std::max(1.0, std::abs(target)); ++iter) {
    Matrix jac = Matrix::Zero(n + 1, n + l);
    jac.topLeftCorner(n, n) = model.interconnection(s) - model.dissipation;
    jac.block(n, 0, 1, n) = p.transpose();
    for (int k = 0; k < l; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      jac.block(0, n + k, n, 1) =
          model.interconnection_duty[kk] * x + model.input_map_duty[kk] * model.source;
    }
    const Vector step = jac.completeOrthogonalDecomposition().solve(-f);
    if (!step.allFinite()) break;
    x += step.head(n);
    s += step.tail(l);
    f = residual(x, s);
  }
  if (!f.allFinite() || f.lpNorm<Eigen::Infinity>() > kResidualTolerance) {
    unreachable("model", target, "Newton iteration did not converge");
  }
  for (int k = 0; k < l; ++k) {
    if (s(k) < 0.0 && s(k) > -1e-12) s(k) = 0.0;
    if (s(k) > 1.0 && s(k) < 1.0 + 1e-12) s(k) = 1.0;
    if (!(s(k) >= 0.0 && s(k) <= 1.0)) unreachable("model", target, "duty ratio outside [0,1]");
  }
  return finish(model, std::move(x), std::move(s));
}

OperatingPoint solve_steady_state(const ConverterModel& model, double target) {
  if (model.topology) return closed_form(model, *model.topology, target);
  return solve_steady_state_newton(model, target);
}

ErrorModel::ErrorModel(ConverterModel base, OperatingPoint operating_point)
    : ErrorModel(base, std::move(operating_point), base.dissipation) {}

ErrorModel::ErrorModel(ConverterModel base, OperatingPoint operating_point,
                       Matrix supply_dissipation)
    : base_(std::move(base)),
      op_(std::move(operating_point)),
      supply_dissipation_(std::move(supply_dissipation)) {
  const int n = base_.state_dim();
  if (op_.x_desired.size() != n || op_.duty_desired.size() != base_.duty_dim() ||
      supply_dissipation_.rows() != n || supply_dissipation_.cols() != n) {
    throw DomainError("ErrorModel: operating point does not match model dimensions");
  }
  // g~(s) u~ = g~(s_d) u~ + sum_k (s_k - s_dk) (J_k x_d + g_k u). Evaluating it
  // in this form keeps the supplied power accurate when s is close to s_d.
  const Vector& xd = op_.x_desired;
  drive_at_desired_ = (base_.interconnection(op_.duty_desired) - supply_dissipation_) * xd +
                      base_.input_map(op_.duty_desired) * base_.source;
  drive_per_duty_.resize(n, base_.duty_dim());
  for (int k = 0; k < base_.duty_dim(); ++k) {
    const auto uk = static_cast<std::size_t>(k);
    drive_per_duty_.col(k) = base_.interconnection_duty[uk] * xd + base_.input_map_duty[uk] * base_.source;
  }
}

Matrix ErrorModel::supply_map(const Vector& duty) const {
  const int n = base_.state_dim();
  Matrix out(n, n + base_.input_dim());
  out.leftCols(n) = base_.interconnection(duty) - supply_dissipation_;
  out.rightCols(base_.input_dim()) = base_.input_map(duty);
  return out;
}

Vector ErrorModel::supply_input() const {
  Vector out(base_.state_dim() + base_.input_dim());
  out << op_.x_desired, base_.source;
  return out;
}

Vector ErrorModel::error_dynamics(const Vector& x, const Vector& duty) const {
  const Vector xt = error(x);
  return (base_.interconnection(duty) - base_.dissipation) * xt + supply_map(duty) * supply_input();
}

double ErrorModel::supplied_power_unchecked(const Vector& x, const Vector& duty) const {
  const Vector xt = error(x);
  return xt.dot(drive_at_desired_) + (duty - op_.duty_desired).dot(drive_per_duty_.transpose() * xt);
}

double storage(const ErrorModel& model, const Vector& x) {
  const Vector xt = model.error(x);
  return 0.5 * xt.dot(model.base().inertia * xt);
}

PowerSplit storage_rate_decomposition(const ErrorModel& model, const Vector& x, const Vector& duty) {
  check_duty_range(duty);
  const Vector xt = model.error(x);
  return {-xt.dot(model.base().dissipation * xt), model.supplied_power_unchecked(x, duty)};
}

}  // namespace pbcnet
