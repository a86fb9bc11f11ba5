#include "hgf/hyperbolic_reduction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hgf/curvature.hpp"

namespace hgf {

StateVector::StateVector(Grid grid, double time)
    : grid_(std::move(grid)), time_(time), u_(state_length(grid_.dim()) * grid_.node_count(), 0.0) {}

TensorField StateVector::block(std::size_t offset) const {
  TensorField f = TensorField::covariant_symmetric(grid_);
  const std::size_t nodes = grid_.node_count();
  std::copy_n(u_.begin() + static_cast<std::ptrdiff_t>(offset * nodes), block_size() * nodes, f.data().begin());
  return f;
}

std::vector<TensorField> StateVector::derivatives() const {
  std::vector<TensorField> out;
  out.reserve(dim());
  for (int k = 0; k < dim(); ++k) out.push_back(derivative(k));
  return out;
}

void StateVector::set_block(std::size_t offset, const TensorField& field) {
  if (!(field.grid() == grid_) || !field.packed()) throw Error(ErrorKind::shape_mismatch, "state block");
  std::copy(field.data().begin(), field.data().end(),
            u_.begin() + static_cast<std::ptrdiff_t>(offset * grid_.node_count()));
}

Eigen::VectorXd StateVector::node_vector(std::size_t node) const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(length()));
  for (std::size_t q = 0; q < length(); ++q) v(static_cast<Eigen::Index>(q)) = (*this)(q, node);
  return v;
}

StateVector pack_state(const FlowState& state) {
  validate_flow_state(state);
  StateVector sv(state.metric.grid(), state.time);
  sv.set_block(sv.metric_offset(), state.metric);
  for (int k = 0; k < sv.dim(); ++k) sv.set_block(sv.derivative_offset(k), partial_derivative(state.metric, k, 1));
  sv.set_block(sv.velocity_offset(), state.velocity);
  return sv;
}

double consistency_drift(const StateVector& sv) {
  const TensorField g = sv.metric();
  double worst = 0.0;
  for (int k = 0; k < sv.dim(); ++k) {
    const TensorField expected = partial_derivative(g, k, 1);
    const std::size_t base = sv.derivative_offset(k);
    for (std::size_t c = 0; c < expected.component_count(); ++c)
      for (std::size_t p = 0; p < expected.node_count(); ++p)
        worst = std::max(worst, std::abs(sv(base + c, p) - expected(c, p)));
  }
  return worst;
}

FlowState unpack_state(const StateVector& sv, double drift_tolerance) {
  const double drift = consistency_drift(sv);
  if (!(drift <= drift_tolerance))
    throw Error(ErrorKind::consistency_drift,
                "derivative block drift " + std::to_string(drift) + " exceeds " + std::to_string(drift_tolerance));
  return make_flow_state(sv.time(), sv.metric(), sv.velocity());
}

Eigen::MatrixXd assemble_a0(const SmallMatrix& inv) {
  const int n = static_cast<int>(inv.rows());
  const Eigen::Index m = static_cast<Eigen::Index>(packed_count(n));
  const Eigen::Index size = m * (n + 2);
  Eigen::MatrixXd a0 = Eigen::MatrixXd::Zero(size, size);
  a0.topLeftCorner(m, m).setIdentity();
  a0.bottomRightCorner(m, m).setIdentity();
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l)
      a0.block(m * (1 + k), m * (1 + l), m, m).diagonal().setConstant(inv(k, l));
  return a0;
}

Eigen::MatrixXd assemble_aj(const SmallMatrix& inv, int axis) {
  const int n = static_cast<int>(inv.rows());
  if (axis < 0 || axis >= n) throw Error(ErrorKind::axis_out_of_range, "axis " + std::to_string(axis));
  const Eigen::Index m = static_cast<Eigen::Index>(packed_count(n));
  const Eigen::Index size = m * (n + 2);
  const Eigen::Index vel = m * (n + 1);
  Eigen::MatrixXd aj = Eigen::MatrixXd::Zero(size, size);
  for (int k = 0; k < n; ++k) {
    const double c = inv(axis, k);
    aj.block(m * (1 + k), vel, m, m).diagonal().setConstant(c);
    aj.block(vel, m * (1 + k), m, m).diagonal().setConstant(c);
  }
  return aj;
}

namespace {

SmallMatrix node_inverse(const StateVector& sv, std::size_t node) {
  const int n = sv.dim();
  SmallMatrix g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) g(i, j) = g(j, i) = sv(sv.metric_offset() + packed_index(i, j, n), node);
  Eigen::LLT<SmallMatrix> llt(g);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorKind::singular_metric, "metric not positive definite at node " + std::to_string(node));
  return llt.solve(SmallMatrix::Identity(sv.dim(), sv.dim()));
}

// Lower-order part of the velocity equation, given the inverse metric.
TensorField velocity_source(const StateVector& sv, const RhsVariant& variant, const TensorField& metric,
                            const TensorField& inv, std::span<const TensorField> blocks) {
  if (variant.tag == Variant::gauge_fixed) return gauge_source(metric, inv, blocks);
  const FlowState state{sv.time(), metric, sv.velocity()};
  TensorField rhs = evaluate_rhs(state, variant);
  const TensorField principal = principal_term(inv, gradient(metric));
  auto& r = rhs.data();
  const auto& p = principal.data();
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= p[i];
  return rhs;
}

void copy_block(std::vector<double>& dst, const StateVector& sv, std::size_t offset, const TensorField& f) {
  std::copy(f.data().begin(), f.data().end(),
            dst.begin() + static_cast<std::ptrdiff_t>(offset * sv.grid().node_count()));
}

}  // namespace

Eigen::MatrixXd assemble_a0(const StateVector& sv, std::size_t node) { return assemble_a0(node_inverse(sv, node)); }

Eigen::MatrixXd assemble_aj(const StateVector& sv, int axis, std::size_t node) {
  if (axis < 0 || axis >= sv.dim()) throw Error(ErrorKind::axis_out_of_range, "axis " + std::to_string(axis));
  return assemble_aj(node_inverse(sv, node), axis);
}

std::vector<double> assemble_b(const StateVector& sv, const RhsVariant& variant) {
  const TensorField metric = sv.metric();
  const TensorField inv = metric_inverse(metric);
  const auto blocks = sv.derivatives();
  std::vector<double> b(sv.data().size(), 0.0);
  copy_block(b, sv, sv.metric_offset(), sv.velocity());
  copy_block(b, sv, sv.velocity_offset(), velocity_source(sv, variant, metric, inv, blocks));
  return b;
}

double cfl_dt(const StateVector& sv, double cfl_factor) {
  if (!(cfl_factor > 0.0)) throw Error(ErrorKind::invalid_argument, "cfl factor must be positive");
  const double lo = min_metric_eigenvalue(sv.metric());
  if (!(lo > kSpdTolerance)) throw Error(ErrorKind::singular_metric, "smallest metric eigenvalue " + std::to_string(lo));
  // lambda_max(g^-1) = 1 / lambda_min(g)
  return cfl_factor * sv.grid().smallest_spacing() * std::sqrt(lo);
}

void validate_integrator_config(const IntegratorConfig& config) {
  if (!(config.cfl_factor > 0.0 && config.cfl_factor <= 1.0))
    throw Error(ErrorKind::invalid_argument, "cfl factor must lie in (0, 1]");
  if (!(config.t_end > 0.0)) throw Error(ErrorKind::invalid_argument, "t_end must be positive");
  if (config.output_every == 0) throw Error(ErrorKind::invalid_argument, "output_every must be >= 1");
  if (config.fixed_dt && !(*config.fixed_dt > 0.0)) throw Error(ErrorKind::invalid_argument, "dt must be positive");
  if (config.forcing && (!config.forcing->value || !config.forcing->rate || !config.forcing->acceleration))
    throw Error(ErrorKind::invalid_argument, "forcing target is incomplete");
}

std::vector<double> time_derivative(const StateVector& sv, const IntegratorConfig& config) {
  const TensorField metric = sv.metric();
  const TensorField velocity = sv.velocity();
  const TensorField inv = metric_inverse(metric);
  const auto blocks = sv.derivatives();
  std::vector<double> du(sv.data().size(), 0.0);
  copy_block(du, sv, sv.metric_offset(), velocity);
  for (int k = 0; k < sv.dim(); ++k) copy_block(du, sv, sv.derivative_offset(k), partial_derivative(velocity, k, 1));
  TensorField accel = principal_term(inv, blocks);
  const TensorField lower = velocity_source(sv, config.variant, metric, inv, blocks);
  auto& a = accel.data();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += lower.data()[i];
  if (config.forcing) {
    const TensorField s = mms_source(*config.forcing, sv.grid(), config.variant, sv.time());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += s.data()[i];
  }
  copy_block(du, sv, sv.velocity_offset(), accel);
  return du;
}

StateVector rk4_step(const StateVector& sv, double dt, const IntegratorConfig& config) {
  if (!(dt > 0.0)) throw Error(ErrorKind::invalid_argument, "dt must be positive");
  const double bound = cfl_dt(sv, config.cfl_factor);
  if (dt > bound * (1.0 + 1e-12))
    throw Error(ErrorKind::cfl_violation, "dt " + std::to_string(dt) + " exceeds CFL bound " + std::to_string(bound));

  auto stage = [&](const StateVector& base, const std::vector<double>& k, double scale) {
    StateVector s = base;
    s.set_time(base.time() + scale);
    auto& u = s.data();
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += scale * k[i];
    return s;
  };
  auto derivative_or_spd = [&](const StateVector& s) {
    try {
      return time_derivative(s, config);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::singular_metric)
        throw Error(ErrorKind::spd_lost, "metric left the SPD cone during a stage at t = " + std::to_string(s.time()));
      throw;
    }
  };

  const auto k1 = derivative_or_spd(sv);
  const auto k2 = derivative_or_spd(stage(sv, k1, 0.5 * dt));
  const auto k3 = derivative_or_spd(stage(sv, k2, 0.5 * dt));
  const auto k4 = derivative_or_spd(stage(sv, k3, dt));
  StateVector next = sv;
  next.set_time(sv.time() + dt);
  auto& u = next.data();
  for (std::size_t i = 0; i < u.size(); ++i) u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  for (double v : u)
    if (!std::isfinite(v)) throw Error(ErrorKind::non_finite, "state became non-finite");
  const double lo = min_metric_eigenvalue(next.metric());
  if (!(lo > kSpdTolerance))
    throw Error(ErrorKind::spd_lost, "smallest metric eigenvalue " + std::to_string(lo) + " at t = " +
                                         std::to_string(next.time()));
  return next;
}

StateVector integrate(StateVector sv, const IntegratorConfig& config, const StepObserver& observer,
                      IntegrationSummary* summary) {
  validate_integrator_config(config);
  validate_variant(config.variant, sv.grid());
  IntegrationSummary local;
  if (observer) observer(sv, 0);
  const double t_end = config.t_end;
  std::size_t step = 0;
  while (t_end - sv.time() > 1e-12 * std::max(1.0, std::abs(t_end))) {
    double dt = config.fixed_dt ? *config.fixed_dt : cfl_dt(sv, config.cfl_factor);
    dt = std::min(dt, t_end - sv.time());
    StateVector next;
    try {
      next = rk4_step(sv, dt, config);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::spd_lost) throw;
      ++local.rejected_steps;
      next = rk4_step(sv, 0.5 * dt, config);
    }
    sv = std::move(next);
    ++step;
    local.max_drift = std::max(local.max_drift, consistency_drift(sv));
    const bool last = !(t_end - sv.time() > 1e-12 * std::max(1.0, std::abs(t_end)));
    if (observer && (step % config.output_every == 0 || last)) observer(sv, step);
  }
  local.steps = step;
  if (summary) *summary = local;
  return sv;
}

FirstOrderResidual first_order_residual(std::span<const StateVector> history, double dt,
                                        const RhsVariant& variant) {
  if (history.size() < 3) throw Error(ErrorKind::history_too_short, "need three consecutive states");
  if (!(dt > 0.0)) throw Error(ErrorKind::invalid_argument, "dt must be positive");
  const StateVector& prev = history[0];
  const StateVector& mid = history[1];
  const StateVector& next = history[2];
  if (!(prev.grid() == mid.grid()) || !(mid.grid() == next.grid()))
    throw Error(ErrorKind::grid_mismatch, "history states live on different grids");
  const double tol = 1e-9 * dt;
  if (std::abs(mid.time() - prev.time() - dt) > tol || std::abs(next.time() - mid.time() - dt) > tol)
    throw Error(ErrorKind::invalid_argument, "history is not uniformly spaced by dt");

  const int n = mid.dim();
  const std::size_t nodes = mid.grid().node_count();
  const std::size_t len = mid.length();
  const std::size_t m = mid.block_size();

  // spatial derivatives of every component of the middle state
  std::vector<std::vector<double>> du_dx(n, std::vector<double>(mid.data().size()));
  for (int j = 0; j < n; ++j)
    for (std::size_t blk = 0; blk < static_cast<std::size_t>(n + 2); ++blk) {
      const TensorField field = blk == 0 ? mid.metric()
                                : blk <= static_cast<std::size_t>(n) ? mid.derivative(static_cast<int>(blk) - 1)
                                                                     : mid.velocity();
      const TensorField d = partial_derivative(field, j, 1);
      std::copy(d.data().begin(), d.data().end(),
                du_dx[j].begin() + static_cast<std::ptrdiff_t>(blk * m * nodes));
    }
  const std::vector<double> b = assemble_b(mid, variant);
  const TensorField inv = metric_inverse(mid.metric());

  FirstOrderResidual out;
  out.per_node.assign(nodes, 0.0);
  Eigen::VectorXd dudt(static_cast<Eigen::Index>(len)), bn(static_cast<Eigen::Index>(len));
  std::vector<Eigen::VectorXd> dudx(n, Eigen::VectorXd(static_cast<Eigen::Index>(len)));
  for (std::size_t p = 0; p < nodes; ++p) {
    for (std::size_t q = 0; q < len; ++q) {
      const auto e = static_cast<Eigen::Index>(q);
      dudt(e) = (next(q, p) - prev(q, p)) / (2.0 * dt);
      bn(e) = b[q * nodes + p];
      for (int j = 0; j < n; ++j) dudx[j](e) = du_dx[j][q * nodes + p];
    }
    const SmallMatrix gi = load_symmetric(inv, p);
    Eigen::VectorXd r = assemble_a0(gi) * dudt - bn;
    for (int j = 0; j < n; ++j) r -= assemble_aj(gi, j) * dudx[j];
    out.per_node[p] = r.cwiseAbs().maxCoeff();
    out.sup_norm = std::max(out.sup_norm, out.per_node[p]);
  }
  return out;
}

}  // namespace hgf
