#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hgf/flow_dynamics.hpp"
#include "hgf/grid_field.hpp"

namespace hgf {

/// Per-node length of the first-order unknowns, n(n+1)(n+2)/2.
inline std::size_t state_length(int n) { return packed_count(n) * static_cast<std::size_t>(n + 2); }

/// First-order unknowns (g_ij | g_ij,k | h_ij). Storage is component-major
/// like TensorField: entry (q, node) lives at u[q * nodes + node], where q
/// runs over the metric block, then n derivative blocks (axis-major), then
/// the velocity block.
class StateVector {
 public:
  StateVector() = default;
  StateVector(Grid grid, double time);

  const Grid& grid() const noexcept { return grid_; }
  int dim() const noexcept { return grid_.dim(); }
  double time() const noexcept { return time_; }
  void set_time(double t) noexcept { time_ = t; }

  std::size_t block_size() const noexcept { return packed_count(grid_.dim()); }
  std::size_t length() const noexcept { return state_length(grid_.dim()); }
  std::size_t metric_offset() const noexcept { return 0; }
  std::size_t derivative_offset(int axis) const noexcept { return block_size() * (1 + axis); }
  std::size_t velocity_offset() const noexcept { return block_size() * (1 + grid_.dim()); }

  double operator()(std::size_t q, std::size_t node) const { return u_[q * grid_.node_count() + node]; }
  double& operator()(std::size_t q, std::size_t node) { return u_[q * grid_.node_count() + node]; }

  /// Copies of the three blocks as packed (0,2) fields.
  TensorField metric() const { return block(metric_offset()); }
  TensorField derivative(int axis) const { return block(derivative_offset(axis)); }
  std::vector<TensorField> derivatives() const;
  TensorField velocity() const { return block(velocity_offset()); }
  void set_block(std::size_t offset, const TensorField& field);

  Eigen::VectorXd node_vector(std::size_t node) const;

  std::vector<double>& data() noexcept { return u_; }
  const std::vector<double>& data() const noexcept { return u_; }

 private:
  TensorField block(std::size_t offset) const;

  Grid grid_;
  double time_ = 0.0;
  std::vector<double> u_;
};

StateVector pack_state(const FlowState& state);

/// Largest |g_ij,k - D_k g_ij| over the grid.
double consistency_drift(const StateVector& sv);

inline constexpr double kDefaultDriftTolerance = 1e-8;

/// Throws consistency_drift when the derivative block has wandered further
/// than `drift_tolerance` from the derivatives of the metric block.
FlowState unpack_state(const StateVector& sv, double drift_tolerance = kDefaultDriftTolerance);

/// blockdiag(I_m, [g^{kl} I_m]_{k,l}, I_m).
Eigen::MatrixXd assemble_a0(const SmallMatrix& inverse_metric);
/// g^{jk} I_m coupling derivative block k with the velocity block, mirrored.
Eigen::MatrixXd assemble_aj(const SmallMatrix& inverse_metric, int axis);
Eigen::MatrixXd assemble_a0(const StateVector& sv, std::size_t node);
Eigen::MatrixXd assemble_aj(const StateVector& sv, int axis, std::size_t node);

/// Lower-order part (h | 0 | B3) of the system for every node, laid out like
/// StateVector::data(). For gauge_fixed B3 is the quadratic gauge source
/// built from the evolved derivative block; for the other variants it is the
/// variant right-hand side minus the principal term.
std::vector<double> assemble_b(const StateVector& sv, const RhsVariant& variant);

/// cfl_factor * min over nodes and axes of dx_j / sqrt(lambda_max(g^-1)).
double cfl_dt(const StateVector& sv, double cfl_factor);

struct IntegratorConfig {
  RhsVariant variant;
  double cfl_factor = 0.4;
  double t_end = 1.0;
  std::size_t output_every = 1;
  std::optional<MetricTarget> forcing;
  /// Uniform step instead of the CFL step (still checked against the CFL bound).
  std::optional<double> fixed_dt;
};

void validate_integrator_config(const IntegratorConfig& config);

/// du/dt for the first-order system, including any manufactured forcing.
std::vector<double> time_derivative(const StateVector& sv, const IntegratorConfig& config);

/// One classical RK4 step. Throws cfl_violation if dt exceeds the CFL bound
/// and spd_lost if the metric block leaves the SPD cone.
StateVector rk4_step(const StateVector& sv, double dt, const IntegratorConfig& config);

struct IntegrationSummary {
  std::size_t steps = 0;
  std::size_t rejected_steps = 0;
  double max_drift = 0.0;
};

using StepObserver = std::function<void(const StateVector&, std::size_t step)>;

/// Integrates to config.t_end. The observer sees the initial state, every
/// output_every-th accepted step and the final state.
StateVector integrate(StateVector sv, const IntegratorConfig& config, const StepObserver& observer = {},
                      IntegrationSummary* summary = nullptr);

struct FirstOrderResidual {
  double sup_norm = 0.0;
  std::vector<double> per_node;  ///< max-abs residual over components
};

/// A0 d_t u - A^j d_j u - B at the middle of three uniformly spaced states.
FirstOrderResidual first_order_residual(std::span<const StateVector> history, double dt,
                                        const RhsVariant& variant);

}  // namespace hgf
