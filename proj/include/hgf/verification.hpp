#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hgf/curvature.hpp"
#include "hgf/flow_dynamics.hpp"
#include "hgf/hyperbolic_reduction.hpp"

namespace hgf {

/// Covariant derivative of a covariant tensor (rank 0..5, packed or dense).
/// The new index comes first: (a, i1, ..., ir).
TensorField covariant_derivative(const TensorField& field, const TensorField& christoffel);

/// g^{kl} nabla_k nabla_l on scalars, (0,2) and (0,4) tensors. Packed input
/// gives packed output; everything else comes back dense.
TensorField rough_laplacian(const TensorField& field, const TensorField& inverse_metric,
                            const TensorField& christoffel);

/// Five consecutive states at uniform spacing dt.
struct TrajectoryWindow {
  std::array<FlowState, 5> states;
  double dt = 0.0;
};

/// Builds a window from consecutive states (at least five; the last five are
/// used). Throws history_too_short or invalid_argument for uneven spacing.
TrajectoryWindow make_window(std::span<const FlowState> states, double dt);

/// Pointwise inputs of the curvature wave identities at one instant.
struct WaveInputs {
  TensorField metric;
  TensorField velocity;
  CurvatureBundle curvature;
  TensorField christoffel_rate;  ///< d/dt Gamma^p_il, dense (p, i, l)
  TensorField riemann_rate;      ///< d/dt R_ijkl, dense
  TensorField ricci_rate;        ///< d/dt R_ik, packed
};

/// Inputs at the window centre; time derivatives by central differences of
/// the neighbouring states.
WaveInputs wave_inputs(const TrajectoryWindow& window);

TensorField riemann_wave_rhs(const WaveInputs& in);
TensorField ricci_wave_rhs(const WaveInputs& in);
TensorField scalar_wave_rhs(const WaveInputs& in);

enum class WaveQuantity { riemann, ricci, scalar };
std::string_view to_string(WaveQuantity q);

struct ResidualReport {
  WaveQuantity quantity = WaveQuantity::riemann;
  double sup_norm = 0.0;
  double l2_norm = 0.0;
  double spacing = 0.0;
  double dt = 0.0;
};

ResidualReport riemann_wave_residual(const TrajectoryWindow& window);
ResidualReport ricci_wave_residual(const TrajectoryWindow& window);
ResidualReport scalar_wave_residual(const TrajectoryWindow& window);
ResidualReport wave_residual(const TrajectoryWindow& window, WaveQuantity quantity);

/// Smooth compactly supported bump per axis, exp(1 - 1/(1 - r^2)), centred
/// in the box with radius radius_fraction * L on every axis.
struct BumpProfile {
  double radius_fraction = 0.4;
  std::uint64_t seed = 42;
};

struct StabilityConfig {
  int dim = 5;
  std::size_t points = 8;
  double length = 6.283185307179586;
  double epsilon = 1e-3;
  double horizon = 2.5;
  double cfl_factor = 0.4;
  BumpProfile bump;
  /// Uniform step; when absent it is derived from the perturbation at
  /// reference_epsilon (or epsilon) so runs at different epsilon share a
  /// time grid.
  std::optional<double> dt;
  std::optional<double> reference_epsilon;
};

struct StabilityRunReport {
  double epsilon = 0.0;
  double horizon = 0.0;
  double dt = 0.0;
  std::vector<double> time;
  std::vector<double> sup_history;        ///< max |g - delta|
  std::vector<double> energy_history;     ///< L2 of (g - delta, dg/dt, dg/dx)
  std::vector<double> gamma_trace_history;
  bool blow_up = false;
  std::string blow_up_reason;
  FlowState final_state;
};

/// Seeded symmetric amplitudes c_ij in [-1, 1], row-major over i <= j.
std::vector<double> bump_amplitudes(int dim, std::uint64_t seed);
FlowState stability_initial_state(const StabilityConfig& config);
/// Uniform step used when config.dt is not given.
double stability_dt(const StabilityConfig& config);
StabilityRunReport stability_experiment(const StabilityConfig& config);

/// max over times with sup(eps) > 1e-12 of sup(eps/2) / sup(eps).
double halving_ratio(const StabilityRunReport& full, const StabilityRunReport& half);

enum class Scenario {
  mms_pure,
  mms_einstein_like,
  homothetic_flat,
  residual_thm51,
  residual_thm52,
  residual_thm53,
  equivalence_3_9,
};

std::string_view to_string(Scenario s);
std::optional<Scenario> parse_scenario(std::string_view text);

struct ConvergenceLevel {
  std::size_t points = 0;
  double spacing = 0.0;
  double dt = 0.0;
  double error = 0.0;
  std::optional<double> order;  ///< against the previous level
};

struct ConvergenceReport {
  Scenario scenario = Scenario::mms_pure;
  std::vector<ConvergenceLevel> levels;
  bool exact = false;  ///< every error at rounding level
  double min_order = 0.0;
};

inline constexpr double kExactThreshold = 1e-12;

/// Error of one scenario on one grid (points per axis along the refined axes).
ConvergenceLevel scenario_error(Scenario scenario, std::size_t points);

/// Runs the scenario on every level. Throws insufficient_levels for fewer
/// than three levels.
ConvergenceReport convergence_study(Scenario scenario, std::span<const std::size_t> levels);

/// Least-squares slope of log(error) against log(spacing).
double fitted_order(std::span<const double> spacing, std::span<const double> error);

/// Random smooth conformal 2-metric exp(2 phi) delta from a seed.
TensorField random_conformal_metric(const Grid& grid, std::uint64_t seed, double amplitude = 0.1);

struct IdentityStudy {
  std::vector<std::size_t> points;
  std::vector<double> spacing;
  std::vector<double> error;
  double order = 0.0;
};

/// ||R_ij - (R/2) g_ij||_inf on seeded random conformal 2-metrics.
IdentityStudy einstein_identity_study(std::uint64_t seed, std::span<const std::size_t> levels);

/// Window of a pure_hgf run on flat data with velocity a * delta.
TrajectoryWindow homothetic_flat_window(std::size_t points, double a, double centre_time);
/// Window of a pure_hgf run from exp(2 eps sin x sin y) delta at rest,
/// centred at centre_time with dt = centre_time * 8 / points.
TrajectoryWindow conformal_window(std::size_t points, double epsilon, double centre_time);

/// Deterministic random number source shared by every seeded routine.
class SeededUniform {
 public:
  explicit SeededUniform(std::uint64_t seed);
  /// Uniform on [lo, hi).
  double operator()(double lo, double hi);

 private:
  std::uint64_t state_;
};

/// Random SPD matrix with eigenvalues in [0.2, 5].
SmallMatrix random_spd(int n, SeededUniform& rng);

}  // namespace hgf
