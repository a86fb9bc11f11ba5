#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "hgf/grid_field.hpp"

namespace hgf {

enum class Variant { pure_hgf, gauge_fixed, einstein_like, generalized };

std::string_view to_string(Variant v);
std::optional<Variant> parse_variant(std::string_view text);

/// F_ij(g, dg/dt) for the generalized equation; returns a packed (0,2) field.
using SourceHook = std::function<TensorField(const FlowState&)>;
/// kappa T_ij at a time instant; returns a packed (0,2) field.
using StressHook = std::function<TensorField(const Grid&, double)>;

struct RhsVariant {
  Variant tag = Variant::pure_hgf;
  TensorField alpha;   ///< generalized only: packed (0,2), nonzero everywhere
  SourceHook source;   ///< generalized only
  StressHook stress;   ///< generalized only
};

RhsVariant make_variant(Variant tag);
/// Throws zero_alpha_component, invalid_argument (missing hook) or
/// grid_mismatch when the generalized data is not usable on `grid`.
void validate_variant(const RhsVariant& variant, const Grid& grid);

/// g^{kl} D_l (D_k g_ij), the principal part built from first-derivative
/// stencils so that it matches the first-order system exactly.
TensorField principal_term(const TensorField& inverse_metric, std::span<const TensorField> metric_gradient);

/// Quadratic gauge source
///   -2 g^{kl} g_pq G^p_ik G^q_jl
///   - (g_ik G^k_rs g^{pr} g^{qs} d_j g_pq + g_jk G^k_rs g^{pr} g^{qs} d_i g_pq)
TensorField gauge_source(const TensorField& metric, const TensorField& inverse_metric,
                         std::span<const TensorField> metric_gradient);

/// -1/2 g^{pq} h_ij h_pq + g^{pq} h_ip h_jq.
TensorField velocity_quadratic(const TensorField& inverse_metric, const TensorField& velocity);

TensorField rhs_pure(const FlowState& state);
TensorField rhs_gauge_fixed(const FlowState& state);
TensorField rhs_einstein_like(const FlowState& state);
TensorField rhs_generalized(const FlowState& state, const RhsVariant& variant);
TensorField evaluate_rhs(const FlowState& state, const RhsVariant& variant);

/// g(t) = f(t) g0 with Ric(g0) = lambda g0 and f(0) = 1, f'(0) = a.
struct HomotheticParams {
  double lambda = 0.0;
  double a = 0.0;

  /// Smallest positive root of 1 + a t - lambda t^2, or +inf.
  double degenerate_time() const;
};

double homothetic_factor(const HomotheticParams& params, double t);
double homothetic_rate(const HomotheticParams& params, double t);

struct HomotheticTrace {
  std::vector<double> time;
  std::vector<double> factor;
  std::vector<double> rate;
  /// Time of the first step that landed on f <= kSpdTolerance, if any. The
  /// rejected step is not part of the trace.
  std::optional<double> collapse_time;
};

/// RK4 on f'' = -2 lambda with fixed step; stops at t_end or at collapse.
HomotheticTrace trace_homothetic(const HomotheticParams& params, double dt, double t_end);
/// Same, but throws spd_lost on collapse.
HomotheticTrace integrate_homothetic(const HomotheticParams& params, double dt, double t_end);

/// Time-dependent target metric with analytic time derivatives. Each callback
/// returns the packed component `c` at coordinates x and time t.
struct MetricTarget {
  using Component = std::function<double(std::span<const double>, std::size_t, double)>;
  Component value;
  Component rate;
  Component acceleration;
  /// Optional analytic Ricci tensor of value(., t). When present, sources for
  /// pure_hgf and einstein_like are built from it instead of from the
  /// discrete curvature of the sampled target.
  Component ricci;
};

FlowState sample_target(const MetricTarget& target, const Grid& grid, double t);

/// S = d2g*/dt2 - RHS(g*, dg*/dt) at time t.
TensorField mms_source(const MetricTarget& target, const Grid& grid, const RhsVariant& variant, double t);

/// exp(2 eps sin(x0) cos t) delta_ij on any dimension >= 2, with its analytic
/// Ricci tensor.
MetricTarget conformal_wave_target(int dim, double epsilon);

}  // namespace hgf
