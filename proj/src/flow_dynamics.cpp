#include "hgf/flow_dynamics.hpp"

#include <array>
#include <cmath>
#include <string>

#include "hgf/curvature.hpp"

namespace hgf {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::pure_hgf: return "pure_hgf";
    case Variant::gauge_fixed: return "gauge_fixed";
    case Variant::einstein_like: return "einstein_like";
    case Variant::generalized: return "generalized";
  }
  return "unknown";
}

std::optional<Variant> parse_variant(std::string_view text) {
  for (Variant v : {Variant::pure_hgf, Variant::gauge_fixed, Variant::einstein_like, Variant::generalized})
    if (text == to_string(v)) return v;
  return std::nullopt;
}

RhsVariant make_variant(Variant tag) {
  RhsVariant v;
  v.tag = tag;
  return v;
}

void validate_variant(const RhsVariant& variant, const Grid& grid) {
  if (variant.tag != Variant::generalized) return;
  if (!variant.source || !variant.stress)
    throw Error(ErrorKind::invalid_argument, "generalized variant needs both source and stress hooks");
  const TensorField& alpha = variant.alpha;
  if (!(alpha.grid() == grid)) throw Error(ErrorKind::grid_mismatch, "alpha lives on a different grid");
  if (!alpha.packed() || alpha.valence() != Valence{2, 0})
    throw Error(ErrorKind::shape_mismatch, "alpha must be a symmetric covariant 2-tensor");
  for (std::size_t c = 0; c < alpha.component_count(); ++c)
    for (std::size_t p = 0; p < alpha.node_count(); ++p)
      if (!(std::abs(alpha(c, p)) > 0.0) || !std::isfinite(alpha(c, p)))
        throw Error(ErrorKind::zero_alpha_component,
                    "alpha component " + std::to_string(c) + " vanishes at node " + std::to_string(p));
}

TensorField principal_term(const TensorField& inverse_metric, std::span<const TensorField> metric_gradient) {
  const int n = inverse_metric.dim();
  const std::size_t nodes = inverse_metric.node_count();
  TensorField out = TensorField::covariant_symmetric(inverse_metric.grid());
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) {
      const TensorField second = partial_derivative(metric_gradient[k], l, 1);
      const auto gi = inverse_metric.component(packed_index(k, l, n));
      for (std::size_t c = 0; c < out.component_count(); ++c) {
        auto dst = out.component(c);
        const auto src = second.component(c);
        for (std::size_t p = 0; p < nodes; ++p) dst[p] += gi[p] * src[p];
      }
    }
  return out;
}

TensorField gauge_source(const TensorField& metric, const TensorField& inverse_metric,
                         std::span<const TensorField> dg) {
  const int n = metric.dim();
  if (static_cast<int>(dg.size()) != n) throw Error(ErrorKind::dimension_mismatch, "metric gradient");
  TensorField out = TensorField::covariant_symmetric(metric.grid());
  constexpr int M = kMaxDim;
  std::array<double, M * M> gi{};
  std::array<double, M * M * M> d{};       // d_axis g_ab stored (axis, a, b)
  std::array<double, M * M * M> first{};   // Gamma_{m, rs} (lowered first index)
  std::array<double, M * M * M> half{};    // d_j g_pq g^{qs} stored (j, p, s)
  std::array<double, M * M * M> raised{};  // g^{pr} g^{qs} d_j g_pq stored (j, r, s)
  std::array<double, M * M * M> mixed{};   // g^{pm} Gamma_{m, ik} stored (p, i, k)
  std::array<double, M * M * M> lowered{}; // Gamma_{p, jl} g^{kl} stored (p, j, k)
  auto at = [](int a, int b, int c) { return (a * M + b) * M + c; };
  for (std::size_t node = 0; node < metric.node_count(); ++node) {
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b) {
        const std::size_t c = packed_index(a, b, n);
        gi[a * M + b] = gi[b * M + a] = inverse_metric(c, node);
        for (int axis = 0; axis < n; ++axis) d[at(axis, a, b)] = d[at(axis, b, a)] = dg[axis](c, node);
      }
    for (int m = 0; m < n; ++m)
      for (int r = 0; r < n; ++r)
        for (int s = 0; s < n; ++s)
          first[at(m, r, s)] = 0.5 * (d[at(r, m, s)] + d[at(s, m, r)] - d[at(m, r, s)]);
    for (int j = 0; j < n; ++j)
      for (int p = 0; p < n; ++p)
        for (int s = 0; s < n; ++s) {
          double v = 0.0;
          for (int q = 0; q < n; ++q) v += d[at(j, p, q)] * gi[q * M + s];
          half[at(j, p, s)] = v;
        }
    for (int j = 0; j < n; ++j)
      for (int r = 0; r < n; ++r)
        for (int s = 0; s < n; ++s) {
          double v = 0.0;
          for (int p = 0; p < n; ++p) v += gi[p * M + r] * half[at(j, p, s)];
          raised[at(j, r, s)] = v;
        }
    for (int p = 0; p < n; ++p)
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
          double v = 0.0;
          double w = 0.0;
          for (int m = 0; m < n; ++m) {
            v += gi[p * M + m] * first[at(m, i, k)];
            w += first[at(p, i, m)] * gi[k * M + m];
          }
          mixed[at(p, i, k)] = v;
          lowered[at(p, i, k)] = w;
        }
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double quad = 0.0;
        for (int k = 0; k < n; ++k)
          for (int p = 0; p < n; ++p) quad += mixed[at(p, i, k)] * lowered[at(p, j, k)];
        double cross = 0.0;
        for (int r = 0; r < n; ++r)
          for (int s = 0; s < n; ++s)
            cross += first[at(i, r, s)] * raised[at(j, r, s)] + first[at(j, r, s)] * raised[at(i, r, s)];
        out(packed_index(i, j, n), node) = -2.0 * quad - cross;
      }
  }
  return out;
}

TensorField velocity_quadratic(const TensorField& inverse_metric, const TensorField& velocity) {
  if (!(inverse_metric.grid() == velocity.grid())) throw Error(ErrorKind::grid_mismatch, "velocity_quadratic");
  const int n = velocity.dim();
  TensorField out = TensorField::covariant_symmetric(velocity.grid());
  for (std::size_t node = 0; node < velocity.node_count(); ++node) {
    const SmallMatrix gi = load_symmetric(inverse_metric, node);
    const SmallMatrix h = load_symmetric(velocity, node);
    const double trace = (gi.cwiseProduct(h)).sum();
    const SmallMatrix hgh = h * gi * h;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j)
        out(packed_index(i, j, n), node) = -0.5 * trace * h(i, j) + 0.5 * (hgh(i, j) + hgh(j, i));
  }
  return out;
}

namespace {

TensorField minus_two_ricci(const TensorField& metric) {
  const TensorField inv = metric_inverse(metric);
  TensorField ric = ricci_contracted(christoffel(metric, inv));
  for (double& v : ric.data()) v *= -2.0;
  return ric;
}

void add_into(TensorField& dst, const TensorField& src, double scale = 1.0) {
  auto& a = dst.data();
  const auto& b = src.data();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += scale * b[i];
}

}  // namespace

TensorField rhs_pure(const FlowState& state) {
  validate_flow_state(state);
  return minus_two_ricci(state.metric);
}

TensorField rhs_gauge_fixed(const FlowState& state) {
  validate_flow_state(state);
  const TensorField inv = metric_inverse(state.metric);
  const auto dg = gradient(state.metric);
  TensorField out = principal_term(inv, dg);
  add_into(out, gauge_source(state.metric, inv, dg));
  return out;
}

TensorField rhs_einstein_like(const FlowState& state) {
  validate_flow_state(state);
  TensorField out = minus_two_ricci(state.metric);
  add_into(out, velocity_quadratic(metric_inverse(state.metric), state.velocity));
  return out;
}

TensorField rhs_generalized(const FlowState& state, const RhsVariant& variant) {
  validate_flow_state(state);
  validate_variant(variant, state.metric.grid());
  TensorField out = variant.stress(state.metric.grid(), state.time);
  const TensorField forcing = variant.source(state);
  if (!out.same_shape(state.metric) || !forcing.same_shape(state.metric))
    throw Error(ErrorKind::shape_mismatch, "generalized hooks must return symmetric covariant 2-tensors");
  add_into(out, minus_two_ricci(state.metric));
  add_into(out, forcing, -1.0);
  auto& v = out.data();
  const auto& alpha = variant.alpha.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] /= alpha[i];
  out.check_finite();
  return out;
}

TensorField evaluate_rhs(const FlowState& state, const RhsVariant& variant) {
  switch (variant.tag) {
    case Variant::pure_hgf: return rhs_pure(state);
    case Variant::gauge_fixed: return rhs_gauge_fixed(state);
    case Variant::einstein_like: return rhs_einstein_like(state);
    case Variant::generalized: return rhs_generalized(state, variant);
  }
  throw Error(ErrorKind::unsupported_variant, "unknown variant tag");
}

double HomotheticParams::degenerate_time() const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (lambda == 0.0) return a < 0.0 ? -1.0 / a : inf;
  const double disc = a * a + 4.0 * lambda;
  if (disc < 0.0) return inf;
  // roots of lambda t^2 - a t - 1 = 0; product of roots is -1/lambda
  const double s = std::sqrt(disc);
  const double q = a >= 0.0 ? 0.5 * (a + s) : 0.5 * (a - s);
  double best = inf;
  for (double r : {q / lambda, q != 0.0 ? -1.0 / q : inf})
    if (r > 0.0 && r < best) best = r;
  return best;
}

double homothetic_factor(const HomotheticParams& params, double t) {
  if (t >= params.degenerate_time())
    throw Error(ErrorKind::past_degenerate_time, "t = " + std::to_string(t) + " is past the degenerate time");
  return 1.0 + params.a * t - params.lambda * t * t;
}

double homothetic_rate(const HomotheticParams& params, double t) {
  if (t >= params.degenerate_time())
    throw Error(ErrorKind::past_degenerate_time, "t = " + std::to_string(t) + " is past the degenerate time");
  return params.a - 2.0 * params.lambda * t;
}

HomotheticTrace integrate_homothetic(const HomotheticParams& params, double dt, double t_end) {
  HomotheticTrace trace = trace_homothetic(params, dt, t_end);
  if (trace.collapse_time)
    throw Error(ErrorKind::spd_lost, "conformal factor left the SPD cone at t = " + std::to_string(*trace.collapse_time));
  return trace;
}

HomotheticTrace trace_homothetic(const HomotheticParams& params, double dt, double t_end) {
  if (!(dt > 0.0) || !(t_end > 0.0)) throw Error(ErrorKind::invalid_argument, "dt and t_end must be positive");
  HomotheticTrace trace;
  double t = 0.0, f = 1.0, r = params.a;
  const double acc = -2.0 * params.lambda;
  trace.time.push_back(t);
  trace.factor.push_back(f);
  trace.rate.push_back(r);
  while (t < t_end) {
    const double h = std::min(dt, t_end - t);
    // classical RK4 for (f, f') with constant f''
    const double k1f = r, k1r = acc;
    const double k2f = r + 0.5 * h * k1r, k2r = acc;
    const double k3f = r + 0.5 * h * k2r, k3r = acc;
    const double k4f = r + h * k3r, k4r = acc;
    const double f_next = f + h / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f);
    const double r_next = r + h / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r);
    if (!(f_next > kSpdTolerance)) {
      trace.collapse_time = t + h;
      break;
    }
    f = f_next;
    r = r_next;
    t += h;
    trace.time.push_back(t);
    trace.factor.push_back(f);
    trace.rate.push_back(r);
  }
  return trace;
}

namespace {

TensorField sample_component(const MetricTarget::Component& fn, const Grid& grid, double t) {
  TensorField out = TensorField::covariant_symmetric(grid);
  std::array<double, kMaxDim> x{};
  const std::span<double> xs(x.data(), static_cast<std::size_t>(grid.dim()));
  for (std::size_t p = 0; p < grid.node_count(); ++p) {
    grid.coordinates(p, xs);
    for (std::size_t c = 0; c < out.component_count(); ++c) out(c, p) = fn(xs, c, t);
  }
  out.check_finite();
  return out;
}

}  // namespace

FlowState sample_target(const MetricTarget& target, const Grid& grid, double t) {
  return make_flow_state(t, sample_component(target.value, grid, t), sample_component(target.rate, grid, t));
}

TensorField mms_source(const MetricTarget& target, const Grid& grid, const RhsVariant& variant, double t) {
  const FlowState state = sample_target(target, grid, t);
  TensorField source = sample_component(target.acceleration, grid, t);
  const bool analytic =
      target.ricci && (variant.tag == Variant::pure_hgf || variant.tag == Variant::einstein_like);
  if (analytic) {
    add_into(source, sample_component(target.ricci, grid, t), 2.0);
    if (variant.tag == Variant::einstein_like)
      add_into(source, velocity_quadratic(metric_inverse(state.metric), state.velocity), -1.0);
  } else {
    add_into(source, evaluate_rhs(state, variant), -1.0);
  }
  return source;
}

MetricTarget conformal_wave_target(int dim, double epsilon) {
  if (dim < 2) throw Error(ErrorKind::unsupported_dimension, "conformal wave target needs dim >= 2");
  MetricTarget t;
  // phi = eps sin(x0) cos(t), g = exp(2 phi) delta
  auto diag = [dim](std::size_t c) {
    const auto [i, j] = packed_pair(c, dim);
    return std::pair{i == j, i};
  };
  t.value = [=](std::span<const double> x, std::size_t c, double time) {
    const double phi = epsilon * std::sin(x[0]) * std::cos(time);
    return diag(c).first ? std::exp(2.0 * phi) : 0.0;
  };
  t.rate = [=](std::span<const double> x, std::size_t c, double time) {
    const double phi = epsilon * std::sin(x[0]) * std::cos(time);
    const double phi_t = -epsilon * std::sin(x[0]) * std::sin(time);
    return diag(c).first ? 2.0 * phi_t * std::exp(2.0 * phi) : 0.0;
  };
  t.acceleration = [=](std::span<const double> x, std::size_t c, double time) {
    const double phi = epsilon * std::sin(x[0]) * std::cos(time);
    const double phi_t = -epsilon * std::sin(x[0]) * std::sin(time);
    return diag(c).first ? (-2.0 * phi + 4.0 * phi_t * phi_t) * std::exp(2.0 * phi) : 0.0;
  };
  t.ricci = [=](std::span<const double> x, std::size_t c, double time) {
    const auto [on_diag, i] = diag(c);
    if (!on_diag) return 0.0;
    const double phi_x = epsilon * std::cos(x[0]) * std::cos(time);
    const double phi_xx = -epsilon * std::sin(x[0]) * std::cos(time);
    if (i == 0) return -(dim - 1) * phi_xx;
    return -phi_xx - (dim - 2) * phi_x * phi_x;
  };
  return t;
}

}  // namespace hgf
