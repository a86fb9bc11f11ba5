#include "hgf/verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

namespace hgf {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::size_t ipow(int base, int exponent) {
  std::size_t r = 1;
  for (int e = 0; e < exponent; ++e) r *= static_cast<std::size_t>(base);
  return r;
}

// Row-major digits of a flat multi-index.
void digits(std::size_t flat, int n, int rank, int* out) {
  for (int s = rank - 1; s >= 0; --s) {
    out[s] = static_cast<int>(flat % static_cast<std::size_t>(n));
    flat /= static_cast<std::size_t>(n);
  }
}

std::size_t undigits(const int* d, int n, int rank) {
  std::size_t f = 0;
  for (int s = 0; s < rank; ++s) f = f * static_cast<std::size_t>(n) + static_cast<std::size_t>(d[s]);
  return f;
}

TensorField to_dense(const TensorField& field) {
  if (!field.packed()) return field;
  const int n = field.dim();
  TensorField out(field.grid(), field.valence());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const auto src = field.component(packed_index(i, j, n));
      auto dst = out.component(static_cast<std::size_t>(i * n + j));
      std::copy(src.begin(), src.end(), dst.begin());
    }
  return out;
}

TensorField to_packed(const TensorField& dense) {
  const int n = dense.dim();
  TensorField out = TensorField::covariant_symmetric(dense.grid());
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const auto src = dense.component(static_cast<std::size_t>(i * n + j));
      auto dst = out.component(packed_index(i, j, n));
      std::copy(src.begin(), src.end(), dst.begin());
    }
  return out;
}

void require_covariant(const TensorField& field, int max_rank) {
  if (field.valence().contravariant != 0 || field.rank() > max_rank)
    throw Error(ErrorKind::unsupported_valence,
                "covariant tensors of rank <= " + std::to_string(max_rank) + " only");
}

inline std::size_t f3(int n, int a, int b, int c) { return (static_cast<std::size_t>(a) * n + b) * n + c; }
inline std::size_t f4(int n, int a, int b, int c, int d) {
  return ((static_cast<std::size_t>(a) * n + b) * n + c) * n + d;
}

double cell_volume(const Grid& grid) {
  double v = 1.0;
  for (int a = 0; a < grid.dim(); ++a) v *= grid.spacing(a);
  return v;
}

TensorField difference(const TensorField& a, const TensorField& b, double scale) {
  TensorField out = a;
  auto& d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = (d[i] - b.data()[i]) * scale;
  return out;
}

}  // namespace

TensorField covariant_derivative(const TensorField& field, const TensorField& gamma) {
  require_covariant(field, 5);
  if (!(field.grid() == gamma.grid())) throw Error(ErrorKind::grid_mismatch, "covariant_derivative");
  const TensorField t = to_dense(field);
  const int n = t.dim();
  const int r = t.rank();
  const std::size_t comps = ipow(n, r);
  const std::size_t nodes = t.node_count();
  TensorField out(t.grid(), {r + 1, 0});
  for (int a = 0; a < n; ++a) {
    const TensorField d = partial_derivative(t, a, 1);
    for (std::size_t I = 0; I < comps; ++I) {
      int idx[6];
      digits(I, n, r, idx);
      auto dst = out.component(static_cast<std::size_t>(a) * comps + I);
      const auto src = d.component(I);
      std::copy(src.begin(), src.end(), dst.begin());
      for (int s = 0; s < r; ++s) {
        const int keep = idx[s];
        for (int p = 0; p < n; ++p) {
          idx[s] = p;
          const auto tp = t.component(undigits(idx, n, r));
          const auto g = gamma.component(f3(n, p, a, keep));
          for (std::size_t q = 0; q < nodes; ++q) dst[q] -= g[q] * tp[q];
        }
        idx[s] = keep;
      }
    }
  }
  return out;
}

TensorField rough_laplacian(const TensorField& field, const TensorField& inverse_metric, const TensorField& gamma) {
  require_covariant(field, 4);
  const int r = field.rank();
  if (r != 0 && r != 2 && r != 4) throw Error(ErrorKind::unsupported_valence, "rank 0, 2 or 4 only");
  if (!(field.grid() == inverse_metric.grid())) throw Error(ErrorKind::grid_mismatch, "rough_laplacian");
  const int n = field.dim();
  const std::size_t comps = ipow(n, r);
  const std::size_t nodes = field.node_count();
  const TensorField second = covariant_derivative(covariant_derivative(field, gamma), gamma);
  TensorField out(field.grid(), {r, 0});
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) {
      const auto gi = inverse_metric.component(packed_index(k, l, n));
      for (std::size_t I = 0; I < comps; ++I) {
        const auto src = second.component((static_cast<std::size_t>(k) * n + l) * comps + I);
        auto dst = out.component(I);
        for (std::size_t q = 0; q < nodes; ++q) dst[q] += gi[q] * src[q];
      }
    }
  return field.packed() ? to_packed(out) : out;
}

TrajectoryWindow make_window(std::span<const FlowState> states, double dt) {
  if (states.size() < 5) throw Error(ErrorKind::history_too_short, "a window needs five states");
  if (!(dt > 0.0)) throw Error(ErrorKind::invalid_argument, "dt must be positive");
  TrajectoryWindow w;
  w.dt = dt;
  const std::size_t first = states.size() - 5;
  for (std::size_t i = 0; i < 5; ++i) {
    w.states[i] = states[first + i];
    validate_flow_state(w.states[i]);
    if (!(w.states[i].metric.grid() == w.states[0].metric.grid()))
      throw Error(ErrorKind::grid_mismatch, "window states live on different grids");
    if (i > 0 && std::abs(w.states[i].time - w.states[i - 1].time - dt) > 1e-9 * dt)
      throw Error(ErrorKind::invalid_argument, "window states are not spaced by dt");
  }
  return w;
}

WaveInputs wave_inputs(const TrajectoryWindow& window) {
  const CurvatureBundle before = compute_curvature(window.states[1].metric);
  const CurvatureBundle after = compute_curvature(window.states[3].metric);
  WaveInputs in;
  in.metric = window.states[2].metric;
  in.velocity = window.states[2].velocity;
  in.curvature = compute_curvature(in.metric);
  const double s = 1.0 / (2.0 * window.dt);
  in.christoffel_rate = difference(after.christoffel, before.christoffel, s);
  in.riemann_rate = difference(after.riemann_low, before.riemann_low, s);
  in.ricci_rate = difference(after.ricci, before.ricci, s);
  return in;
}

TensorField riemann_wave_rhs(const WaveInputs& in) {
  const CurvatureBundle& c = in.curvature;
  const int n = in.metric.dim();
  const TensorField& inv = c.inverse_metric;
  TensorField out = rough_laplacian(c.riemann_low, inv, c.christoffel);
  const TensorField b = b_tensor(c.riemann_low, inv);
  std::vector<double> ric_mixed(static_cast<std::size_t>(n) * n);  // g^{pq} R_qi stored (p, i)
  for (std::size_t node = 0; node < in.metric.node_count(); ++node) {
    auto R = [&](int i, int j, int k, int l) { return c.riemann_low(f4(n, i, j, k, l), node); };
    auto B = [&](int i, int j, int k, int l) { return b(f4(n, i, j, k, l), node); };
    auto G = [&](int p, int i, int l) { return in.christoffel_rate(f3(n, p, i, l), node); };
    auto g = [&](int a, int d) { return in.metric(packed_index(a, d, n), node); };
    for (int p = 0; p < n; ++p)
      for (int i = 0; i < n; ++i) {
        double v = 0.0;
        for (int q = 0; q < n; ++q) v += inv(packed_index(p, q, n), node) * c.ricci(packed_index(q, i, n), node);
        ric_mixed[static_cast<std::size_t>(p * n + i)] = v;
      }
    auto Rc = [&](int p, int i) { return ric_mixed[static_cast<std::size_t>(p * n + i)]; };
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            double v = 2.0 * (B(i, j, k, l) - B(i, j, l, k) - B(i, l, j, k) + B(i, k, j, l));
            for (int p = 0; p < n; ++p)
              v -= R(p, j, k, l) * Rc(p, i) + R(i, p, k, l) * Rc(p, j) + R(i, j, p, l) * Rc(p, k) +
                   R(i, j, k, p) * Rc(p, l);
            double quad = 0.0;
            for (int p = 0; p < n; ++p)
              for (int q = 0; q < n; ++q)
                quad += g(p, q) * (G(p, i, l) * G(q, j, k) - G(p, j, l) * G(q, i, k));
            out(f4(n, i, j, k, l), node) += v + 2.0 * quad;
          }
  }
  return out;
}

namespace {

// Per-node raised quantities shared by the Ricci and scalar identities.
struct Raised {
  SmallMatrix inv, g, h, ric, h_up, hh_up, ric_up;
};

Raised raise_at(const WaveInputs& in, std::size_t node) {
  Raised r;
  r.inv = load_symmetric(in.curvature.inverse_metric, node);
  r.g = load_symmetric(in.metric, node);
  r.h = load_symmetric(in.velocity, node);
  r.ric = load_symmetric(in.curvature.ricci, node);
  r.h_up = r.inv * r.h * r.inv;
  r.hh_up = r.inv * r.h * r.inv * r.h * r.inv;
  r.ric_up = r.inv * r.ric * r.inv;
  return r;
}

}  // namespace

TensorField ricci_wave_rhs(const WaveInputs& in) {
  const CurvatureBundle& c = in.curvature;
  const int n = in.metric.dim();
  TensorField out = rough_laplacian(c.ricci, c.inverse_metric, c.christoffel);
  for (std::size_t node = 0; node < in.metric.node_count(); ++node) {
    const Raised r = raise_at(in, node);
    auto R = [&](int i, int j, int k, int l) { return c.riemann_low(f4(n, i, j, k, l), node); };
    auto Rt = [&](int i, int j, int k, int l) { return in.riemann_rate(f4(n, i, j, k, l), node); };
    auto G = [&](int p, int i, int l) { return in.christoffel_rate(f3(n, p, i, l), node); };
    const SmallMatrix ric_sq = r.ric * r.inv * r.ric;
    for (int i = 0; i < n; ++i)
      for (int k = i; k < n; ++k) {
        double v = -2.0 * ric_sq(i, k);
        for (int p = 0; p < n; ++p)
          for (int q = 0; q < n; ++q) v += 2.0 * R(p, i, q, k) * r.ric_up(p, q);
        double quad = 0.0;
        for (int j = 0; j < n; ++j)
          for (int l = 0; l < n; ++l) {
            double inner = 0.0;
            for (int p = 0; p < n; ++p)
              for (int q = 0; q < n; ++q)
                inner += r.g(p, q) * (G(p, i, l) * G(q, j, k) - G(p, j, l) * G(q, i, k));
            quad += r.inv(j, l) * inner;
            v += -2.0 * r.h_up(j, l) * Rt(i, j, k, l) + 2.0 * r.hh_up(j, l) * R(i, j, k, l);
          }
        out(packed_index(i, k, n), node) += v + 2.0 * quad;
      }
  }
  return out;
}

TensorField scalar_wave_rhs(const WaveInputs& in) {
  const CurvatureBundle& c = in.curvature;
  const int n = in.metric.dim();
  TensorField out = rough_laplacian(c.scalar, c.inverse_metric, c.christoffel);
  const TensorField dh = covariant_derivative(in.velocity, c.christoffel);  // (a, i, j)
  for (std::size_t node = 0; node < in.metric.node_count(); ++node) {
    const Raised r = raise_at(in, node);
    auto D = [&](int a, int i, int j) { return dh(f3(n, a, i, j), node); };
    auto Rt = [&](int i, int j, int k, int l) { return in.riemann_rate(f4(n, i, j, k, l), node); };
    // fully raised nabla h, trace gradient and divergence
    std::vector<double> up(static_cast<std::size_t>(n) * n * n, 0.0);
    for (int a = 0; a < n; ++a)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double v = 0.0;
          for (int b = 0; b < n; ++b)
            for (int k = 0; k < n; ++k)
              for (int l = 0; l < n; ++l) v += r.inv(a, b) * r.inv(i, k) * r.inv(j, l) * D(b, k, l);
          up[f3(n, a, i, j)] = v;
        }
    std::vector<double> trace_grad(n, 0.0), divergence(n, 0.0);
    for (int a = 0; a < n; ++a)
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
          trace_grad[a] += r.inv(i, k) * D(a, i, k);
          divergence[a] += r.inv(i, k) * D(i, k, a);
        }
    double v = 2.0 * (r.ric.cwiseProduct(r.ric_up)).sum();
    double t1 = 0.0, t4 = 0.0;
    for (int a = 0; a < n; ++a)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          t1 += D(a, i, j) * up[f3(n, a, i, j)];
          t4 += D(a, i, j) * up[f3(n, j, i, a)];
        }
    double t2 = 0.0, t3 = 0.0, t5 = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        t2 += r.inv(a, b) * trace_grad[a] * trace_grad[b];
        t3 += r.inv(a, b) * trace_grad[a] * divergence[b];
        t5 += r.inv(a, b) * divergence[a] * divergence[b];
      }
    double t6 = 0.0, t7 = 0.0;
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) {
        t7 += r.h_up(i, k) * in.ricci_rate(packed_index(i, k, n), node);
        for (int j = 0; j < n; ++j)
          for (int l = 0; l < n; ++l) t6 += r.inv(i, k) * r.h_up(j, l) * Rt(i, j, k, l);
      }
    const double t8 = (r.ric.cwiseProduct(r.hh_up)).sum();
    v += 1.5 * t1 - 0.5 * t2 + 2.0 * t3 - t4 - 2.0 * t5 - 2.0 * t6 - 2.0 * t7 + 4.0 * t8;
    out(0, node) += v;
  }
  return out;
}

std::string_view to_string(WaveQuantity q) {
  switch (q) {
    case WaveQuantity::riemann: return "riemann";
    case WaveQuantity::ricci: return "ricci";
    case WaveQuantity::scalar: return "scalar";
  }
  return "unknown";
}

ResidualReport wave_residual(const TrajectoryWindow& window, WaveQuantity quantity) {
  const WaveInputs in = wave_inputs(window);
  const CurvatureBundle before = compute_curvature(window.states[1].metric);
  const CurvatureBundle after = compute_curvature(window.states[3].metric);
  auto pick = [quantity](const CurvatureBundle& b) -> const TensorField& {
    switch (quantity) {
      case WaveQuantity::riemann: return b.riemann_low;
      case WaveQuantity::ricci: return b.ricci;
      case WaveQuantity::scalar: break;
    }
    return b.scalar;
  };
  TensorField rhs;
  switch (quantity) {
    case WaveQuantity::riemann: rhs = riemann_wave_rhs(in); break;
    case WaveQuantity::ricci: rhs = ricci_wave_rhs(in); break;
    case WaveQuantity::scalar: rhs = scalar_wave_rhs(in); break;
  }
  const auto& q0 = pick(before).data();
  const auto& q1 = pick(in.curvature).data();
  const auto& q2 = pick(after).data();
  const double inv_dt2 = 1.0 / (window.dt * window.dt);
  ResidualReport rep;
  rep.quantity = quantity;
  rep.dt = window.dt;
  rep.spacing = in.metric.grid().smallest_spacing();
  const int n = in.metric.dim();
  double sum = 0.0;
  for (std::size_t i = 0; i < q1.size(); ++i) {
    const double lhs = (q2[i] - 2.0 * q1[i] + q0[i]) * inv_dt2;
    const double res = lhs - rhs.data()[i];
    rep.sup_norm = std::max(rep.sup_norm, std::abs(res));
    // packed off-diagonal entries stand for two tensor components
    double weight = 1.0;
    if (rhs.packed()) {
      const auto [a, b] = packed_pair(i / in.metric.node_count(), n);
      weight = a == b ? 1.0 : 2.0;
    }
    sum += weight * res * res;
  }
  rep.l2_norm = std::sqrt(sum * cell_volume(in.metric.grid()));
  if (!std::isfinite(rep.sup_norm) || !std::isfinite(rep.l2_norm))
    throw Error(ErrorKind::non_finite, "wave residual is not finite");
  return rep;
}

ResidualReport riemann_wave_residual(const TrajectoryWindow& w) { return wave_residual(w, WaveQuantity::riemann); }
ResidualReport ricci_wave_residual(const TrajectoryWindow& w) { return wave_residual(w, WaveQuantity::ricci); }
ResidualReport scalar_wave_residual(const TrajectoryWindow& w) { return wave_residual(w, WaveQuantity::scalar); }

// ---------------------------------------------------------------------------
// Seeded randomness

SeededUniform::SeededUniform(std::uint64_t seed) : state_(seed) {}

double SeededUniform::operator()(double lo, double hi) {
  // one mt19937_64 draw per call, reseeded from the running state so the
  // sequence is fully determined by the seed and call order
  std::mt19937_64 engine(state_);
  const std::uint64_t bits = engine();
  state_ = engine();
  const double unit = static_cast<double>(bits >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * unit;
}

SmallMatrix random_spd(int n, SeededUniform& rng) {
  SmallMatrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng(-1.0, 1.0);
  const SmallMatrix q = Eigen::HouseholderQR<SmallMatrix>(a).householderQ();
  SmallMatrix d = SmallMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i) d(i, i) = rng(0.2, 5.0);
  SmallMatrix g = q * d * q.transpose();
  return 0.5 * (g + g.transpose());
}

// ---------------------------------------------------------------------------
// Stability experiment

std::vector<double> bump_amplitudes(int dim, std::uint64_t seed) {
  SeededUniform rng(seed);
  std::vector<double> c(packed_count(dim));
  for (double& v : c) v = rng(-1.0, 1.0);
  return c;
}

namespace {

double bump_value(std::span<const double> x, double length, double radius) {
  double v = 1.0;
  for (double xa : x) {
    const double r = (xa - 0.5 * length) / radius;
    if (std::abs(r) >= 1.0) return 0.0;
    v *= std::exp(1.0 - 1.0 / (1.0 - r * r));
  }
  return v;
}

void check_stability_config(const StabilityConfig& c) {
  if (c.dim < 2) throw Error(ErrorKind::unsupported_dimension, "stability experiment needs dim >= 2");
  if (!(c.bump.radius_fraction > 0.0 && c.bump.radius_fraction < 0.5))
    throw Error(ErrorKind::invalid_argument, "bump radius must keep the support strictly inside the box");
  if (!(c.epsilon >= 0.0)) throw Error(ErrorKind::invalid_argument, "epsilon must be non-negative");
  if (!(c.horizon > 0.0)) throw Error(ErrorKind::invalid_argument, "horizon must be positive");
}

FlowState bump_state(const StabilityConfig& config, double epsilon) {
  const Grid grid = make_grid(config.dim, std::vector<std::size_t>(config.dim, config.points),
                              std::vector<double>(config.dim, config.length));
  const auto amp = bump_amplitudes(config.dim, config.bump.seed);
  const double radius = config.bump.radius_fraction * config.length;
  TensorField g = TensorField::covariant_symmetric(grid);
  std::vector<double> x(config.dim);
  for (std::size_t p = 0; p < grid.node_count(); ++p) {
    grid.coordinates(p, x);
    const double b = bump_value(x, config.length, radius);
    for (std::size_t c = 0; c < g.component_count(); ++c) {
      const auto [i, j] = packed_pair(c, config.dim);
      g(c, p) = (i == j ? 1.0 : 0.0) + epsilon * amp[c] * b;
    }
  }
  return make_flow_state(0.0, std::move(g), TensorField::covariant_symmetric(grid));
}

double deviation_sup(const TensorField& g) {
  const int n = g.dim();
  double s = 0.0;
  for (std::size_t c = 0; c < g.component_count(); ++c) {
    const auto [i, j] = packed_pair(c, n);
    const double id = i == j ? 1.0 : 0.0;
    for (double v : g.component(c)) s = std::max(s, std::abs(v - id));
  }
  return s;
}

double energy(const StateVector& sv) {
  const int n = sv.dim();
  const std::size_t nodes = sv.grid().node_count();
  const std::size_t m = sv.block_size();
  double sum = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    const auto [i, j] = packed_pair(c, n);
    const double id = i == j ? 1.0 : 0.0;
    const double w = i == j ? 1.0 : 2.0;
    for (std::size_t p = 0; p < nodes; ++p) {
      const double dg = sv(sv.metric_offset() + c, p) - id;
      const double h = sv(sv.velocity_offset() + c, p);
      double d2 = 0.0;
      for (int k = 0; k < n; ++k) {
        const double d = sv(sv.derivative_offset(k) + c, p);
        d2 += d * d;
      }
      sum += w * (dg * dg + h * h + d2);
    }
  }
  return std::sqrt(sum * cell_volume(sv.grid()));
}

double gamma_trace_sup(const TensorField& metric) {
  const TensorField inv = metric_inverse(metric);
  return gamma_trace(christoffel(metric, inv), inv).sup_norm();
}

}  // namespace

FlowState stability_initial_state(const StabilityConfig& config) {
  check_stability_config(config);
  return bump_state(config, config.epsilon);
}

double stability_dt(const StabilityConfig& config) {
  check_stability_config(config);
  if (config.dt) return *config.dt;
  const FlowState ref = bump_state(config, config.reference_epsilon.value_or(config.epsilon));
  const double bound = cfl_dt(pack_state(ref), config.cfl_factor);
  const double steps = std::ceil(config.horizon / (0.9 * bound));
  return config.horizon / steps;
}

StabilityRunReport stability_experiment(const StabilityConfig& config) {
  const FlowState initial = stability_initial_state(config);
  const double speed = 1.0 / std::sqrt(min_metric_eigenvalue(initial.metric));
  const double wrap = config.length / (2.0 * speed);
  if (config.horizon > wrap)
    throw Error(ErrorKind::wrap_around_exceeded,
                "horizon " + std::to_string(config.horizon) + " exceeds wrap-around time " + std::to_string(wrap));
  StabilityRunReport rep;
  rep.epsilon = config.epsilon;
  rep.horizon = config.horizon;
  rep.dt = stability_dt(config);
  IntegratorConfig ic;
  ic.variant = make_variant(Variant::gauge_fixed);
  ic.cfl_factor = config.cfl_factor;
  ic.t_end = config.horizon;
  StateVector sv = pack_state(initial);
  auto record = [&](const StateVector& s) {
    const TensorField g = s.metric();
    rep.time.push_back(s.time());
    rep.sup_history.push_back(deviation_sup(g));
    rep.energy_history.push_back(energy(s));
    rep.gamma_trace_history.push_back(gamma_trace_sup(g));
  };
  record(sv);
  const auto steps = static_cast<std::size_t>(std::llround(config.horizon / rep.dt));
  for (std::size_t k = 0; k < steps; ++k) {
    try {
      sv = rk4_step(sv, rep.dt, ic);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::spd_lost) throw;
      rep.blow_up = true;
      rep.blow_up_reason = e.what();
      break;
    }
    record(sv);
    if (rep.sup_history.back() > 100.0 * config.epsilon) {
      rep.blow_up = true;
      rep.blow_up_reason = "sup-norm exceeded 100 epsilon";
      break;
    }
  }
  rep.final_state = FlowState{sv.time(), sv.metric(), sv.velocity()};
  return rep;
}

double halving_ratio(const StabilityRunReport& full, const StabilityRunReport& half) {
  const std::size_t len = std::min(full.time.size(), half.time.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    if (std::abs(full.time[i] - half.time[i]) > 1e-12 * std::max(1.0, full.time[i]))
      throw Error(ErrorKind::invalid_argument, "stability runs do not share a time grid");
    if (full.sup_history[i] > 1e-12) worst = std::max(worst, half.sup_history[i] / full.sup_history[i]);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Windows and convergence scenarios

namespace {

Grid periodic_square(std::size_t points) {
  return make_grid(2, {points, points}, {kTwoPi, kTwoPi});
}

FlowState conformal_state(const Grid& grid, double epsilon) {
  TensorField g = TensorField::covariant_symmetric(grid);
  std::array<double, 2> x{};
  for (std::size_t p = 0; p < grid.node_count(); ++p) {
    grid.coordinates(p, x);
    const double f = std::exp(2.0 * epsilon * std::sin(x[0]) * std::sin(x[1]));
    g(0, p) = f;
    g(2, p) = f;
  }
  return make_flow_state(0.0, std::move(g), TensorField::covariant_symmetric(grid));
}

std::size_t centre_steps(std::size_t points) {
  if (points < 16 || points % 8 != 0)
    throw Error(ErrorKind::invalid_argument, "window grids need a multiple of 8 points, at least 16");
  return points / 8;
}

// States at steps K - half .. K + half of a fixed-dt run.
std::vector<StateVector> run_window(const FlowState& initial, Variant variant, double dt, std::size_t centre,
                                    std::size_t half) {
  IntegratorConfig ic;
  ic.variant = make_variant(variant);
  ic.fixed_dt = dt;
  ic.t_end = dt * static_cast<double>(centre + half);
  std::vector<StateVector> out;
  StateVector sv = pack_state(initial);
  for (std::size_t step = 0; step <= centre + half; ++step) {
    if (step + half >= centre) out.push_back(sv);
    if (step < centre + half) {
      sv = rk4_step(sv, dt, ic);
      sv.set_time(dt * static_cast<double>(step + 1));
    }
  }
  return out;
}

TrajectoryWindow window_from(const std::vector<StateVector>& svs, double dt) {
  std::vector<FlowState> states;
  for (const auto& sv : svs) states.push_back(unpack_state(sv));
  return make_window(states, dt);
}

}  // namespace

TrajectoryWindow homothetic_flat_window(std::size_t points, double a, double centre_time) {
  const Grid grid = periodic_square(points);
  TensorField g = TensorField::covariant_symmetric(grid), h = TensorField::covariant_symmetric(grid);
  for (std::size_t p = 0; p < grid.node_count(); ++p) {
    g(0, p) = g(2, p) = 1.0;
    h(0, p) = h(2, p) = a;
  }
  const std::size_t k = centre_steps(points);
  const double dt = centre_time / static_cast<double>(k);
  return window_from(run_window(make_flow_state(0.0, g, h), Variant::pure_hgf, dt, k, 2), dt);
}

TrajectoryWindow conformal_window(std::size_t points, double epsilon, double centre_time) {
  const Grid grid = periodic_square(points);
  const std::size_t k = centre_steps(points);
  const FlowState initial = conformal_state(grid, epsilon);
  if (centre_time == 0.0) {
    // zero initial velocity and no first-order time term: g(-t) = g(t)
    const double dt = 0.25 * 8.0 / static_cast<double>(points);
    const auto fwd = run_window(initial, Variant::pure_hgf, dt, 0, 2);
    std::vector<FlowState> states;
    for (int s = 2; s >= 1; --s) {
      FlowState mirror = unpack_state(fwd[static_cast<std::size_t>(s)]);
      mirror.time = -mirror.time;
      for (double& v : mirror.velocity.data()) v = -v;
      states.push_back(std::move(mirror));
    }
    for (std::size_t s = 0; s < 3; ++s) states.push_back(unpack_state(fwd[s]));
    return make_window(states, dt);
  }
  const double dt = centre_time / static_cast<double>(k);
  return window_from(run_window(initial, Variant::pure_hgf, dt, k, 2), dt);
}

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::mms_pure: return "mms_pure";
    case Scenario::mms_einstein_like: return "mms_einstein_like";
    case Scenario::homothetic_flat: return "homothetic_flat";
    case Scenario::residual_thm51: return "residual_thm51";
    case Scenario::residual_thm52: return "residual_thm52";
    case Scenario::residual_thm53: return "residual_thm53";
    case Scenario::equivalence_3_9: return "equivalence_3_9";
  }
  return "unknown";
}

std::optional<Scenario> parse_scenario(std::string_view text) {
  for (Scenario s : {Scenario::mms_pure, Scenario::mms_einstein_like, Scenario::homothetic_flat,
                     Scenario::residual_thm51, Scenario::residual_thm52, Scenario::residual_thm53,
                     Scenario::equivalence_3_9})
    if (text == to_string(s)) return s;
  return std::nullopt;
}

namespace {

constexpr double kResidualEpsilon = 1e-2;
constexpr double kResidualCentre = 0.25;
constexpr double kMmsEpsilon = 0.1;
constexpr double kMmsEnd = 1.0;
constexpr double kHomotheticRate = 0.5;

ConvergenceLevel mms_error(Variant variant, std::size_t points) {
  // einstein_like runs in 3D so its velocity terms do not cancel; the target
  // only varies along the first axis, so the other axes stay coarse
  const bool three_d = variant == Variant::einstein_like;
  const Grid grid = three_d ? make_grid(3, {points, 8, 8}, {kTwoPi, kTwoPi, kTwoPi}) : periodic_square(points);
  const MetricTarget target = conformal_wave_target(grid.dim(), kMmsEpsilon);
  IntegratorConfig ic;
  ic.variant = make_variant(variant);
  ic.forcing = target;
  ic.t_end = kMmsEnd;
  const double spacing = grid.smallest_spacing();
  ic.fixed_dt = kMmsEnd / std::ceil(kMmsEnd / (0.3 * spacing));
  const StateVector final_state = integrate(pack_state(sample_target(target, grid, 0.0)), ic);
  const TensorField exact = sample_target(target, grid, kMmsEnd).metric;
  const TensorField g = final_state.metric();
  double err = 0.0;
  for (std::size_t i = 0; i < g.data().size(); ++i) err = std::max(err, std::abs(g.data()[i] - exact.data()[i]));
  return {points, spacing, *ic.fixed_dt, err, std::nullopt};
}

ConvergenceLevel homothetic_error(std::size_t points) {
  const Grid grid = periodic_square(points);
  TensorField g = TensorField::covariant_symmetric(grid), h = TensorField::covariant_symmetric(grid);
  for (std::size_t p = 0; p < grid.node_count(); ++p) {
    g(0, p) = g(2, p) = 1.0;
    h(0, p) = h(2, p) = kHomotheticRate;
  }
  IntegratorConfig ic;
  ic.variant = make_variant(Variant::pure_hgf);
  ic.t_end = 1.0;
  IntegrationSummary summary;
  const StateVector out = integrate(pack_state(make_flow_state(0.0, g, h)), ic, {}, &summary);
  const double f = homothetic_factor({0.0, kHomotheticRate}, out.time());
  const TensorField m = out.metric();
  double err = 0.0;
  for (std::size_t p = 0; p < grid.node_count(); ++p)
    err = std::max({err, std::abs(m(0, p) - f), std::abs(m(1, p)), std::abs(m(2, p) - f)});
  return {points, grid.smallest_spacing(), 1.0 / static_cast<double>(summary.steps), err, std::nullopt};
}

ConvergenceLevel residual_error(WaveQuantity q, std::size_t points) {
  const TrajectoryWindow w = conformal_window(points, kResidualEpsilon, kResidualCentre);
  const ResidualReport r = wave_residual(w, q);
  return {points, r.spacing, r.dt, r.sup_norm, std::nullopt};
}

ConvergenceLevel equivalence_error(std::size_t points) {
  const Grid grid = periodic_square(points);
  const std::size_t k = centre_steps(points);
  const double dt = kResidualCentre / static_cast<double>(k);
  const auto svs = run_window(conformal_state(grid, kResidualEpsilon), Variant::gauge_fixed, dt, k, 1);
  const auto r = first_order_residual(svs, dt, make_variant(Variant::gauge_fixed));
  return {points, grid.smallest_spacing(), dt, r.sup_norm, std::nullopt};
}

}  // namespace

ConvergenceLevel scenario_error(Scenario scenario, std::size_t points) {
  switch (scenario) {
    case Scenario::mms_pure: return mms_error(Variant::pure_hgf, points);
    case Scenario::mms_einstein_like: return mms_error(Variant::einstein_like, points);
    case Scenario::homothetic_flat: return homothetic_error(points);
    case Scenario::residual_thm51: return residual_error(WaveQuantity::riemann, points);
    case Scenario::residual_thm52: return residual_error(WaveQuantity::ricci, points);
    case Scenario::residual_thm53: return residual_error(WaveQuantity::scalar, points);
    case Scenario::equivalence_3_9: return equivalence_error(points);
  }
  throw Error(ErrorKind::invalid_argument, "unknown scenario");
}

ConvergenceReport convergence_study(Scenario scenario, std::span<const std::size_t> levels) {
  if (levels.size() < 3) throw Error(ErrorKind::insufficient_levels, "need at least three refinement levels");
  ConvergenceReport rep;
  rep.scenario = scenario;
  rep.exact = true;
  rep.min_order = std::numeric_limits<double>::infinity();
  for (std::size_t points : levels) {
    ConvergenceLevel lvl = scenario_error(scenario, points);
    if (!rep.levels.empty()) {
      const ConvergenceLevel& prev = rep.levels.back();
      lvl.order = std::log(prev.error / lvl.error) / std::log(prev.spacing / lvl.spacing);
      rep.min_order = std::min(rep.min_order, *lvl.order);
    }
    rep.exact = rep.exact && lvl.error <= kExactThreshold;
    rep.levels.push_back(lvl);
  }
  return rep;
}

double fitted_order(std::span<const double> spacing, std::span<const double> error) {
  if (spacing.size() != error.size() || spacing.size() < 2)
    throw Error(ErrorKind::insufficient_levels, "need at least two points to fit an order");
  double mx = 0.0, my = 0.0;
  const double k = static_cast<double>(spacing.size());
  for (std::size_t i = 0; i < spacing.size(); ++i) {
    mx += std::log(spacing[i]) / k;
    my += std::log(error[i]) / k;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < spacing.size(); ++i) {
    const double dx = std::log(spacing[i]) - mx;
    sxy += dx * (std::log(error[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

TensorField random_conformal_metric(const Grid& grid, std::uint64_t seed, double amplitude) {
  if (grid.dim() < 2) throw Error(ErrorKind::unsupported_dimension, "conformal metrics need dim >= 2");
  for (int a = 0; a < 2; ++a)
    if (std::abs(grid.length(a) - kTwoPi) > 1e-12)
      throw Error(ErrorKind::invalid_argument, "random conformal metrics live on 2 pi periodic boxes");
  constexpr std::array<std::array<int, 2>, 5> modes{{{1, 0}, {0, 1}, {1, 1}, {1, -1}, {2, 1}}};
  SeededUniform rng(seed);
  std::array<double, 5> amp{}, phase{};
  for (std::size_t m = 0; m < modes.size(); ++m) {
    amp[m] = rng(-1.0, 1.0) / static_cast<double>(modes.size());
    phase[m] = rng(0.0, kTwoPi);
  }
  const int n = grid.dim();
  TensorField g = TensorField::covariant_symmetric(grid);
  std::vector<double> x(n);
  for (std::size_t p = 0; p < grid.node_count(); ++p) {
    grid.coordinates(p, x);
    double phi = 0.0;
    for (std::size_t m = 0; m < modes.size(); ++m)
      phi += amp[m] * std::sin(modes[m][0] * x[0] + modes[m][1] * x[1] + phase[m]);
    const double f = std::exp(2.0 * amplitude * phi);
    for (int i = 0; i < n; ++i) g(packed_index(i, i, n), p) = f;
  }
  return g;
}

IdentityStudy einstein_identity_study(std::uint64_t seed, std::span<const std::size_t> levels) {
  if (levels.size() < 3) throw Error(ErrorKind::insufficient_levels, "need at least three refinement levels");
  IdentityStudy s;
  for (std::size_t points : levels) {
    const Grid grid = periodic_square(points);
    const TensorField g = random_conformal_metric(grid, seed);
    const CurvatureBundle c = compute_curvature(g);
    double err = 0.0;
    for (std::size_t comp = 0; comp < 3; ++comp)
      for (std::size_t p = 0; p < grid.node_count(); ++p)
        err = std::max(err, std::abs(c.ricci(comp, p) - 0.5 * c.scalar(0, p) * g(comp, p)));
    s.points.push_back(points);
    s.spacing.push_back(grid.smallest_spacing());
    s.error.push_back(err);
  }
  s.order = fitted_order(s.spacing, s.error);
  return s;
}

}  // namespace hgf
