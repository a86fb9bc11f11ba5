#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "hgf/curvature.hpp"
#include "hgf/flow_dynamics.hpp"
#include "support.hpp"

using namespace hgf;
using hgf::test::kTwoPi;
using hgf::test::thrown_kind;

namespace {

std::size_t f3(int n, int a, int b, int c) { return (static_cast<std::size_t>(a) * n + b) * n + c; }

FlowState at_rest(TensorField metric) {
  TensorField v = TensorField::covariant_symmetric(metric.grid());
  return make_flow_state(0.0, std::move(metric), std::move(v));
}

TensorField wavy_2d(const Grid& g) {
  return sample_field(
      [](std::span<const double> x, std::span<const int> i) {
        if (i[0] != i[1]) return 0.1 * std::sin(x[0] + x[1]);
        return i[0] == 0 ? 1.0 + 0.2 * std::cos(x[1]) : 1.2 + 0.1 * std::sin(2.0 * x[0]);
      },
      g, {2, 0}, Symmetry::symmetric_pair);
}

TensorField wavy_velocity(const Grid& g, double scale) {
  return sample_field(
      [scale](std::span<const double> x, std::span<const int> i) {
        return scale * ((i[0] == i[1] ? 1.0 : 0.3) + 0.2 * std::cos(x[i[0]] + x[i[1]]));
      },
      g, {2, 0}, Symmetry::symmetric_pair);
}

RhsVariant generalized(const Grid& g, double alpha, SourceHook source, StressHook stress) {
  RhsVariant v = make_variant(Variant::generalized);
  v.alpha = hgf::test::scaled_identity(g, 0.0);
  std::fill(v.alpha.data().begin(), v.alpha.data().end(), alpha);
  v.source = std::move(source);
  v.stress = std::move(stress);
  return v;
}

TensorField zero_source(const FlowState& s) { return TensorField::covariant_symmetric(s.metric.grid()); }
TensorField zero_stress(const Grid& g, double) { return TensorField::covariant_symmetric(g); }

bool bitwise_equal(const TensorField& a, const TensorField& b) {
  return a.same_shape(b) && a.data() == b.data();
}

}  // namespace

TEST_CASE("variant names round trip") {
  for (Variant v : {Variant::pure_hgf, Variant::gauge_fixed, Variant::einstein_like, Variant::generalized})
    CHECK(parse_variant(to_string(v)) == v);
  CHECK(to_string(Variant::gauge_fixed) == "gauge_fixed");
  CHECK_FALSE(parse_variant("unknown_tag").has_value());
}

TEST_CASE("every variant vanishes on flat and constant-conformal data") {
  const Grid g = hgf::test::square_grid(3, 8);
  for (double f : {1.0, 2.5}) {
    const FlowState s = at_rest(hgf::test::scaled_identity(g, f));
    CHECK(rhs_pure(s).sup_norm() == 0.0);
    CHECK(rhs_gauge_fixed(s).sup_norm() == 0.0);
    CHECK(rhs_einstein_like(s).sup_norm() == 0.0);
    CHECK(rhs_generalized(s, generalized(g, 1.0, zero_source, zero_stress)).sup_norm() == 0.0);
  }
}

TEST_CASE("rhs_pure of a 2D conformal metric is -R g with the conformal scalar") {
  const double eps = 0.1;
  double prev = 0.0;
  for (std::size_t n : {16, 32, 64}) {
    const Grid g = hgf::test::square_grid(2, n);
    auto phi = [eps](std::span<const double> x) { return eps * std::sin(x[0]) * std::sin(x[1]); };
    const TensorField metric = hgf::test::conformal_metric(g, phi);
    const TensorField rhs = rhs_pure(at_rest(metric));
    double err = 0.0;
    std::vector<double> x(2);
    for (std::size_t p = 0; p < g.node_count(); ++p) {
      g.coordinates(p, x);
      const double scalar = 4.0 * eps * std::sin(x[0]) * std::sin(x[1]) * std::exp(-2.0 * phi(x));
      for (std::size_t c = 0; c < 3; ++c) err = std::max(err, std::abs(rhs(c, p) + scalar * metric(c, p)));
    }
    if (prev > 0.0) CHECK(std::log2(prev / err) >= 3.8);
    prev = err;
  }
}

TEST_CASE("rhs_pure ignores the velocity and is invariant under constant scaling") {
  const Grid g = hgf::test::square_grid(2, 16);
  const TensorField metric = wavy_2d(g);
  const TensorField at_rest_rhs = rhs_pure(at_rest(metric));
  CHECK(bitwise_equal(rhs_pure(make_flow_state(0.0, metric, wavy_velocity(g, 0.5))), at_rest_rhs));
  TensorField four = metric;
  for (double& v : four.data()) v *= 4.0;
  CHECK(bitwise_equal(rhs_pure(at_rest(four)), at_rest_rhs));
  TensorField other = metric;
  for (double& v : other.data()) v *= 2.5;
  CHECK(hgf::test::max_abs_diff(rhs_pure(at_rest(other)), at_rest_rhs) < 1e-14);
}

TEST_CASE("gauge_source matches a term-by-term assembly of the quadratic source") {
  const Grid g = hgf::test::square_grid(3, 8);
  const TensorField metric = sample_field(
      [](std::span<const double> x, std::span<const int> i) {
        return (i[0] == i[1] ? 1.0 : 0.0) + 0.1 * std::sin(x[i[0]] + 2.0 * x[i[1]] + 2.0 * x[i[0]] + x[i[1]] + x[2]);
      },
      g, {2, 0}, Symmetry::symmetric_pair);
  const TensorField inv = metric_inverse(metric);
  const std::vector<TensorField> dg = gradient(metric);
  const TensorField gamma = christoffel(metric, inv);
  const TensorField h = gauge_source(metric, inv, dg);
  const int n = 3;
  double worst = 0.0, scale = 0.0;
  for (std::size_t p = 0; p < g.node_count(); ++p) {
    auto G = [&](int a, int b) { return metric.at(p, {a, b}); };
    auto Gi = [&](int a, int b) { return inv.at(p, {a, b}); };
    auto C = [&](int k, int i, int j) { return gamma(f3(n, k, i, j), p); };
    auto D = [&](int axis, int a, int b) { return dg[axis].at(p, {a, b}); };
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double v = 0.0;
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            for (int pp = 0; pp < n; ++pp)
              for (int q = 0; q < n; ++q) v -= 2.0 * Gi(k, l) * G(pp, q) * C(pp, i, k) * C(q, j, l);
        for (int k = 0; k < n; ++k)
          for (int r = 0; r < n; ++r)
            for (int s = 0; s < n; ++s)
              for (int pp = 0; pp < n; ++pp)
                for (int q = 0; q < n; ++q)
                  v -= C(k, r, s) * Gi(pp, r) * Gi(q, s) * (G(i, k) * D(j, pp, q) + G(j, k) * D(i, pp, q));
        worst = std::max(worst, std::abs(h.at(p, {i, j}) - v));
        scale = std::max(scale, std::abs(v));
      }
  }
  CHECK(scale > 1e-2);
  CHECK(worst <= 1e-13 * scale);
}

TEST_CASE("rhs_gauge_fixed is the principal term plus the quadratic source") {
  const Grid g = hgf::test::square_grid(2, 16);
  const TensorField metric = wavy_2d(g);
  const TensorField inv = metric_inverse(metric);
  const std::vector<TensorField> dg = gradient(metric);
  TensorField expected = principal_term(inv, dg);
  const TensorField h = gauge_source(metric, inv, dg);
  for (std::size_t i = 0; i < expected.data().size(); ++i) expected.data()[i] += h.data()[i];
  CHECK(hgf::test::max_abs_diff(rhs_gauge_fixed(at_rest(metric)), expected) < 1e-14);
}

TEST_CASE("gauge_fixed minus pure equals the gauge terms built from Gamma^k") {
  // -2 R_ij = g^{kl} d_k d_l g_ij + H_ij - (g_ik d_j Gamma^k + g_jk d_i Gamma^k) - Gamma^k d_k g_ij
  double prev = 0.0;
  for (std::size_t n : {16, 32, 64}) {
    const Grid g = hgf::test::square_grid(2, n);
    const TensorField metric = wavy_2d(g);
    const FlowState s = at_rest(metric);
    const TensorField diff_rhs = [&] {
      TensorField d = rhs_gauge_fixed(s);
      const TensorField pure = rhs_pure(s);
      for (std::size_t i = 0; i < d.data().size(); ++i) d.data()[i] -= pure.data()[i];
      return d;
    }();
    const TensorField inv = metric_inverse(metric);
    const TensorField trace = gamma_trace(christoffel(metric, inv), inv);
    const std::vector<TensorField> dtrace = gradient(trace);
    const std::vector<TensorField> dg = gradient(metric);
    double err = 0.0, scale = 0.0;
    for (std::size_t p = 0; p < g.node_count(); ++p)
      for (int i = 0; i < 2; ++i)
        for (int j = i; j < 2; ++j) {
          double v = 0.0;
          for (int k = 0; k < 2; ++k)
            v += metric.at(p, {i, k}) * dtrace[j](k, p) + metric.at(p, {j, k}) * dtrace[i](k, p) +
                 trace(k, p) * dg[k].at(p, {i, j});
          err = std::max(err, std::abs(diff_rhs.at(p, {i, j}) - v));
          scale = std::max(scale, std::abs(v));
        }
    CHECK(scale > 1e-2);
    if (prev > 0.0) CHECK(std::log2(prev / err) >= 3.5);
    prev = err;
  }
}

TEST_CASE("gauge_fixed equals pure exactly on metrics with vanishing Christoffel symbols") {
  const Grid g = hgf::test::square_grid(3, 8);
  SmallMatrix m(3, 3);
  m << 2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.0;
  const FlowState s = make_flow_state(0.0, hgf::test::constant_symmetric(g, m), wavy_velocity(g, 0.1));
  CHECK(bitwise_equal(rhs_gauge_fixed(s), rhs_pure(s)));
  CHECK(rhs_gauge_fixed(s).sup_norm() == 0.0);
}

TEST_CASE("gauge_fixed on small 2D conformal data differs from pure at discretisation level only") {
  // in 2D the conformal Gamma^k vanishes, so the gauge terms do too
  double prev = 0.0;
  for (std::size_t n : {16, 32, 64}) {
    const Grid g = hgf::test::square_grid(2, n);
    const FlowState s = at_rest(
        hgf::test::conformal_metric(g, [](std::span<const double> x) { return 0.01 * std::sin(x[0]) * std::sin(x[1]); }));
    const double d = hgf::test::max_abs_diff(rhs_gauge_fixed(s), rhs_pure(s));
    CHECK(d < 1e-3);
    if (prev > 0.0) CHECK(std::log2(prev / d) >= 3.5);
    prev = d;
  }
}

TEST_CASE("einstein_like reduces to pure at rest and matches the conformal-in-time formula") {
  const Grid g2 = hgf::test::square_grid(2, 16);
  const FlowState rest = at_rest(wavy_2d(g2));
  CHECK(bitwise_equal(rhs_einstein_like(rest), rhs_pure(rest)));

  // g = f delta, h = f' delta: RHS = (1 - n/2) f'^2 / f delta
  const double f = 2.0, df = 0.6;
  for (int n : {2, 3, 5}) {
    const Grid g = hgf::test::square_grid(n, 8);
    const FlowState s = make_flow_state(0.0, hgf::test::scaled_identity(g, f), hgf::test::scaled_identity(g, df));
    const TensorField rhs = rhs_einstein_like(s);
    const double expected = (1.0 - 0.5 * n) * df * df / f;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        const double want = i == j ? expected : 0.0;
        CHECK(rhs.at(0, {i, j}) == doctest::Approx(want).epsilon(1e-15).scale(1.0));
        CHECK(rhs.at(g.node_count() - 1, {i, j}) == doctest::Approx(want).epsilon(1e-15).scale(1.0));
      }
    if (n == 2) CHECK(rhs.sup_norm() == 0.0);
  }
  CHECK((1.0 - 1.5) * df * df / f == doctest::Approx(-0.09));
}

TEST_CASE("velocity_quadratic follows -1/2 tr(h) h + h g^{-1} h") {
  const Grid g = hgf::test::square_grid(3, 8);
  SmallMatrix m(3, 3);
  m << 2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.0;
  SmallMatrix hv(3, 3);
  hv << 0.5, -0.1, 0.2, -0.1, 0.3, 0.05, 0.2, 0.05, -0.4;
  const TensorField inv = metric_inverse(hgf::test::constant_symmetric(g, m));
  const TensorField q = velocity_quadratic(inv, hgf::test::constant_symmetric(g, hv));
  const SmallMatrix gi = m.inverse();
  const double trace = (gi * hv).trace();
  const SmallMatrix expected = -0.5 * trace * hv + hv * gi * hv;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) CHECK(q.at(5, {i, j}) == doctest::Approx(expected(i, j)).epsilon(1e-14));
}

TEST_CASE("generalized variant reductions") {
  const Grid g = hgf::test::square_grid(2, 16);
  const FlowState s = make_flow_state(0.0, wavy_2d(g), wavy_velocity(g, 0.4));
  const TensorField pure = rhs_pure(s);

  CHECK(bitwise_equal(rhs_generalized(s, generalized(g, 1.0, zero_source, zero_stress)), pure));

  const TensorField half = rhs_generalized(s, generalized(g, 2.0, zero_source, zero_stress));
  for (std::size_t i = 0; i < pure.data().size(); ++i) CHECK(half.data()[i] == 0.5 * pure.data()[i]);

  auto flipped = [](const FlowState& st) {
    TensorField q = velocity_quadratic(metric_inverse(st.metric), st.velocity);
    for (double& v : q.data()) v = -v;
    return q;
  };
  CHECK(hgf::test::max_abs_diff(rhs_generalized(s, generalized(g, 1.0, flipped, zero_stress)), rhs_einstein_like(s)) <
        1e-15);

  auto stress = [](const Grid& grid, double t) { return hgf::test::scaled_identity(grid, 0.25 + t); };
  const TensorField forced = rhs_generalized(s, generalized(g, 1.0, zero_source, stress));
  for (std::size_t p = 0; p < g.node_count(); p += 7) {
    CHECK(forced.at(p, {0, 0}) == doctest::Approx(pure.at(p, {0, 0}) + 0.25));
    CHECK(forced.at(p, {0, 1}) == pure.at(p, {0, 1}));
  }
  CHECK(bitwise_equal(evaluate_rhs(s, generalized(g, 2.0, zero_source, zero_stress)), half));
}

TEST_CASE("generalized variant validation") {
  const Grid g = hgf::test::square_grid(2, 8);
  const FlowState s = at_rest(hgf::test::scaled_identity(g, 1.0));
  RhsVariant no_hooks = make_variant(Variant::generalized);
  no_hooks.alpha = hgf::test::scaled_identity(g, 1.0);
  CHECK(thrown_kind([&] { rhs_generalized(s, no_hooks); }) == ErrorKind::invalid_argument);

  RhsVariant zero = generalized(g, 1.0, zero_source, zero_stress);
  zero.alpha(1, 3) = 0.0;
  CHECK(thrown_kind([&] { rhs_generalized(s, zero); }) == ErrorKind::zero_alpha_component);

  RhsVariant elsewhere = generalized(hgf::test::square_grid(2, 9), 1.0, zero_source, zero_stress);
  CHECK(thrown_kind([&] { rhs_generalized(s, elsewhere); }) == ErrorKind::grid_mismatch);

  RhsVariant scalar_alpha = generalized(g, 1.0, zero_source, zero_stress);
  scalar_alpha.alpha = TensorField::scalar(g);
  CHECK(thrown_kind([&] { validate_variant(scalar_alpha, g); }) == ErrorKind::shape_mismatch);

  auto bad_hook = [](const FlowState& st) { return TensorField::scalar(st.metric.grid()); };
  CHECK(thrown_kind([&] { rhs_generalized(s, generalized(g, 1.0, bad_hook, zero_stress)); }) ==
        ErrorKind::shape_mismatch);

  CHECK_NOTHROW(validate_variant(make_variant(Variant::pure_hgf), g));
}

TEST_CASE("right-hand sides reject singular metrics") {
  const Grid g = hgf::test::square_grid(2, 8);
  FlowState s;
  s.metric = hgf::test::scaled_identity(g, 1.0);
  s.metric(0, 5) = -1.0;
  s.velocity = TensorField::covariant_symmetric(g);
  CHECK(thrown_kind([&] { rhs_pure(s); }) == ErrorKind::singular_metric);
  CHECK(thrown_kind([&] { rhs_gauge_fixed(s); }) == ErrorKind::singular_metric);
  CHECK(thrown_kind([&] { rhs_einstein_like(s); }) == ErrorKind::singular_metric);
}

TEST_CASE("homothetic factor, rate and degenerate time") {
  const HomotheticParams flat{0.0, 0.0};
  CHECK(homothetic_factor(flat, 3.0) == 1.0);
  CHECK(flat.degenerate_time() == std::numeric_limits<double>::infinity());

  const HomotheticParams sphere{1.0, 0.0};
  CHECK(sphere.degenerate_time() == 1.0);
  CHECK(homothetic_factor(sphere, 0.5) == 0.75);
  CHECK(homothetic_rate(sphere, 0.5) == -1.0);
  CHECK(thrown_kind([&] { homothetic_factor(sphere, 1.0); }) == ErrorKind::past_degenerate_time);
  CHECK(thrown_kind([&] { homothetic_rate(sphere, 1.5); }) == ErrorKind::past_degenerate_time);

  const HomotheticParams expanding{0.0, 0.5};
  CHECK(homothetic_factor(expanding, 1.0) == 1.5);
  CHECK(homothetic_rate(expanding, 7.0) == 0.5);
  CHECK(expanding.degenerate_time() == std::numeric_limits<double>::infinity());

  CHECK(HomotheticParams{0.0, -0.5}.degenerate_time() == 2.0);
  CHECK(HomotheticParams{-1.0, 0.0}.degenerate_time() == std::numeric_limits<double>::infinity());
  // 1 + t - t^2 = 0 at the golden ratio
  CHECK(HomotheticParams{1.0, 1.0}.degenerate_time() == doctest::Approx((1.0 + std::sqrt(5.0)) / 2.0));
  // a negative Einstein constant with contraction still reaches zero: 1 - 3t + t^2
  CHECK(HomotheticParams{-1.0, -3.0}.degenerate_time() == doctest::Approx((3.0 - std::sqrt(5.0)) / 2.0));
}

TEST_CASE("homothetic ODE integration tracks 1 - t^2 and stops at the collapse") {
  const HomotheticParams sphere{1.0, 0.0};
  const HomotheticTrace tracked = trace_homothetic(sphere, 1e-3, 0.9);
  CHECK_FALSE(tracked.collapse_time.has_value());
  CHECK(tracked.time.back() == doctest::Approx(0.9));
  double worst = 0.0;
  for (std::size_t k = 0; k < tracked.time.size(); ++k) {
    const double t = tracked.time[k];
    worst = std::max(worst, std::abs(tracked.factor[k] - (1.0 - t * t)) / (1.0 - t * t));
    CHECK(tracked.rate[k] == doctest::Approx(-2.0 * t).scale(1.0));
  }
  CHECK(worst <= 1e-8);

  const HomotheticTrace full = trace_homothetic(sphere, 1e-3, 2.0);
  REQUIRE(full.collapse_time.has_value());
  CHECK(*full.collapse_time <= 1.0 + 1e-3);
  CHECK(*full.collapse_time >= 1.0 - 1e-3);
  CHECK(full.factor.back() > 0.0);
  CHECK(thrown_kind([&] { integrate_homothetic(sphere, 1e-3, 2.0); }) == ErrorKind::spd_lost);
  CHECK(integrate_homothetic(HomotheticParams{0.0, 0.5}, 0.01, 1.0).factor.back() == doctest::Approx(1.5));
}

TEST_CASE("manufactured source vanishes for a true solution") {
  const Grid g = hgf::test::square_grid(2, 16);
  const double a = 0.5;
  MetricTarget homothetic;
  homothetic.value = [a](std::span<const double>, std::size_t c, double t) { return c == 1 ? 0.0 : 1.0 + a * t; };
  homothetic.rate = [a](std::span<const double>, std::size_t c, double) { return c == 1 ? 0.0 : a; };
  homothetic.acceleration = [](std::span<const double>, std::size_t, double) { return 0.0; };
  for (double t : {0.0, 0.7})
    CHECK(mms_source(homothetic, g, make_variant(Variant::pure_hgf), t).sup_norm() == 0.0);

  const FlowState s = sample_target(homothetic, g, 0.7);
  CHECK(s.time == 0.7);
  CHECK(s.metric.at(3, {0, 0}) == doctest::Approx(1.35));
  CHECK(s.velocity.at(3, {1, 1}) == 0.5);
}

TEST_CASE("conformal wave target carries a consistent analytic Ricci tensor") {
  for (int dim : {2, 3}) {
    const MetricTarget target = conformal_wave_target(dim, 0.1);
    REQUIRE(target.ricci);
    double prev = 0.0;
    for (std::size_t n : {16, 32}) {
      std::vector<std::size_t> pts(dim, 8);
      pts[0] = n;
      const Grid g = make_grid(dim, pts, std::vector<double>(dim, kTwoPi));
      const double t = 0.3;
      const FlowState s = sample_target(target, g, t);
      const CurvatureBundle c = compute_curvature(s.metric);
      double err = 0.0;
      std::vector<double> x(dim);
      for (std::size_t p = 0; p < g.node_count(); ++p) {
        g.coordinates(p, x);
        for (std::size_t comp = 0; comp < c.ricci.component_count(); ++comp)
          err = std::max(err, std::abs(c.ricci(comp, p) - target.ricci(x, comp, t)));
      }
      if (prev > 0.0) CHECK(std::log2(prev / err) >= 3.8);
      prev = err;
    }
  }
}

TEST_CASE("manufactured sources depend on the variant when the target moves") {
  const MetricTarget target = conformal_wave_target(3, 0.1);
  const Grid g = make_grid(3, {16, 8, 8}, std::vector<double>(3, kTwoPi));
  const double t = 0.4;
  const TensorField pure = mms_source(target, g, make_variant(Variant::pure_hgf), t);
  const TensorField einstein = mms_source(target, g, make_variant(Variant::einstein_like), t);
  CHECK(pure.sup_norm() > 1e-3);
  CHECK(hgf::test::max_abs_diff(pure, einstein) > 1e-4);
  // the difference is exactly the velocity quadratic of the target
  const FlowState s = sample_target(target, g, t);
  const TensorField q = velocity_quadratic(metric_inverse(s.metric), s.velocity);
  double worst = 0.0;
  for (std::size_t i = 0; i < q.data().size(); ++i)
    worst = std::max(worst, std::abs((pure.data()[i] - einstein.data()[i]) - q.data()[i]));
  CHECK(worst < 1e-14);
}

TEST_CASE("principal term approximates g^{kl} d_k d_l g at fourth order") {
  double prev = 0.0;
  for (std::size_t n : {16, 32, 64}) {
    const Grid g = hgf::test::square_grid(2, n);
    const TensorField metric = sample_field(
        [](std::span<const double> x, std::span<const int> i) {
          return (i[0] == i[1] ? 1.0 : 0.0) + 0.1 * std::sin(x[0]) * std::cos(x[1]);
        },
        g, {2, 0}, Symmetry::symmetric_pair);
    const TensorField inv = metric_inverse(metric);
    const TensorField pt = principal_term(inv, gradient(metric));
    double err = 0.0;
    std::vector<double> x(2);
    for (std::size_t p = 0; p < g.node_count(); ++p) {
      g.coordinates(p, x);
      const double s = std::sin(x[0]), c = std::cos(x[1]);
      // every component has the same perturbation u = 0.1 sin x cos y
      const double uxx = -0.1 * s * c, uyy = -0.1 * s * c, uxy = -0.1 * std::cos(x[0]) * std::sin(x[1]);
      const double lap = inv.at(p, {0, 0}) * uxx + 2.0 * inv.at(p, {0, 1}) * uxy + inv.at(p, {1, 1}) * uyy;
      for (std::size_t comp = 0; comp < 3; ++comp) err = std::max(err, std::abs(pt(comp, p) - lap));
    }
    if (prev > 0.0) CHECK(std::log2(prev / err) >= 3.8);
    prev = err;
  }
}
