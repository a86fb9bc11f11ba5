#include <doctest.h>

#include <cmath>
#include <vector>

#include "hgf/curvature.hpp"
#include "support.hpp"

using namespace hgf;
using hgf::test::kTwoPi;
using hgf::test::thrown_kind;

namespace {

std::size_t f3(int n, int a, int b, int c) { return (static_cast<std::size_t>(a) * n + b) * n + c; }
std::size_t f4(int n, int a, int b, int c, int d) { return f3(n, a, b, c) * n + d; }

struct Conformal2D {
  double eps;
  double phi(double x, double y) const { return eps * std::sin(x) * std::sin(y); }
  double phi_x(double x, double y) const { return eps * std::cos(x) * std::sin(y); }
  double phi_y(double x, double y) const { return eps * std::sin(x) * std::cos(y); }
  // R = -2 e^{-2 phi} (phi_xx + phi_yy) = 4 eps sin x sin y e^{-2 phi}
  double scalar(double x, double y) const { return 4.0 * eps * std::sin(x) * std::sin(y) * std::exp(-2.0 * phi(x, y)); }

  TensorField metric(const Grid& g) const {
    return hgf::test::conformal_metric(g, [this](std::span<const double> x) { return phi(x[0], x[1]); });
  }
};

/// True when every axis index is at least `margin` away from the box faces.
bool interior(const Grid& g, std::size_t p, std::size_t margin) {
  for (int a = 0; a < g.dim(); ++a) {
    const std::size_t i = g.axis_index(p, a);
    if (i < margin || i + margin >= g.points(a)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("metric_inverse on constant metrics") {
  const Grid g = hgf::test::square_grid(2, 8);
  const TensorField id_inv = metric_inverse(hgf::test::scaled_identity(g, 1.0));
  CHECK(id_inv.valence() == Valence{0, 2});
  CHECK(id_inv.at(3, {0, 0}) == 1.0);
  CHECK(id_inv.at(3, {0, 1}) == 0.0);

  const TensorField scaled = metric_inverse(hgf::test::scaled_identity(g, 2.5));
  CHECK(scaled.at(0, {1, 1}) == doctest::Approx(0.4).epsilon(1e-15));

  SmallMatrix m(2, 2);
  m << 2.0, 1.0, 1.0, 2.0;
  // adjugate over determinant
  const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  const TensorField inv = metric_inverse(hgf::test::constant_symmetric(g, m));
  for (std::size_t p = 0; p < g.node_count(); ++p) {
    CHECK(inv.at(p, {0, 0}) == doctest::Approx(m(1, 1) / det).epsilon(1e-15));
    CHECK(inv.at(p, {0, 1}) == doctest::Approx(-m(0, 1) / det).epsilon(1e-15));
    CHECK(inv.at(p, {1, 1}) == doctest::Approx(m(0, 0) / det).epsilon(1e-15));
  }
  CHECK(inv.at(0, {0, 0}) == doctest::Approx(2.0 / 3.0));
  CHECK(inv.at(0, {0, 1}) == doctest::Approx(-1.0 / 3.0));
}

TEST_CASE("metric_inverse satisfies g^{ik} g_kj = delta on random SPD fields") {
  const Grid g = hgf::test::square_grid(3, 8);
  const TensorField metric = sample_field(
      [](std::span<const double> x, std::span<const int> i) {
        return (i[0] == i[1] ? 2.0 : 0.0) + 0.3 * std::sin(x[0] + i[0] + i[1]) * std::cos(x[2] * (1 + i[0] * i[1]));
      },
      g, {2, 0}, Symmetry::symmetric_pair);
  const TensorField inv = metric_inverse(metric);
  CHECK(inverse_residual(metric, inv) < 1e-14);
}

TEST_CASE("metric_inverse rejects singular and indefinite metrics") {
  const Grid g = hgf::test::square_grid(2, 8);
  SmallMatrix singular(2, 2);
  singular << 1.0, 1.0, 1.0, 1.0;
  CHECK(thrown_kind([&] { metric_inverse(hgf::test::constant_symmetric(g, singular)); }) ==
        ErrorKind::singular_metric);
  SmallMatrix indefinite(2, 2);
  indefinite << 1.0, 0.0, 0.0, -1.0;
  CHECK(thrown_kind([&] { metric_inverse(hgf::test::constant_symmetric(g, indefinite)); }) ==
        ErrorKind::singular_metric);
  CHECK(thrown_kind([&] { metric_inverse(hgf::test::scaled_identity(g, 1e-11)); }) == ErrorKind::singular_metric);
}

TEST_CASE("flat metrics have vanishing connection and curvature") {
  const Grid g = hgf::test::square_grid(3, 8);
  const CurvatureBundle c = compute_curvature(hgf::test::scaled_identity(g, 1.0));
  CHECK(c.christoffel.sup_norm() == 0.0);
  CHECK(c.riemann_mixed.sup_norm() == 0.0);
  CHECK(c.riemann_low.sup_norm() == 0.0);
  CHECK(c.ricci.sup_norm() == 0.0);
  CHECK(c.scalar.sup_norm() == 0.0);
  CHECK(c.gamma_trace.sup_norm() == 0.0);
  CHECK(b_tensor(c.riemann_low, c.inverse_metric).sup_norm() == 0.0);
}

TEST_CASE("christoffel of diag(a(x), 1) is a'/(2a) in one slot") {
  double prev = 0.0;
  for (std::size_t n : {16, 32, 64}) {
    const Grid g = hgf::test::square_grid(2, n);
    const TensorField metric = sample_field(
        [](std::span<const double> x, std::span<const int> i) {
          if (i[0] != i[1]) return 0.0;
          return i[0] == 0 ? 1.0 + 0.2 * std::sin(x[0]) : 1.0;
        },
        g, {2, 0}, Symmetry::symmetric_pair);
    const TensorField gamma = christoffel(metric, metric_inverse(metric));
    double err = 0.0, others = 0.0;
    std::vector<double> x(2);
    for (std::size_t p = 0; p < g.node_count(); ++p) {
      g.coordinates(p, x);
      const double a = 1.0 + 0.2 * std::sin(x[0]);
      const double da = 0.2 * std::cos(x[0]);
      err = std::max(err, std::abs(gamma(f3(2, 0, 0, 0), p) - da / (2.0 * a)));
      for (std::size_t c = 1; c < gamma.component_count(); ++c) others = std::max(others, std::abs(gamma(c, p)));
    }
    CHECK(others == 0.0);
    if (prev > 0.0) CHECK(std::log2(prev / err) >= 3.8);
    prev = err;
  }
}

TEST_CASE("christoffel of a 2D conformal metric matches the conformal identities") {
  const Conformal2D conf{0.1};
  double prev = 0.0;
  for (std::size_t n : {16, 32, 64}) {
    const Grid g = hgf::test::square_grid(2, n);
    const TensorField metric = conf.metric(g);
    const TensorField gamma = christoffel(metric, metric_inverse(metric));
    double err = 0.0;
    std::vector<double> x(2);
    for (std::size_t p = 0; p < g.node_count(); ++p) {
      g.coordinates(p, x);
      const double px = conf.phi_x(x[0], x[1]);
      const double py = conf.phi_y(x[0], x[1]);
      // Gamma^k_ij = delta^k_i phi_j + delta^k_j phi_i - delta_ij phi_k
      const double expected[2][2][2] = {{{px, py}, {py, -px}}, {{-py, px}, {px, py}}};
      for (int k = 0; k < 2; ++k)
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j) err = std::max(err, std::abs(gamma(f3(2, k, i, j), p) - expected[k][i][j]));
    }
    if (prev > 0.0) CHECK(std::log2(prev / err) >= 3.8);
    prev = err;
  }
}

TEST_CASE("christoffel is exactly symmetric in its lower pair") {
  const Grid g = hgf::test::square_grid(3, 8);
  const TensorField metric = sample_field(
      [](std::span<const double> x, std::span<const int> i) {
        return (i[0] == i[1] ? 1.5 : 0.1) + 0.2 * std::sin(x[0] * (1 + i[0]) + x[1] * (1 + i[1]) + x[2] * i[0] * i[1]) *
                                              (i[0] == i[1] ? 1.0 : 0.0) +
               (i[0] == i[1] ? 0.0 : 0.05 * std::cos(x[2] + x[i[0]] + x[i[1]]));
      },
      g, {2, 0}, Symmetry::symmetric_pair);
  const TensorField gamma = christoffel(metric, metric_inverse(metric));
  for (std::size_t p = 0; p < g.node_count(); ++p)
    for (int k = 0; k < 3; ++k)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) REQUIRE(gamma(f3(3, k, i, j), p) == gamma(f3(3, k, j, i), p));
}

TEST_CASE("2D conformal curvature: R_0101 = (R/2) det g and the scalar formula") {
  const Conformal2D conf{0.1};
  double prev_r = 0.0, prev_s = 0.0;
  for (std::size_t n : {16, 32, 64}) {
    const Grid g = hgf::test::square_grid(2, n);
    const CurvatureBundle c = compute_curvature(conf.metric(g));
    double err_r = 0.0, err_s = 0.0, err_sym = 0.0;
    std::vector<double> x(2);
    for (std::size_t p = 0; p < g.node_count(); ++p) {
      g.coordinates(p, x);
      const double scalar = conf.scalar(x[0], x[1]);
      const double det = std::exp(4.0 * conf.phi(x[0], x[1]));
      err_r = std::max(err_r, std::abs(c.riemann_low(f4(2, 0, 1, 0, 1), p) - 0.5 * scalar * det));
      err_s = std::max(err_s, std::abs(c.scalar(0, p) - scalar));
      // the other nonzero entries follow from the antisymmetries
      err_sym = std::max(err_sym, std::abs(c.riemann_low(f4(2, 1, 0, 0, 1), p) + c.riemann_low(f4(2, 0, 1, 0, 1), p)));
      CHECK(c.riemann_low(f4(2, 0, 0, 0, 1), p) == 0.0);
    }
    CHECK(err_sym == 0.0);
    if (prev_r > 0.0) {
      CHECK(std::log2(prev_r / err_r) >= 3.8);
      CHECK(std::log2(prev_s / err_s) >= 3.8);
    }
    prev_r = err_r;
    prev_s = err_s;
  }
}

TEST_CASE("ricci of a 2D metric obeys the Einstein identity R_ij = (R/2) g_ij") {
  double prev = 0.0;
  for (std::size_t n : {16, 32, 64}) {
    const Grid g = hgf::test::square_grid(2, n);
    // a non-conformal 2-metric
    const TensorField metric = sample_field(
        [](std::span<const double> x, std::span<const int> i) {
          if (i[0] != i[1]) return 0.1 * std::sin(x[0] + x[1]);
          return i[0] == 0 ? 1.0 + 0.2 * std::cos(x[1]) : 1.2 + 0.1 * std::sin(2.0 * x[0]);
        },
        g, {2, 0}, Symmetry::symmetric_pair);
    const CurvatureBundle c = compute_curvature(metric);
    double err = 0.0;
    for (std::size_t comp = 0; comp < 3; ++comp)
      for (std::size_t p = 0; p < g.node_count(); ++p)
        err = std::max(err, std::abs(c.ricci(comp, p) - 0.5 * c.scalar(0, p) * metric(comp, p)));
    if (prev > 0.0) CHECK(std::log2(prev / err) >= 3.5);
    prev = err;
  }
}

TEST_CASE("round sphere charts: Ric = (n-1) g and R = n(n-1)") {
  // Stereographic charts are not periodic, so only nodes whose stencils stay
  // away from the box faces are compared.
  for (int dim : {2, 3}) {
    const double h = 0.8;
    double prev_ric = 0.0, prev_scalar = 0.0;
    for (std::size_t n : dim == 2 ? std::vector<std::size_t>{32, 64} : std::vector<std::size_t>{16, 32}) {
      const Grid g = hgf::test::square_grid(dim, n, 2.0 * h);
      // stereographic metric 4 / (1 + |x|^2)^2 delta with x shifted to [-h, h)
      const TensorField metric = sample_field(
          [&](std::span<const double> x, std::span<const int> i) {
            if (i[0] != i[1]) return 0.0;
            double r2 = 0.0;
            for (double v : x) r2 += (v - h) * (v - h);
            const double s = 2.0 / (1.0 + r2);
            return s * s;
          },
          g, {2, 0}, Symmetry::symmetric_pair);
      const CurvatureBundle c = compute_curvature(metric);
      double err_ric = 0.0, err_scalar = 0.0;
      for (std::size_t p = 0; p < g.node_count(); ++p) {
        if (!interior(g, p, 5)) continue;
        for (std::size_t comp = 0; comp < metric.component_count(); ++comp)
          err_ric = std::max(err_ric, std::abs(c.ricci(comp, p) - (dim - 1) * metric(comp, p)));
        err_scalar = std::max(err_scalar, std::abs(c.scalar(0, p) - dim * (dim - 1)));
      }
      CHECK(err_ric < 0.03);
      CHECK(err_scalar < 0.03);
      if (prev_ric > 0.0) {
        CHECK(std::log2(prev_ric / err_ric) >= 3.5);
        CHECK(std::log2(prev_scalar / err_scalar) >= 3.5);
      }
      prev_ric = err_ric;
      prev_scalar = err_scalar;
    }
  }
}

TEST_CASE("Riemann identity residuals on a 3D perturbation shrink at fourth order") {
  // the antisymmetry in (i, j) and the first Bianchi identity hold algebraically
  // once Gamma is symmetric; the others carry discretisation error
  std::vector<RiemannResiduals> res;
  std::vector<double> ricci_gap, asym;
  const std::vector<std::size_t> levels{24, 32, 48};
  for (std::size_t n : levels) {
    const Grid g = hgf::test::square_grid(3, n);
    const TensorField metric = sample_field(
        [](std::span<const double> x, std::span<const int> i) {
          const double d = i[0] == i[1] ? 1.0 : 0.0;
          return d + 0.05 * std::sin(x[i[0]] + x[i[1]]) * std::cos(x[0] - x[2]);
        },
        g, {2, 0}, Symmetry::symmetric_pair);
    const CurvatureBundle c = compute_curvature(metric);
    res.push_back(c.riemann_residuals);
    asym.push_back(c.ricci_asymmetry);
    ricci_gap.push_back(hgf::test::max_abs_diff(ricci_contracted(c.christoffel), c.ricci));
    CHECK(c.riemann_residuals.antisymmetry_ij == 0.0);
    CHECK(c.riemann_residuals.first_bianchi < 1e-15);
    CHECK(c.ricci.sup_norm() > 0.1);
  }
  auto order = [&](double coarse, double fine, std::size_t k) {
    return std::log(coarse / fine) / std::log(static_cast<double>(levels[k + 1]) / static_cast<double>(levels[k]));
  };
  for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
    const double floor = k == 0 ? 3.0 : 3.5;
    CHECK(order(res[k].antisymmetry_kl, res[k + 1].antisymmetry_kl, k) >= floor);
    CHECK(order(res[k].pair_symmetry, res[k + 1].pair_symmetry, k) >= floor);
    CHECK(order(asym[k], asym[k + 1], k) >= floor);
    CHECK(order(ricci_gap[k], ricci_gap[k + 1], k) >= floor);
  }
}

TEST_CASE("scalar curvature is the trace of Ricci") {
  const Conformal2D conf{0.1};
  const Grid g = hgf::test::square_grid(2, 16);
  const CurvatureBundle c = compute_curvature(conf.metric(g));
  for (std::size_t p = 0; p < g.node_count(); ++p) {
    double tr = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) tr += c.inverse_metric.at(p, {i, j}) * c.ricci.at(p, {i, j});
    CHECK(c.scalar(0, p) == doctest::Approx(tr).epsilon(1e-14).scale(1.0));
  }
}

TEST_CASE("constant conformal scaling leaves connection and Ricci unchanged") {
  const Conformal2D conf{0.1};
  const Grid g = hgf::test::square_grid(2, 16);
  const TensorField metric = conf.metric(g);
  const CurvatureBundle base = compute_curvature(metric);
  // a power of four scales the Cholesky factor by a power of two: bitwise equal
  TensorField four = metric;
  for (double& v : four.data()) v *= 4.0;
  const CurvatureBundle c4 = compute_curvature(four);
  CHECK(hgf::test::max_abs_diff(c4.christoffel, base.christoffel) == 0.0);
  CHECK(hgf::test::max_abs_diff(c4.ricci, base.ricci) == 0.0);

  TensorField other = metric;
  for (double& v : other.data()) v *= 2.5;
  const CurvatureBundle c25 = compute_curvature(other);
  CHECK(hgf::test::max_abs_diff(c25.christoffel, base.christoffel) < 1e-15);
  CHECK(hgf::test::max_abs_diff(c25.ricci, base.ricci) < 1e-14);
}

TEST_CASE("b_tensor matches a brute-force contraction and its pair symmetry") {
  const Conformal2D conf{0.1};
  const Grid g = hgf::test::square_grid(2, 16);
  const CurvatureBundle c = compute_curvature(conf.metric(g));
  const TensorField b = b_tensor(c.riemann_low, c.inverse_metric);
  const int n = 2;
  double worst = 0.0, scale = 0.0;
  for (std::size_t p = 0; p < g.node_count(); ++p) {
    auto gi = [&](int a, int d) { return c.inverse_metric.at(p, {a, d}); };
    auto R = [&](int a, int d, int e, int f) { return c.riemann_low(f4(n, a, d, e, f), p); };
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            double v = 0.0;
            for (int pp = 0; pp < n; ++pp)
              for (int q = 0; q < n; ++q)
                for (int r = 0; r < n; ++r)
                  for (int s = 0; s < n; ++s) v += gi(pp, r) * gi(q, s) * R(pp, i, q, j) * R(r, k, s, l);
            worst = std::max(worst, std::abs(b(f4(n, i, j, k, l), p) - v));
            scale = std::max(scale, std::abs(v));
          }
  }
  CHECK(scale > 1e-4);
  CHECK(worst <= 1e-14 * scale);
}

TEST_CASE("b_tensor is pair symmetric, B_ijkl = B_jilk, on exact curvature data") {
  // constant-curvature algebraic tensor R_ijkl = K (g_ik g_jl - g_il g_jk) on a 3D metric
  const Grid g = hgf::test::square_grid(3, 8);
  const TensorField metric = sample_field(
      [](std::span<const double> x, std::span<const int> i) {
        return (i[0] == i[1] ? 1.0 : 0.0) + 0.1 * std::sin(x[i[0]] + 2.0 * x[i[1]] + 2.0 * x[i[0]] + x[i[1]]);
      },
      g, {2, 0}, Symmetry::symmetric_pair);
  const int n = 3;
  TensorField rm(g, {4, 0}, Symmetry::riemann);
  for (std::size_t p = 0; p < g.node_count(); ++p)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            rm(f4(n, i, j, k, l), p) =
                0.7 * (metric.at(p, {i, k}) * metric.at(p, {j, l}) - metric.at(p, {i, l}) * metric.at(p, {j, k}));
  const TensorField b = b_tensor(rm, metric_inverse(metric));
  double worst = 0.0;
  for (std::size_t p = 0; p < g.node_count(); ++p)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            worst = std::max(worst, std::abs(b(f4(n, i, j, k, l), p) - b(f4(n, j, i, l, k), p)));
  CHECK(worst < 1e-14);
}

TEST_CASE("gamma_trace: zero for constant metrics, (2 - n) e^{-2 phi} d phi for conformal ones") {
  const Grid g2 = hgf::test::square_grid(2, 16);
  SmallMatrix m(2, 2);
  m << 3.0, 0.5, 0.5, 2.0;
  const TensorField constant = hgf::test::constant_symmetric(g2, m);
  const TensorField inv_c = metric_inverse(constant);
  CHECK(gamma_trace(christoffel(constant, inv_c), inv_c).sup_norm() == 0.0);

  // in 2D the conformal trace vanishes analytically, so only discretisation error remains
  double prev = 0.0;
  for (std::size_t n : {16, 32, 64}) {
    const Grid g = hgf::test::square_grid(2, n);
    const TensorField metric = Conformal2D{0.1}.metric(g);
    const TensorField inv = metric_inverse(metric);
    const double t = gamma_trace(christoffel(metric, inv), inv).sup_norm();
    if (prev > 0.0) CHECK(std::log2(prev / t) >= 3.8);
    prev = t;
  }

  const Grid g3 = hgf::test::square_grid(3, 32);
  auto phi = [](std::span<const double> x) { return 0.1 * std::sin(x[0]) * std::cos(x[2]); };
  const TensorField metric = hgf::test::conformal_metric(g3, phi);
  const TensorField inv = metric_inverse(metric);
  const TensorField trace = gamma_trace(christoffel(metric, inv), inv);
  double err = 0.0;
  std::vector<double> x(3);
  for (std::size_t p = 0; p < g3.node_count(); ++p) {
    g3.coordinates(p, x);
    const double e = std::exp(-2.0 * phi(x));
    const double d[3] = {0.1 * std::cos(x[0]) * std::cos(x[2]), 0.0, -0.1 * std::sin(x[0]) * std::sin(x[2])};
    for (int i = 0; i < 3; ++i) err = std::max(err, std::abs(trace(i, p) + e * d[i]));
  }
  CHECK(trace.sup_norm() > 0.05);
  CHECK(err < 1e-4);
}

TEST_CASE("principal symbol values and errors") {
  const Grid g = hgf::test::square_grid(2, 8);
  const TensorField flat_inv = metric_inverse(hgf::test::scaled_identity(g, 1.0));
  const double s = std::sqrt(0.5);
  for (const std::vector<double>& xi : {std::vector<double>{1, 0}, {0, -1}, {s, s}}) {
    const TensorField sigma = principal_symbol(flat_inv, xi);
    for (double v : sigma.data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
  }

  SmallMatrix m(2, 2);
  m << 4.0, 0.0, 0.0, 1.0;
  const TensorField inv = metric_inverse(hgf::test::constant_symmetric(g, m));
  const std::vector<double> e0{1.0, 0.0};
  CHECK(principal_symbol(inv, e0)(0, 0) == 0.25);

  const std::vector<double> zero{0.0, 0.0};
  CHECK(thrown_kind([&] { principal_symbol(inv, zero); }) == ErrorKind::zero_covector);
  const std::vector<double> long_xi{1.0, 1.0};
  CHECK(thrown_kind([&] { principal_symbol(inv, long_xi); }) == ErrorKind::invalid_argument);
  const std::vector<double> wrong_len{1.0};
  CHECK(thrown_kind([&] { principal_symbol(inv, wrong_len); }) == ErrorKind::dimension_mismatch);
}

TEST_CASE("hyperbolicity covector sample and certificate") {
  for (int n = 1; n <= kMaxDim; ++n) {
    const auto xis = hyperbolicity_covectors(n);
    CHECK(xis.size() == static_cast<std::size_t>(2 * n + n * (n - 1) / 2));
    for (const auto& xi : xis) {
      double norm = 0.0;
      for (double v : xi) norm += v * v;
      CHECK(norm == doctest::Approx(1.0).epsilon(1e-15));
    }
  }
  const Grid g = hgf::test::square_grid(3, 8);
  const TensorField metric = sample_field(
      [](std::span<const double> x, std::span<const int> i) {
        return (i[0] == i[1] ? 2.0 : 0.0) + 0.5 * std::sin(x[0] + i[0] - i[1]) * (i[0] == i[1] ? 1.0 : 0.0) +
               (i[0] != i[1] ? 0.3 : 0.0);
      },
      g, {2, 0}, Symmetry::symmetric_pair);
  const TensorField inv = metric_inverse(metric);
  const double cert = hyperbolicity_certificate(inv);
  CHECK(cert > 0.0);
  // the certificate never undercuts the smallest inverse eigenvalue
  double lo = 1e300;
  for (std::size_t p = 0; p < g.node_count(); ++p)
    lo = std::min(lo, Eigen::SelfAdjointEigenSolver<SmallMatrix>(load_symmetric(inv, p)).eigenvalues()(0));
  CHECK(cert >= lo - 1e-15);
}

TEST_CASE("curvature operations reject fields on different grids") {
  const Grid a = hgf::test::square_grid(2, 8);
  const Grid b = hgf::test::square_grid(2, 10);
  const TensorField ga = hgf::test::scaled_identity(a, 1.0);
  const TensorField inv_b = metric_inverse(hgf::test::scaled_identity(b, 1.0));
  CHECK(thrown_kind([&] { christoffel(ga, inv_b); }) == ErrorKind::grid_mismatch);
  const CurvatureBundle ca = compute_curvature(ga);
  CHECK(thrown_kind([&] { ricci(ca.riemann_low, inv_b); }) == ErrorKind::grid_mismatch);
  CHECK(thrown_kind([&] { b_tensor(ca.riemann_low, inv_b); }) == ErrorKind::grid_mismatch);
  CHECK(thrown_kind([&] { gamma_trace(ca.christoffel, inv_b); }) == ErrorKind::grid_mismatch);
  CHECK(thrown_kind([&] { scalar_curvature(ca.ricci, inv_b); }) == ErrorKind::grid_mismatch);
  CHECK(thrown_kind([&] { riemann(ca.christoffel, hgf::test::scaled_identity(b, 1.0)); }) ==
        ErrorKind::grid_mismatch);
}
