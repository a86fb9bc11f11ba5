#include "hgf/curvature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace hgf {

namespace {

void require_same_grid(const TensorField& a, const TensorField& b, const char* what) {
  if (!(a.grid() == b.grid())) throw Error(ErrorKind::grid_mismatch, what);
}

inline std::size_t f3(int n, int a, int b, int c) {
  return (static_cast<std::size_t>(a) * n + b) * n + c;
}
inline std::size_t f4(int n, int a, int b, int c, int d) {
  return ((static_cast<std::size_t>(a) * n + b) * n + c) * n + d;
}

}  // namespace

std::vector<TensorField> gradient(const TensorField& field) {
  std::vector<TensorField> out;
  out.reserve(field.dim());
  for (int a = 0; a < field.dim(); ++a) out.push_back(partial_derivative(field, a, 1));
  return out;
}

TensorField metric_inverse(const TensorField& metric) {
  const int n = metric.dim();
  TensorField inv = TensorField::contravariant_symmetric(metric.grid());
  Eigen::LLT<SmallMatrix> llt;
  Eigen::SelfAdjointEigenSolver<SmallMatrix> eig;
  const SmallMatrix identity = SmallMatrix::Identity(n, n);
  for (std::size_t p = 0; p < metric.node_count(); ++p) {
    const SmallMatrix g = load_symmetric(metric, p);
    llt.compute(g);
    if (llt.info() != Eigen::Success)
      throw Error(ErrorKind::singular_metric, "metric not positive definite at node " + std::to_string(p));
    const SmallMatrix gi = llt.solve(identity);
    // lambda_max(g^-1) <= trace(g^-1); only fall back to a spectrum when the
    // trace bound cannot certify lambda_min(g) > tolerance.
    if (gi.trace() * kSpdTolerance >= 1.0) {
      eig.compute(g, Eigen::EigenvaluesOnly);
      if (!(eig.eigenvalues()(0) > kSpdTolerance))
        throw Error(ErrorKind::singular_metric,
                    "metric eigenvalue below tolerance at node " + std::to_string(p));
    }
    std::size_t c = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j, ++c) inv(c, p) = 0.5 * (gi(i, j) + gi(j, i));
  }
  return inv;
}

double inverse_residual(const TensorField& metric, const TensorField& inverse_metric) {
  require_same_grid(metric, inverse_metric, "inverse_residual");
  const int n = metric.dim();
  double worst = 0.0;
  for (std::size_t p = 0; p < metric.node_count(); ++p) {
    const SmallMatrix prod = load_symmetric(inverse_metric, p) * load_symmetric(metric, p);
    worst = std::max(worst, (prod - SmallMatrix::Identity(n, n)).cwiseAbs().maxCoeff());
  }
  return worst;
}

TensorField christoffel(const TensorField& metric, const TensorField& inverse_metric) {
  require_same_grid(metric, inverse_metric, "christoffel");
  const auto dg = gradient(metric);
  return christoffel(inverse_metric, dg);
}

TensorField christoffel(const TensorField& inverse_metric, std::span<const TensorField> dg) {
  const Grid& grid = inverse_metric.grid();
  const int n = grid.dim();
  if (static_cast<int>(dg.size()) != n) throw Error(ErrorKind::dimension_mismatch, "metric gradient");
  for (const auto& d : dg) require_same_grid(d, inverse_metric, "christoffel");
  TensorField gamma(grid, {2, 1}, Symmetry::symmetric_pair);
  std::vector<double> first_kind(static_cast<std::size_t>(n) * n * n);
  for (std::size_t p = 0; p < grid.node_count(); ++p) {
    auto dgv = [&](int axis, int a, int b) { return dg[axis](packed_index(a, b, n), p); };
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
          first_kind[f3(n, l, i, j)] = 0.5 * (dgv(i, j, l) + dgv(j, i, l) - dgv(l, i, j));
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
          double s = 0.0;
          for (int l = 0; l < n; ++l) s += inverse_metric(packed_index(k, l, n), p) * first_kind[f3(n, l, i, j)];
          gamma(f3(n, k, i, j), p) = s;
          gamma(f3(n, k, j, i), p) = s;
        }
  }
  return gamma;
}

RiemannTensors riemann(const TensorField& gamma, const TensorField& metric) {
  require_same_grid(gamma, metric, "riemann");
  const Grid& grid = gamma.grid();
  const int n = grid.dim();
  const auto dgamma = gradient(gamma);
  RiemannTensors out{TensorField(grid, {3, 1}), TensorField(grid, {4, 0}, Symmetry::riemann)};
  std::vector<double> mixed(static_cast<std::size_t>(n) * n * n * n);
  for (std::size_t p = 0; p < grid.node_count(); ++p) {
    auto G = [&](int k, int i, int j) { return gamma(f3(n, k, i, j), p); };
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int l = 0; l < n; ++l) {
            double v = dgamma[i](f3(n, k, j, l), p) - dgamma[j](f3(n, k, i, l), p);
            for (int q = 0; q < n; ++q) v += G(k, i, q) * G(q, j, l) - G(k, j, q) * G(q, i, l);
            mixed[f4(n, k, i, j, l)] = v;
            out.mixed(f4(n, k, i, j, l), p) = v;
          }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            double v = 0.0;
            for (int q = 0; q < n; ++q) v += metric(packed_index(k, q, n), p) * mixed[f4(n, q, i, j, l)];
            out.low(f4(n, i, j, k, l), p) = v;
          }
  }
  return out;
}

RiemannResiduals riemann_residuals(const RiemannTensors& t) {
  const int n = t.low.dim();
  const std::size_t nodes = t.low.node_count();
  RiemannResiduals r;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          const auto a = t.low.component(f4(n, i, j, k, l));
          const auto b = t.low.component(f4(n, j, i, k, l));
          const auto c = t.low.component(f4(n, i, j, l, k));
          const auto d = t.low.component(f4(n, k, l, i, j));
          // first Bianchi on the mixed form with upper index k
          const auto m1 = t.mixed.component(f4(n, k, i, j, l));
          const auto m2 = t.mixed.component(f4(n, k, j, l, i));
          const auto m3 = t.mixed.component(f4(n, k, l, i, j));
          for (std::size_t p = 0; p < nodes; ++p) {
            r.antisymmetry_ij = std::max(r.antisymmetry_ij, std::abs(a[p] + b[p]));
            r.antisymmetry_kl = std::max(r.antisymmetry_kl, std::abs(a[p] + c[p]));
            r.pair_symmetry = std::max(r.pair_symmetry, std::abs(a[p] - d[p]));
            r.first_bianchi = std::max(r.first_bianchi, std::abs(m1[p] + m2[p] + m3[p]));
          }
        }
  return r;
}

TensorField ricci(const TensorField& riemann_low, const TensorField& inverse_metric) {
  require_same_grid(riemann_low, inverse_metric, "ricci");
  const int n = riemann_low.dim();
  TensorField ric = TensorField::covariant_symmetric(riemann_low.grid());
  for (std::size_t p = 0; p < riemann_low.node_count(); ++p)
    for (int i = 0; i < n; ++i)
      for (int k = i; k < n; ++k) {
        double s = 0.0;
        for (int j = 0; j < n; ++j)
          for (int l = 0; l < n; ++l)
            s += inverse_metric(packed_index(j, l, n), p) * riemann_low(f4(n, i, j, k, l), p);
        ric(packed_index(i, k, n), p) = s;
      }
  return ric;
}

double ricci_asymmetry(const TensorField& riemann_low, const TensorField& inverse_metric) {
  require_same_grid(riemann_low, inverse_metric, "ricci_asymmetry");
  const int n = riemann_low.dim();
  double worst = 0.0;
  for (std::size_t p = 0; p < riemann_low.node_count(); ++p)
    for (int i = 0; i < n; ++i)
      for (int k = i + 1; k < n; ++k) {
        double a = 0.0, b = 0.0;
        for (int j = 0; j < n; ++j)
          for (int l = 0; l < n; ++l) {
            const double gi = inverse_metric(packed_index(j, l, n), p);
            a += gi * riemann_low(f4(n, i, j, k, l), p);
            b += gi * riemann_low(f4(n, k, j, i, l), p);
          }
        worst = std::max(worst, std::abs(a - b));
      }
  return worst;
}

TensorField ricci_contracted(const TensorField& gamma) {
  const Grid& grid = gamma.grid();
  const int n = grid.dim();
  // d_p Gamma^p_{jl} only needs the derivative of the p-th slab along p.
  TensorField trace(grid, {1, 0});  // v_l = Gamma^p_{pl}
  for (std::size_t p = 0; p < grid.node_count(); ++p)
    for (int l = 0; l < n; ++l) {
      double s = 0.0;
      for (int q = 0; q < n; ++q) s += gamma(f3(n, q, q, l), p);
      trace(l, p) = s;
    }
  const auto dtrace = gradient(trace);
  const auto dgamma = gradient(gamma);
  TensorField ric = TensorField::covariant_symmetric(grid);
  for (std::size_t p = 0; p < grid.node_count(); ++p) {
    auto G = [&](int k, int i, int j) { return gamma(f3(n, k, i, j), p); };
    for (int j = 0; j < n; ++j)
      for (int l = j; l < n; ++l) {
        double v = -dtrace[j](l, p);
        for (int q = 0; q < n; ++q) {
          v += dgamma[q](f3(n, q, j, l), p);
          for (int r = 0; r < n; ++r) v += G(q, q, r) * G(r, j, l) - G(q, j, r) * G(r, q, l);
        }
        ric(packed_index(j, l, n), p) = v;
      }
  }
  return ric;
}

TensorField scalar_curvature(const TensorField& ric, const TensorField& inverse_metric) {
  require_same_grid(ric, inverse_metric, "scalar_curvature");
  const int n = ric.dim();
  TensorField out = TensorField::scalar(ric.grid());
  for (std::size_t p = 0; p < ric.node_count(); ++p) {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s += inverse_metric(packed_index(i, j, n), p) * ric(packed_index(i, j, n), p);
    out(0, p) = s;
  }
  return out;
}

TensorField b_tensor(const TensorField& riemann_low, const TensorField& inverse_metric) {
  require_same_grid(riemann_low, inverse_metric, "b_tensor");
  const int n = riemann_low.dim();
  TensorField b(riemann_low.grid(), {4, 0});
  const std::size_t n4 = static_cast<std::size_t>(n) * n * n * n;
  std::vector<double> raised(n4);  // S^{rs}_{ij} = g^{pr} g^{qs} R_{piqj}, stored (r, s, i, j)
  for (std::size_t node = 0; node < riemann_low.node_count(); ++node) {
    auto gi = [&](int a, int c) { return inverse_metric(packed_index(a, c, n), node); };
    auto R = [&](int a, int c, int d, int e) { return riemann_low(f4(n, a, c, d, e), node); };
    for (int r = 0; r < n; ++r)
      for (int s = 0; s < n; ++s)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            double v = 0.0;
            for (int p = 0; p < n; ++p)
              for (int q = 0; q < n; ++q) v += gi(p, r) * gi(q, s) * R(p, i, q, j);
            raised[f4(n, r, s, i, j)] = v;
          }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            double v = 0.0;
            for (int r = 0; r < n; ++r)
              for (int s = 0; s < n; ++s) v += raised[f4(n, r, s, i, j)] * R(r, k, s, l);
            b(f4(n, i, j, k, l), node) = v;
          }
  }
  return b;
}

TensorField gamma_trace(const TensorField& gamma, const TensorField& inverse_metric) {
  require_same_grid(gamma, inverse_metric, "gamma_trace");
  const int n = gamma.dim();
  TensorField out(gamma.grid(), {0, 1});
  for (std::size_t p = 0; p < gamma.node_count(); ++p)
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) s += inverse_metric(packed_index(k, l, n), p) * gamma(f3(n, i, k, l), p);
      out(i, p) = s;
    }
  return out;
}

TensorField principal_symbol(const TensorField& inverse_metric, std::span<const double> xi) {
  const int n = inverse_metric.dim();
  if (static_cast<int>(xi.size()) != n) throw Error(ErrorKind::dimension_mismatch, "covector length");
  double norm2 = 0.0;
  for (double v : xi) norm2 += v * v;
  if (norm2 == 0.0) throw Error(ErrorKind::zero_covector, "principal symbol needs xi != 0");
  if (std::abs(std::sqrt(norm2) - 1.0) > 1e-12)
    throw Error(ErrorKind::invalid_argument, "covector must have unit Euclidean norm");
  TensorField out = TensorField::scalar(inverse_metric.grid());
  for (std::size_t p = 0; p < inverse_metric.node_count(); ++p) {
    double s = 0.0;
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l) s += inverse_metric(packed_index(k, l, n), p) * xi[k] * xi[l];
    out(0, p) = s;
  }
  return out;
}

std::vector<std::vector<double>> hyperbolicity_covectors(int n) {
  std::vector<std::vector<double>> out;
  for (int a = 0; a < n; ++a)
    for (double sign : {1.0, -1.0}) {
      std::vector<double> xi(n, 0.0);
      xi[a] = sign;
      out.push_back(std::move(xi));
    }
  const double h = 1.0 / std::sqrt(2.0);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      std::vector<double> xi(n, 0.0);
      xi[a] = h;
      xi[b] = h;
      out.push_back(std::move(xi));
    }
  return out;
}

double hyperbolicity_certificate(const TensorField& inverse_metric) {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& xi : hyperbolicity_covectors(inverse_metric.dim())) {
    const TensorField sigma = principal_symbol(inverse_metric, xi);
    for (double v : sigma.data()) lo = std::min(lo, v);
  }
  return lo;
}

CurvatureBundle compute_curvature(const TensorField& metric) {
  CurvatureBundle b;
  b.inverse_metric = metric_inverse(metric);
  b.inverse_residual = inverse_residual(metric, b.inverse_metric);
  b.christoffel = christoffel(metric, b.inverse_metric);
  RiemannTensors rt = riemann(b.christoffel, metric);
  b.riemann_residuals = riemann_residuals(rt);
  b.riemann_mixed = std::move(rt.mixed);
  b.riemann_low = std::move(rt.low);
  b.ricci = ricci(b.riemann_low, b.inverse_metric);
  b.ricci_asymmetry = ricci_asymmetry(b.riemann_low, b.inverse_metric);
  b.scalar = scalar_curvature(b.ricci, b.inverse_metric);
  b.gamma_trace = gamma_trace(b.christoffel, b.inverse_metric);
  return b;
}

}  // namespace hgf
