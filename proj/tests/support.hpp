#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "hgf/error.hpp"
#include "hgf/grid_field.hpp"

namespace hgf::test {

inline constexpr double kTwoPi = 6.283185307179586;

template <class F>
std::optional<ErrorKind> thrown_kind(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

inline Grid square_grid(int dim, std::size_t points, double length = kTwoPi) {
  return make_grid(dim, std::vector<std::size_t>(dim, points), std::vector<double>(dim, length));
}

/// Same matrix at every node.
inline TensorField constant_symmetric(const Grid& grid, const SmallMatrix& m, bool contravariant = false) {
  TensorField f = contravariant ? TensorField::contravariant_symmetric(grid) : TensorField::covariant_symmetric(grid);
  const int n = grid.dim();
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      for (double& v : f.component(packed_index(i, j, n))) v = m(i, j);
  return f;
}

inline TensorField scaled_identity(const Grid& grid, double s) {
  return constant_symmetric(grid, s * SmallMatrix::Identity(grid.dim(), grid.dim()));
}

/// exp(2 phi) delta with phi given pointwise.
inline TensorField conformal_metric(const Grid& grid, const std::function<double(std::span<const double>)>& phi) {
  return sample_field(
      [&](std::span<const double> x, std::span<const int> idx) {
        return idx[0] == idx[1] ? std::exp(2.0 * phi(x)) : 0.0;
      },
      grid, {2, 0}, Symmetry::symmetric_pair);
}

inline double max_abs_diff(const TensorField& a, const TensorField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

/// Stored component value of a field sampled from f at node p.
inline double sampled(const Grid& grid, std::size_t p, const std::function<double(std::span<const double>)>& f) {
  std::vector<double> x(grid.dim());
  grid.coordinates(p, x);
  return f(x);
}

}  // namespace hgf::test
