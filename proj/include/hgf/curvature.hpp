#pragma once

#include <span>
#include <vector>

#include "hgf/grid_field.hpp"

namespace hgf {

// Index conventions for dense fields (flat index, last index fastest):
//   christoffel     Gamma^k_{ij}  -> (k, i, j)
//   riemann_mixed   R^k_{ijl}     -> (k, i, j, l)
//   riemann_low     R_{ijkl}      -> (i, j, k, l), R_{ijkl} = g_{kp} R^p_{ijl}
// Ricci is R_{ik} = g^{jl} R_{ijkl}; for the unit round sphere this gives
// Ric = (n-1) g.

/// First derivatives of a field along every axis.
std::vector<TensorField> gradient(const TensorField& field);

/// Pointwise inverse via Cholesky. Throws singular_metric when the smallest
/// eigenvalue is at or below kSpdTolerance.
TensorField metric_inverse(const TensorField& metric);

/// Largest |g^{ik} g_{kj} - delta^i_j| over the grid.
double inverse_residual(const TensorField& metric, const TensorField& inverse_metric);

TensorField christoffel(const TensorField& metric, const TensorField& inverse_metric);
/// Same as above with precomputed metric derivatives (one per axis).
TensorField christoffel(const TensorField& inverse_metric, std::span<const TensorField> metric_gradient);

struct RiemannTensors {
  TensorField mixed;
  TensorField low;
};

RiemannTensors riemann(const TensorField& christoffel, const TensorField& metric);

/// Discretisation residuals of the algebraic Riemann identities.
struct RiemannResiduals {
  double antisymmetry_ij = 0.0;
  double antisymmetry_kl = 0.0;
  double pair_symmetry = 0.0;
  double first_bianchi = 0.0;  ///< R^k_{ijl} + R^k_{jli} + R^k_{lij}
};

RiemannResiduals riemann_residuals(const RiemannTensors& tensors);

TensorField ricci(const TensorField& riemann_low, const TensorField& inverse_metric);
/// max |R_ik - R_ki| of the contraction before canonical storage.
double ricci_asymmetry(const TensorField& riemann_low, const TensorField& inverse_metric);

/// Ricci from the contraction R^p_{pjl}, without forming the full Riemann
/// tensor. Agrees with ricci() to discretisation error.
TensorField ricci_contracted(const TensorField& christoffel);

TensorField scalar_curvature(const TensorField& ricci, const TensorField& inverse_metric);

/// B_ijkl = g^{pr} g^{qs} R_piqj R_rksl.
TensorField b_tensor(const TensorField& riemann_low, const TensorField& inverse_metric);

/// Gamma^i = g^{kl} Gamma^i_{kl}; vanishes in elliptic coordinates.
TensorField gamma_trace(const TensorField& christoffel, const TensorField& inverse_metric);

/// sigma(xi) = g^{kl} xi_k xi_l for a Euclidean unit covector.
TensorField principal_symbol(const TensorField& inverse_metric, std::span<const double> xi);

/// The 2n signed axis directions followed by the n(n-1)/2 normalised
/// diagonals e_a + e_b, in a fixed order.
std::vector<std::vector<double>> hyperbolicity_covectors(int n);

/// Minimum of the principal symbol over all nodes and the fixed covector
/// sample; strictly positive for an SPD metric.
double hyperbolicity_certificate(const TensorField& inverse_metric);

struct CurvatureBundle {
  TensorField inverse_metric;
  TensorField christoffel;
  TensorField riemann_mixed;
  TensorField riemann_low;
  TensorField ricci;
  TensorField scalar;
  TensorField gamma_trace;
  double inverse_residual = 0.0;
  double ricci_asymmetry = 0.0;
  RiemannResiduals riemann_residuals;
};

CurvatureBundle compute_curvature(const TensorField& metric);

}  // namespace hgf
