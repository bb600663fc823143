#pragma once

#include <span>
#include <vector>

#include "lgi/autodiff.hpp"
#include "lgi/product.hpp"

namespace lgi::product {

/// Number of curvature parameters a signature carries: one per non-Euclidean
/// factor.
int curvature_count(const ManifoldSignature& sig);

/// Differentiable exponential map for one factor at its canonical base point.
///
/// `v` is {n, dim}; the result is {n, ambient_dim}. `K` must be a scalar
/// variable on the same tape with the sign the space requires (ignored for
/// Euclidean factors — pass anything). Rows with norm below 1e-12 are treated
/// as radius 1e-12, which reproduces the base point with a zero radial
/// subgradient instead of dividing by zero.
ad::Var ad_exp_block(ad::Tape& tape, manifolds::SpaceKind kind, ad::Var v, ad::Var K);

/// Differentiable pairwise geodesic distance matrix for one factor.
///
/// `points` is {n, ambient_dim}; the result is {n, n}. Unlike the scalar-path
/// distances this carries no membership gate: it is the smooth extension of
/// each formula to ambient coordinates, which is exactly what gradients of
/// off-manifold perturbations (finite differences included) require.
/// Self-distances sit at formula kinks with zero subgradient; downstream
/// users mask the diagonal. Curvature magnitudes below 1e-8 select the flat
/// limit 2|x - y| for the projected spaces, matching the scalar path.
ad::Var ad_dist_block(ad::Tape& tape, manifolds::SpaceKind kind, ad::Var points, ad::Var K);

/// Componentwise differentiable exp: splits `tangents` ({n, tangent_dim}) by
/// factor and maps each block. `curvatures` holds one scalar variable per
/// non-Euclidean factor in signature order (see curvature_count).
std::vector<ad::Var> ad_product_exp(ad::Tape& tape, const ManifoldSignature& sig,
                                    ad::Var tangents, std::span<const ad::Var> curvatures);

/// Product distance matrix: sqrt of the summed squared factor distances.
/// Single-factor products return the factor distance matrix unchanged.
ad::Var ad_product_dist(ad::Tape& tape, const ManifoldSignature& sig,
                        std::span<const ad::Var> blocks, std::span<const ad::Var> curvatures);

}  // namespace lgi::product
