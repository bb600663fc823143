#pragma once

#include <optional>
#include <span>
#include <vector>

#include "lgi/errors.hpp"

namespace lgi::manifolds {

/// The five constant-curvature model spaces.
///
/// E and the two stereographic models (P, D) live in flat coordinates of the
/// tangent dimension; H and S are quadrics embedded in one extra ambient
/// dimension.
enum class SpaceKind : char {
  Euclidean = 'E',
  Hyperboloid = 'H',
  Hypersphere = 'S',
  PoincareBall = 'P',
  StereoSphere = 'D',
};

char kind_to_char(SpaceKind kind);
std::optional<SpaceKind> kind_from_char(char c);

/// True for spaces whose ambient dimension exceeds the tangent dimension.
bool embedded_in_extra_dim(SpaceKind kind);

/// Required curvature sign: -1 for H/P, +1 for S/D, 0 for E.
int curvature_sign(SpaceKind kind);

/// One factor of a product manifold: a space, its tangent dimension, and its
/// curvature.
struct ComponentSpec {
  SpaceKind kind = SpaceKind::Euclidean;
  int dim = 2;
  double curvature = 0.0;

  int ambient_dim() const { return dim + (embedded_in_extra_dim(kind) ? 1 : 0); }

  /// Throws CurvatureSignError or DimensionError when the spec is inconsistent.
  void validate() const;
};

/// Lorentz inner product -x0*y0 + sum_{i>=1} xi*yi.
double lorentz_inner(std::span<const double> x, std::span<const double> y);

/// Geodesic distance in the Poincare ball of curvature K < 0.
///
/// d = arccosh(1 - 2K|x-y|^2 / ((1+K|x|^2)(1+K|y|^2))) / sqrt(-K), with the
/// arccosh argument clamped to >= 1. For |K| < 1e-8 the flat limit 2|x-y| is
/// returned. Points on or outside the ball boundary raise DomainError.
double dist_poincare(std::span<const double> x, std::span<const double> y, double K);

/// Geodesic distance in the stereographic sphere model of curvature K > 0.
///
/// d = arccos(1 - 2K|x-y|^2 / ((1+K|x|^2)(1+K|y|^2))) / sqrt(K), argument
/// clamped to [-1, 1]. For K < 1e-8 the flat limit 2|x-y| is returned.
double dist_stereo_sphere(std::span<const double> x, std::span<const double> y, double K);

/// Geodesic distance on the hyperboloid <x,x>_L = 1/K, K < 0.
/// d = arccosh(K * <x,y>_L) / sqrt(-K), argument clamped to >= 1.
/// Membership is checked to 1e-6; violations raise DomainError.
double dist_hyperboloid(std::span<const double> x, std::span<const double> y, double K);

/// Geodesic distance on the hypersphere <x,x> = 1/K, K > 0.
/// d = arccos(K * <x,y>) / sqrt(K), argument clamped to [-1, 1].
/// Membership is checked to 1e-6; violations raise DomainError.
double dist_hypersphere(std::span<const double> x, std::span<const double> y, double K);

/// Plain Euclidean distance (the E component metric; K must be 0).
double dist_euclidean(std::span<const double> x, std::span<const double> y);

/// Distance dispatch on a component spec.
double component_dist(const ComponentSpec& spec, std::span<const double> x,
                      std::span<const double> y);

/// The canonical base point: the origin for E/P/D, (1/sqrt(|K|), 0, ..., 0)
/// for H/S. `dim` is the tangent dimension.
std::vector<double> base_point(SpaceKind kind, int dim, double K);

/// Exponential map at the canonical base point.
///
///   E: v                      (identity)
///   P: tanh(c r)/(c r) * v                         c = sqrt(-K), r = |v|
///   D: tan(s r)/(s r) * v  with s r capped at pi/2 - 1e-3 by rescaling v,
///                                                  s = sqrt(K)
///   H: (cosh(c r)/c, sinh(c r)/(c r) * v)
///   S: (cos(s r)/s,  sin(s r)/(s r) * v)
///
/// v = 0 maps to the base point exactly. A curvature sign inconsistent with
/// the space raises CurvatureSignError.
std::vector<double> exp_map(SpaceKind kind, std::span<const double> v, double K);

/// True iff `p` satisfies the membership invariant of (kind, K) within tol:
///   H: |<p,p>_L - 1/K| <= tol and p0 > 0
///   S: |<p,p>   - 1/K| <= tol
///   P: |p|^2 < -1/K + tol
///   E/D: all coordinates finite (E additionally requires K = 0)
/// Total: never throws; sign-inconsistent curvature yields false.
bool check_membership(std::span<const double> p, SpaceKind kind, double K, double tol);

/// Curvature magnitude below which projected-space distances switch to their
/// exact flat limit 2|x-y|.
inline constexpr double kFlatCurvatureThreshold = 1e-8;

/// Membership tolerance applied inside the quadric distance functions.
inline constexpr double kDistanceMembershipTol = 1e-6;

/// Cap on sqrt(K)*|v| in the D exponential map, just short of the tan pole.
double stereo_sphere_arg_cap();

}  // namespace lgi::manifolds
