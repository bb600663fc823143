#include "lgi/manifolds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace lgi::manifolds {

namespace {

void require_same_size(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw DimensionError("vector length mismatch: " + std::to_string(x.size()) +
                         " vs " + std::to_string(y.size()));
  }
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double a) { return std::isfinite(a); });
}

bool bitwise_equal(std::span<const double> x, std::span<const double> y) {
  return x.size() == y.size() && std::equal(x.begin(), x.end(), y.begin());
}

double sq_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double a : v) acc += a * a;
  return acc;
}

double sq_dist(std::span<const double> x, std::span<const double> y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    acc += d * d;
  }
  return acc;
}

// arccosh(1 + u) for u >= 0, accurate near u = 0 (cosh 2t = 1 + 2 sinh^2 t).
double acosh1p(double u) {
  if (u <= 0.0) return 0.0;
  return 2.0 * std::asinh(std::sqrt(0.5 * u));
}

// arccos(1 - u) for u in [0, 2], accurate near u = 0 (cos 2t = 1 - 2 sin^2 t).
double acos1m(double u) {
  u = std::clamp(u, 0.0, 2.0);
  return 2.0 * std::asin(std::sqrt(0.5 * u));
}

}  // namespace

char kind_to_char(SpaceKind kind) { return static_cast<char>(kind); }

std::optional<SpaceKind> kind_from_char(char c) {
  switch (c) {
    case 'E': return SpaceKind::Euclidean;
    case 'H': return SpaceKind::Hyperboloid;
    case 'S': return SpaceKind::Hypersphere;
    case 'P': return SpaceKind::PoincareBall;
    case 'D': return SpaceKind::StereoSphere;
    default: return std::nullopt;
  }
}

bool embedded_in_extra_dim(SpaceKind kind) {
  return kind == SpaceKind::Hyperboloid || kind == SpaceKind::Hypersphere;
}

int curvature_sign(SpaceKind kind) {
  switch (kind) {
    case SpaceKind::Euclidean: return 0;
    case SpaceKind::Hyperboloid:
    case SpaceKind::PoincareBall: return -1;
    case SpaceKind::Hypersphere:
    case SpaceKind::StereoSphere: return 1;
  }
  return 0;
}

void ComponentSpec::validate() const {
  if (dim < 1) {
    throw DimensionError("component dimension must be positive, got " + std::to_string(dim));
  }
  const int sign = curvature_sign(kind);
  const bool ok = (sign == 0 && curvature == 0.0) || (sign < 0 && curvature < 0.0) ||
                  (sign > 0 && curvature > 0.0);
  if (!ok) {
    throw CurvatureSignError(std::string("curvature ") + std::to_string(curvature) +
                             " invalid for space " + kind_to_char(kind));
  }
}

double lorentz_inner(std::span<const double> x, std::span<const double> y) {
  require_same_size(x, y);
  if (x.size() < 2) {
    throw DimensionError("Lorentz inner product needs length >= 2");
  }
  double acc = -x[0] * y[0];
  for (std::size_t i = 1; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}

double dist_poincare(std::span<const double> x, std::span<const double> y, double K) {
  if (!(K < 0.0)) {
    throw CurvatureSignError("Poincare ball requires K < 0, got " + std::to_string(K));
  }
  require_same_size(x, y);
  const double fx = 1.0 + K * sq_norm(x);
  const double fy = 1.0 + K * sq_norm(y);
  if (fx <= 0.0 || fy <= 0.0) {
    throw DomainError("point on or outside the Poincare ball boundary");
  }
  if (bitwise_equal(x, y)) return 0.0;
  if (-K < kFlatCurvatureThreshold) return 2.0 * std::sqrt(sq_dist(x, y));
  const double u = -2.0 * K * sq_dist(x, y) / (fx * fy);
  return acosh1p(u) / std::sqrt(-K);
}

double dist_stereo_sphere(std::span<const double> x, std::span<const double> y, double K) {
  if (!(K > 0.0)) {
    throw CurvatureSignError("stereographic sphere requires K > 0, got " + std::to_string(K));
  }
  require_same_size(x, y);
  if (bitwise_equal(x, y)) return 0.0;
  if (K < kFlatCurvatureThreshold) return 2.0 * std::sqrt(sq_dist(x, y));
  const double fx = 1.0 + K * sq_norm(x);
  const double fy = 1.0 + K * sq_norm(y);
  const double u = 2.0 * K * sq_dist(x, y) / (fx * fy);
  return acos1m(u) / std::sqrt(K);
}

double dist_hyperboloid(std::span<const double> x, std::span<const double> y, double K) {
  if (!(K < 0.0)) {
    throw CurvatureSignError("hyperboloid requires K < 0, got " + std::to_string(K));
  }
  require_same_size(x, y);
  if (!check_membership(x, SpaceKind::Hyperboloid, K, kDistanceMembershipTol) ||
      !check_membership(y, SpaceKind::Hyperboloid, K, kDistanceMembershipTol)) {
    throw DomainError("point off the hyperboloid <x,x>_L = 1/K");
  }
  if (bitwise_equal(x, y)) return 0.0;
  const double arg = K * lorentz_inner(x, y);
  return acosh1p(std::max(arg - 1.0, 0.0)) / std::sqrt(-K);
}

double dist_hypersphere(std::span<const double> x, std::span<const double> y, double K) {
  if (!(K > 0.0)) {
    throw CurvatureSignError("hypersphere requires K > 0, got " + std::to_string(K));
  }
  require_same_size(x, y);
  if (!check_membership(x, SpaceKind::Hypersphere, K, kDistanceMembershipTol) ||
      !check_membership(y, SpaceKind::Hypersphere, K, kDistanceMembershipTol)) {
    throw DomainError("point off the hypersphere <x,x> = 1/K");
  }
  if (bitwise_equal(x, y)) return 0.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
  const double arg = std::clamp(K * dot, -1.0, 1.0);
  return std::acos(arg) / std::sqrt(K);
}

double dist_euclidean(std::span<const double> x, std::span<const double> y) {
  require_same_size(x, y);
  return std::sqrt(sq_dist(x, y));
}

double component_dist(const ComponentSpec& spec, std::span<const double> x,
                      std::span<const double> y) {
  switch (spec.kind) {
    case SpaceKind::Euclidean: return dist_euclidean(x, y);
    case SpaceKind::Hyperboloid: return dist_hyperboloid(x, y, spec.curvature);
    case SpaceKind::Hypersphere: return dist_hypersphere(x, y, spec.curvature);
    case SpaceKind::PoincareBall: return dist_poincare(x, y, spec.curvature);
    case SpaceKind::StereoSphere: return dist_stereo_sphere(x, y, spec.curvature);
  }
  throw ConfigError("unknown space kind");
}

std::vector<double> base_point(SpaceKind kind, int dim, double K) {
  if (embedded_in_extra_dim(kind)) {
    std::vector<double> p(static_cast<std::size_t>(dim) + 1, 0.0);
    p[0] = 1.0 / std::sqrt(std::abs(K));
    return p;
  }
  return std::vector<double>(static_cast<std::size_t>(dim), 0.0);
}

double stereo_sphere_arg_cap() { return std::numbers::pi / 2.0 - 1e-3; }

std::vector<double> exp_map(SpaceKind kind, std::span<const double> v, double K) {
  const int sign = curvature_sign(kind);
  const bool sign_ok = (sign == 0 && K == 0.0) || (sign < 0 && K < 0.0) || (sign > 0 && K > 0.0);
  if (!sign_ok) {
    throw CurvatureSignError(std::string("curvature ") + std::to_string(K) +
                             " inconsistent with space " + kind_to_char(kind));
  }
  if (!all_finite(v)) {
    throw DomainError("non-finite tangent vector");
  }
  const int dim = static_cast<int>(v.size());
  const double r = std::sqrt(sq_norm(v));
  if (r == 0.0) return base_point(kind, dim, K);

  switch (kind) {
    case SpaceKind::Euclidean:
      return {v.begin(), v.end()};
    case SpaceKind::PoincareBall: {
      const double t = std::sqrt(-K) * r;
      // tanh rounds to exactly 1 past t ~ 19, which would land on the ball
      // boundary; cap it so the image stays strictly inside.
      const double th = std::min(std::tanh(t), 1.0 - 1e-12);
      const double coef = th / t;  // tanh(t)/t == 1 exactly for tiny t
      std::vector<double> out(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) out[i] = coef * v[i];
      return out;
    }
    case SpaceKind::StereoSphere: {
      const double s = std::sqrt(K);
      const double t = std::min(s * r, stereo_sphere_arg_cap());
      const double coef = std::tan(t) / (s * r);
      std::vector<double> out(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) out[i] = coef * v[i];
      return out;
    }
    case SpaceKind::Hyperboloid: {
      const double c = std::sqrt(-K);
      const double t = c * r;
      std::vector<double> out(v.size() + 1);
      out[0] = std::cosh(t) / c;
      const double coef = std::sinh(t) / t;
      for (std::size_t i = 0; i < v.size(); ++i) out[i + 1] = coef * v[i];
      return out;
    }
    case SpaceKind::Hypersphere: {
      const double s = std::sqrt(K);
      const double t = s * r;
      std::vector<double> out(v.size() + 1);
      out[0] = std::cos(t) / s;
      const double coef = std::sin(t) / t;
      for (std::size_t i = 0; i < v.size(); ++i) out[i + 1] = coef * v[i];
      return out;
    }
  }
  throw ConfigError("unknown space kind");
}

bool check_membership(std::span<const double> p, SpaceKind kind, double K, double tol) {
  if (!all_finite(p)) return false;
  switch (kind) {
    case SpaceKind::Euclidean:
      return K == 0.0;
    case SpaceKind::StereoSphere:
      return K > 0.0;
    case SpaceKind::PoincareBall:
      return K < 0.0 && sq_norm(p) < -1.0 / K + tol;
    case SpaceKind::Hyperboloid: {
      if (!(K < 0.0) || p.size() < 2) return false;
      return std::abs(lorentz_inner(p, p) - 1.0 / K) <= tol && p[0] > 0.0;
    }
    case SpaceKind::Hypersphere: {
      if (!(K > 0.0)) return false;
      return std::abs(sq_norm(p) - 1.0 / K) <= tol;
    }
  }
  return false;
}

}  // namespace lgi::manifolds
