#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lgi/manifolds.hpp"

namespace lgi::product {

using manifolds::ComponentSpec;
using manifolds::SpaceKind;

/// Default curvature per space: 0 for E, -1 for H/P, +1 for S/D.
double default_curvature(SpaceKind kind);

/// An ordered list of model-space components forming a product manifold.
struct ManifoldSignature {
  std::vector<ComponentSpec> components;

  int tangent_dim() const;
  int ambient_dim() const;
  std::size_t size() const { return components.size(); }

  /// Canonical text form ("EHP", with explicit dims when not 2, e.g. "E4H2").
  std::string str() const;

  /// Throws when any component spec is inconsistent or the list is empty.
  void validate() const;
};

/// Parses a signature string matching ([EHSPD][0-9]*)+. A letter may be
/// followed by a dimension override; otherwise `default_dim` applies.
/// Curvatures are initialized with default_curvature(). Unknown characters
/// raise ParseError naming the offender.
ManifoldSignature parse_signature(std::string_view text, int default_dim = 2);

/// A point on a product manifold: one ambient coordinate block per component.
struct ProductPoint {
  std::vector<std::vector<double>> parts;

  /// Concatenated ambient coordinates in component order.
  std::vector<double> flatten() const;
};

/// Componentwise exponential map: `v` (length = total tangent dim) is split
/// into per-component blocks in signature order and each block is mapped by
/// its space's exp map.
ProductPoint product_exp(const ManifoldSignature& sig, std::span<const double> v);

/// Aggregated geodesic distance: sqrt of the sum of squared component
/// distances. A single-component product returns the component distance
/// unchanged. Membership violations raise DomainError naming the component.
double product_dist(const ManifoldSignature& sig, const ProductPoint& a,
                    const ProductPoint& b);

}  // namespace lgi::product
