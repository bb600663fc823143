#include "lgi/product.hpp"

#include <cctype>
#include <cmath>

namespace lgi::product {

double default_curvature(SpaceKind kind) {
  switch (manifolds::curvature_sign(kind)) {
    case -1: return -1.0;
    case 1: return 1.0;
    default: return 0.0;
  }
}

int ManifoldSignature::tangent_dim() const {
  int total = 0;
  for (const auto& c : components) total += c.dim;
  return total;
}

int ManifoldSignature::ambient_dim() const {
  int total = 0;
  for (const auto& c : components) total += c.ambient_dim();
  return total;
}

std::string ManifoldSignature::str() const {
  std::string out;
  for (const auto& c : components) {
    out.push_back(manifolds::kind_to_char(c.kind));
    if (c.dim != 2) out += std::to_string(c.dim);
  }
  return out;
}

void ManifoldSignature::validate() const {
  if (components.empty()) {
    throw ConfigError("signature must contain at least one component");
  }
  for (const auto& c : components) c.validate();
}

ManifoldSignature parse_signature(std::string_view text, int default_dim) {
  if (text.empty()) {
    throw ParseError("empty signature string");
  }
  if (default_dim < 1) {
    throw ConfigError("default dimension must be positive");
  }
  ManifoldSignature sig;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    const auto kind = manifolds::kind_from_char(c);
    if (!kind) {
      throw ParseError(std::string("unknown space letter '") + c + "' in signature \"" +
                       std::string(text) + "\"");
    }
    ++i;
    int dim = default_dim;
    if (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
      int value = 0;
      while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
        value = value * 10 + (text[i] - '0');
        ++i;
      }
      if (value < 1) {
        throw ParseError(std::string("dimension 0 after '") + c + "' in signature");
      }
      dim = value;
    }
    sig.components.push_back(ComponentSpec{*kind, dim, default_curvature(*kind)});
  }
  sig.validate();
  return sig;
}

std::vector<double> ProductPoint::flatten() const {
  std::vector<double> out;
  for (const auto& part : parts) out.insert(out.end(), part.begin(), part.end());
  return out;
}

ProductPoint product_exp(const ManifoldSignature& sig, std::span<const double> v) {
  sig.validate();
  if (static_cast<int>(v.size()) != sig.tangent_dim()) {
    throw DimensionError("tangent vector length " + std::to_string(v.size()) +
                         " does not match signature tangent dimension " +
                         std::to_string(sig.tangent_dim()));
  }
  ProductPoint point;
  point.parts.reserve(sig.components.size());
  std::size_t offset = 0;
  for (const auto& c : sig.components) {
    const auto block = v.subspan(offset, static_cast<std::size_t>(c.dim));
    point.parts.push_back(manifolds::exp_map(c.kind, block, c.curvature));
    offset += static_cast<std::size_t>(c.dim);
  }
  return point;
}

double product_dist(const ManifoldSignature& sig, const ProductPoint& a,
                    const ProductPoint& b) {
  sig.validate();
  if (a.parts.size() != sig.components.size() || b.parts.size() != sig.components.size()) {
    throw DimensionError("product point component count does not match signature");
  }
  for (std::size_t i = 0; i < sig.components.size(); ++i) {
    const auto& c = sig.components[i];
    const auto amb = static_cast<std::size_t>(c.ambient_dim());
    if (a.parts[i].size() != amb || b.parts[i].size() != amb) {
      throw DimensionError("component " + std::to_string(i) + " has wrong ambient size");
    }
    if (!manifolds::check_membership(a.parts[i], c.kind, c.curvature,
                                     manifolds::kDistanceMembershipTol) ||
        !manifolds::check_membership(b.parts[i], c.kind, c.curvature,
                                     manifolds::kDistanceMembershipTol)) {
      throw DomainError("membership violation in component " + std::to_string(i));
    }
  }
  if (sig.components.size() == 1) {
    return manifolds::component_dist(sig.components[0], a.parts[0], b.parts[0]);
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < sig.components.size(); ++i) {
    const double d = manifolds::component_dist(sig.components[i], a.parts[i], b.parts[i]);
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace lgi::product
