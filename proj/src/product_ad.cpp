#include "lgi/product_ad.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace lgi::product {

using ad::Tape;
using ad::Tensor;
using ad::Var;
using manifolds::SpaceKind;

namespace {

double require_signed_curvature(Tape& tape, SpaceKind kind, Var K) {
  const double k = tape.value(K).scalar_value();
  const int sign = manifolds::curvature_sign(kind);
  const bool ok = (sign < 0 && k < 0.0) || (sign > 0 && k > 0.0);
  if (!ok) {
    throw CurvatureSignError(std::string("curvature ") + std::to_string(k) +
                             " inconsistent with space " + manifolds::kind_to_char(kind));
  }
  return k;
}

// Row norms clamped away from zero so radial coefficients never divide 0/0.
Var safe_row_norms(Tape& t, Var v) {
  return t.clamp(t.row_norm2(v), 1e-12, std::numeric_limits<double>::max());
}

// 1 + K |x_i|^2 per row, {n,1}.
Var conformal_factor(Tape& t, Var points, Var K) {
  Var sq = t.row_sum(t.mul(points, points));
  return t.affine(t.mul(sq, K), 1.0, 1.0);
}

// (1 + K|x_i|^2)(1 + K|x_j|^2) as an {n,n} grid.
Var factor_grid(Tape& t, Var points, Var K) {
  Var f = conformal_factor(t, points, K);
  std::size_t n = t.value(points).rows();
  return t.mul(t.broadcast(f, {n, n}), t.broadcast(t.transpose(f), {n, n}));
}

}  // namespace

int curvature_count(const ManifoldSignature& sig) {
  int count = 0;
  for (const auto& c : sig.components) {
    if (c.kind != SpaceKind::Euclidean) ++count;
  }
  return count;
}

Var ad_exp_block(Tape& t, SpaceKind kind, Var v, Var K) {
  if (t.value(v).rank() != 2) throw ShapeError("ad_exp_block expects {n, dim} tangents");
  if (kind == SpaceKind::Euclidean) return v;
  require_signed_curvature(t, kind, K);
  const std::size_t n = t.value(v).rows();
  const std::size_t d = t.value(v).cols();
  Var r = safe_row_norms(t, v);

  switch (kind) {
    case SpaceKind::PoincareBall: {
      Var c = t.sqrt_(t.neg(K));
      Var arg = t.mul(r, c);
      Var th = t.clamp(t.tanh_(arg), 0.0, 1.0 - 1e-12);  // strict ball containment
      Var coef = t.div(th, arg);
      return t.mul(v, t.broadcast(coef, {n, d}));
    }
    case SpaceKind::StereoSphere: {
      Var s = t.sqrt_(K);
      Var raw = t.mul(r, s);
      Var capped = t.clamp(raw, 0.0, manifolds::stereo_sphere_arg_cap());
      Var coef = t.div(t.tan_(capped), raw);  // past the cap: rescales toward the pole
      return t.mul(v, t.broadcast(coef, {n, d}));
    }
    case SpaceKind::Hyperboloid: {
      Var c = t.sqrt_(t.neg(K));
      Var arg = t.mul(r, c);
      Var first = t.div(t.cosh_(arg), c);
      Var coef = t.div(t.sinh_(arg), arg);
      Var rest = t.mul(v, t.broadcast(coef, {n, d}));
      std::vector<Var> parts{first, rest};
      return t.concat_cols(parts);
    }
    case SpaceKind::Hypersphere: {
      Var s = t.sqrt_(K);
      Var arg = t.mul(r, s);
      Var first = t.div(t.cos_(arg), s);
      Var coef = t.div(t.sin_(arg), arg);
      Var rest = t.mul(v, t.broadcast(coef, {n, d}));
      std::vector<Var> parts{first, rest};
      return t.concat_cols(parts);
    }
    default:
      throw ConfigError("unknown space kind");
  }
}

Var ad_dist_block(Tape& t, SpaceKind kind, Var points, Var K) {
  if (t.value(points).rank() != 2) throw ShapeError("ad_dist_block expects {n, ambient} points");
  const std::size_t n = t.value(points).rows();
  const std::size_t m = t.value(points).cols();

  if (kind == SpaceKind::Euclidean) {
    return t.sqrt_(t.pairwise_sqdist(points));
  }
  const double k = require_signed_curvature(t, kind, K);

  switch (kind) {
    case SpaceKind::PoincareBall: {
      if (-k < manifolds::kFlatCurvatureThreshold) {
        return t.affine(t.sqrt_(t.pairwise_sqdist(points)), 2.0, 0.0);
      }
      Var u = t.div(t.mul(t.pairwise_sqdist(points), t.affine(K, -2.0, 0.0)),
                    factor_grid(t, points, K));
      return t.div(t.arccosh1p(u), t.sqrt_(t.neg(K)));
    }
    case SpaceKind::StereoSphere: {
      if (k < manifolds::kFlatCurvatureThreshold) {
        return t.affine(t.sqrt_(t.pairwise_sqdist(points)), 2.0, 0.0);
      }
      Var u = t.div(t.mul(t.pairwise_sqdist(points), t.affine(K, 2.0, 0.0)),
                    factor_grid(t, points, K));
      return t.div(t.arccos1m(u), t.sqrt_(K));
    }
    case SpaceKind::Hyperboloid: {
      // Lorentz gram via sign-flipped first column
      Tensor jrow({1, m});
      jrow(0, 0) = -1.0;
      for (std::size_t j = 1; j < m; ++j) jrow(0, j) = 1.0;
      Var flipped = t.mul(points, t.broadcast(t.constant(jrow), {n, m}));
      Var gram = t.matmul(flipped, t.transpose(points));
      Var u = t.relu(t.affine(t.mul(gram, K), 1.0, -1.0));
      return t.div(t.arccosh1p(u), t.sqrt_(t.neg(K)));
    }
    case SpaceKind::Hypersphere: {
      Var gram = t.matmul(points, t.transpose(points));
      return t.div(t.arccos_clamped(t.mul(gram, K)), t.sqrt_(K));
    }
    default:
      throw ConfigError("unknown space kind");
  }
}

std::vector<Var> ad_product_exp(Tape& t, const ManifoldSignature& sig, Var tangents,
                                std::span<const Var> curvatures) {
  sig.validate();
  if (static_cast<int>(curvatures.size()) != curvature_count(sig)) {
    throw ConfigError("expected one curvature variable per non-Euclidean factor");
  }
  if (t.value(tangents).rank() != 2 ||
      t.value(tangents).cols() != static_cast<std::size_t>(sig.tangent_dim())) {
    throw DimensionError("tangent matrix width does not match the signature");
  }
  std::vector<int> widths;
  widths.reserve(sig.size());
  for (const auto& c : sig.components) widths.push_back(c.dim);
  auto blocks = t.split_cols(tangents, widths);

  std::vector<Var> out;
  out.reserve(sig.size());
  std::size_t kc = 0;
  for (std::size_t i = 0; i < sig.size(); ++i) {
    const auto kind = sig.components[i].kind;
    Var K = kind == SpaceKind::Euclidean ? blocks[i] : curvatures[kc++];
    out.push_back(ad_exp_block(t, kind, blocks[i], K));
  }
  return out;
}

Var ad_product_dist(Tape& t, const ManifoldSignature& sig, std::span<const Var> blocks,
                    std::span<const Var> curvatures) {
  sig.validate();
  if (blocks.size() != sig.size()) {
    throw DimensionError("expected one point block per factor");
  }
  if (static_cast<int>(curvatures.size()) != curvature_count(sig)) {
    throw ConfigError("expected one curvature variable per non-Euclidean factor");
  }
  std::size_t kc = 0;
  std::vector<Var> dists;
  dists.reserve(sig.size());
  for (std::size_t i = 0; i < sig.size(); ++i) {
    const auto& c = sig.components[i];
    if (t.value(blocks[i]).cols() != static_cast<std::size_t>(c.ambient_dim())) {
      throw DimensionError("factor " + std::to_string(i) + " has wrong ambient width");
    }
    Var K = c.kind == SpaceKind::Euclidean ? blocks[i] : curvatures[kc++];
    dists.push_back(ad_dist_block(t, c.kind, blocks[i], K));
  }
  if (dists.size() == 1) return dists[0];
  Var acc = t.mul(dists[0], dists[0]);
  for (std::size_t i = 1; i < dists.size(); ++i) {
    acc = t.add(acc, t.mul(dists[i], dists[i]));
  }
  return t.sqrt_(acc);
}

}  // namespace lgi::product
