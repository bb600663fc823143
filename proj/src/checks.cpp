#include "lgi/checks.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "lgi/dgm.hpp"
#include "lgi/errors.hpp"
#include "lgi/product.hpp"

namespace lgi::checks {

using manifolds::ComponentSpec;
using manifolds::SpaceKind;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kDim = 3;  // tangent dimension of the metric and exp suites

void validate_options(const CheckOptions& options) {
  if (options.samples < 1) throw ConfigError("sample count must be positive");
  if (!options.curvature) return;
  const double k = *options.curvature;
  if (options.space) {
    const int sign = manifolds::curvature_sign(*options.space);
    if (sign == 0 && k != 0.0) {
      throw CurvatureSignError("the Euclidean space runs at curvature 0 only");
    }
    if (sign != 0 && sign * k <= 0.0) {
      throw CurvatureSignError("curvature sign does not match the requested space");
    }
  } else if (k == 0.0) {
    throw ConfigError("curvature 0 needs an explicit Euclidean space filter");
  }
}

std::vector<SpaceKind> active_spaces(const CheckOptions& options) {
  if (options.space) return {*options.space};
  return {SpaceKind::PoincareBall, SpaceKind::StereoSphere, SpaceKind::Hyperboloid,
          SpaceKind::Hypersphere};
}

std::vector<double> magnitudes_for(const CheckOptions& options, SpaceKind kind) {
  if (kind == SpaceKind::Euclidean) return {0.0};
  if (options.curvature) return {std::abs(*options.curvature)};
  return {0.25, 1.0, 4.0};
}

double signed_curvature(SpaceKind kind, double magnitude) {
  return manifolds::curvature_sign(kind) * magnitude;
}

std::string config_label(SpaceKind kind, double curvature) {
  std::ostringstream os;
  os << manifolds::kind_to_char(kind) << " at K=" << curvature;
  return os.str();
}

std::vector<double> random_tangent(std::mt19937_64& rng, int dim, double cap) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(dim));
  double norm2 = 0.0;
  for (double& x : v) {
    x = gauss(rng);
    norm2 += x * x;
  }
  const double norm = std::sqrt(norm2);
  const double radius = cap * unif(rng);
  if (norm > 0.0) {
    for (double& x : v) x *= radius / norm;
  }
  return v;
}

std::vector<double> random_point(std::mt19937_64& rng, SpaceKind kind, double curvature) {
  const double mag = std::abs(curvature);
  const double cap = kind == SpaceKind::Euclidean ? 2.0 : 2.0 / std::sqrt(mag);
  return manifolds::exp_map(kind, random_tangent(rng, kDim, cap), curvature);
}

double measured_dist(const CheckOptions& options, const ComponentSpec& spec,
                     std::span<const double> x, std::span<const double> y) {
  const double d = manifolds::component_dist(spec, x, y);
  return options.distance_tamper ? options.distance_tamper(d) : d;
}

std::string pass_summary(const CheckOptions& options, std::size_t configs, const char* unit) {
  std::ostringstream os;
  os << configs << " configurations x " << options.samples << " " << unit << " (seed "
     << options.seed << ")";
  return os.str();
}

/// Runs `body(spec, rng, sample_index)` over every (space, curvature, sample)
/// in scope; the body returns a failure message or the empty string.
template <typename Body>
SuiteResult metric_sweep(const CheckOptions& options, const char* name, const char* unit,
                         Body&& body) {
  validate_options(options);
  SuiteResult result{name, true, ""};
  std::size_t configs = 0;
  for (const SpaceKind kind : active_spaces(options)) {
    for (const double mag : magnitudes_for(options, kind)) {
      ++configs;
      const double curvature = signed_curvature(kind, mag);
      ComponentSpec spec{kind, kDim, curvature};
      std::mt19937_64 rng(options.seed);
      for (int s = 0; s < options.samples; ++s) {
        const std::string failure = body(spec, rng, s);
        if (!failure.empty()) {
          std::ostringstream os;
          os << config_label(kind, curvature) << ": " << failure << " (seed " << options.seed
             << ", sample " << s << ")";
          return SuiteResult{name, false, os.str()};
        }
      }
    }
  }
  result.detail = pass_summary(options, configs, unit);
  return result;
}

std::vector<double> log_softmax_finite(std::span<const double> row) {
  double mx = -kInf;
  for (const double v : row) {
    if (std::isfinite(v)) mx = std::max(mx, v);
  }
  double lse = 0.0;
  for (const double v : row) {
    if (std::isfinite(v)) lse += std::exp(v - mx);
  }
  const double log_z = mx + std::log(lse);
  std::vector<double> out(row.size(), -kInf);
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (std::isfinite(row[j])) out[j] = row[j] - log_z;
  }
  return out;
}

ad::Tensor random_square_logits(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> gauss(0.0, 1.5);
  ad::Tensor logits = ad::Tensor::zeros({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      logits(i, j) = i == j ? -kInf : gauss(rng);
    }
  }
  return logits;
}

}  // namespace

SuiteResult check_distance_symmetry(const CheckOptions& options) {
  return metric_sweep(options, "distance-symmetry", "pairs",
                      [&](const ComponentSpec& spec, std::mt19937_64& rng, int) {
                        const auto x = random_point(rng, spec.kind, spec.curvature);
                        const auto y = random_point(rng, spec.kind, spec.curvature);
                        const double dxy = measured_dist(options, spec, x, y);
                        const double dyx = measured_dist(options, spec, y, x);
                        if (dxy != dyx) {
                          std::ostringstream os;
                          os << "d(x,y)=" << dxy << " differs from d(y,x)=" << dyx;
                          return os.str();
                        }
                        return std::string();
                      });
}

SuiteResult check_distance_identity(const CheckOptions& options) {
  return metric_sweep(options, "distance-identity", "points",
                      [&](const ComponentSpec& spec, std::mt19937_64& rng, int) {
                        const auto x = random_point(rng, spec.kind, spec.curvature);
                        const double d = measured_dist(options, spec, x, x);
                        if (!(d <= 1e-10)) {
                          std::ostringstream os;
                          os << "d(x,x)=" << d << " exceeds 1e-10";
                          return os.str();
                        }
                        return std::string();
                      });
}

SuiteResult check_distance_nonnegativity(const CheckOptions& options) {
  return metric_sweep(options, "distance-nonnegativity", "pairs",
                      [&](const ComponentSpec& spec, std::mt19937_64& rng, int) {
                        const auto x = random_point(rng, spec.kind, spec.curvature);
                        const auto y = random_point(rng, spec.kind, spec.curvature);
                        const double d = measured_dist(options, spec, x, y);
                        if (!(d >= 0.0) || !std::isfinite(d)) {
                          std::ostringstream os;
                          os << "d(x,y)=" << d << " is not a finite non-negative value";
                          return os.str();
                        }
                        return std::string();
                      });
}

SuiteResult check_triangle_inequality(const CheckOptions& options) {
  return metric_sweep(options, "triangle-inequality", "triples",
                      [&](const ComponentSpec& spec, std::mt19937_64& rng, int) {
                        const auto x = random_point(rng, spec.kind, spec.curvature);
                        const auto y = random_point(rng, spec.kind, spec.curvature);
                        const auto z = random_point(rng, spec.kind, spec.curvature);
                        const double dxz = measured_dist(options, spec, x, z);
                        const double dxy = measured_dist(options, spec, x, y);
                        const double dyz = measured_dist(options, spec, y, z);
                        if (dxz > dxy + dyz + 1e-9) {
                          std::ostringstream os;
                          os << "d(x,z) - d(x,y) - d(y,z) = " << dxz - dxy - dyz
                             << " exceeds slack 1e-9";
                          return os.str();
                        }
                        return std::string();
                      });
}

SuiteResult check_zero_curvature_limit(const CheckOptions& options) {
  validate_options(options);
  const char* name = "zero-curvature-limit";
  std::vector<SpaceKind> spaces;
  for (const SpaceKind kind : active_spaces(options)) {
    if (kind == SpaceKind::PoincareBall || kind == SpaceKind::StereoSphere) {
      spaces.push_back(kind);
    }
  }
  if (spaces.empty()) {
    return SuiteResult{name, true, "no projected space in scope"};
  }
  const std::vector<double> mags =
      options.curvature ? std::vector<double>{std::abs(*options.curvature)}
                        : std::vector<double>{1e-2, 1e-4, 1e-6};

  for (const SpaceKind kind : spaces) {
    // one fixed point set per space so deviations are comparable across K
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> unif(-0.5, 0.5);
    std::vector<std::array<double, 4>> pairs(static_cast<std::size_t>(options.samples));
    for (auto& p : pairs) {
      for (double& c : p) c = unif(rng);
    }

    std::vector<double> max_dev;
    for (const double mag : mags) {
      const double curvature = signed_curvature(kind, mag);
      ComponentSpec spec{kind, 2, curvature};
      double worst = 0.0;
      for (std::size_t s = 0; s < pairs.size(); ++s) {
        const auto& p = pairs[s];
        const std::array<double, 2> x{p[0], p[1]};
        const std::array<double, 2> y{p[2], p[3]};
        const double flat =
            2.0 * std::hypot(x[0] - y[0], x[1] - y[1]);
        if (flat == 0.0) continue;
        const double d = measured_dist(options, spec, x, y);
        const double dev = std::abs(d - flat) / flat;
        worst = std::max(worst, dev);
        if (dev > 10.0 * mag) {
          std::ostringstream os;
          os << config_label(kind, curvature) << ": relative deviation " << dev
             << " from 2|x-y| exceeds " << 10.0 * mag << " (seed " << options.seed << ", sample "
             << s << ")";
          return SuiteResult{name, false, os.str()};
        }
      }
      max_dev.push_back(worst);
    }
    for (std::size_t i = 1; i < max_dev.size(); ++i) {
      if (!(max_dev[i] < max_dev[i - 1])) {
        std::ostringstream os;
        os << manifolds::kind_to_char(kind) << ": deviation " << max_dev[i] << " at |K|="
           << mags[i] << " does not fall below " << max_dev[i - 1] << " at |K|=" << mags[i - 1]
           << " (seed " << options.seed << ")";
        return SuiteResult{name, false, os.str()};
      }
    }
  }
  std::ostringstream os;
  os << spaces.size() << " spaces x " << mags.size() << " curvatures x " << options.samples
     << " pairs in [-0.5,0.5]^2 (seed " << options.seed << ")";
  return SuiteResult{name, true, os.str()};
}

SuiteResult check_exp_containment(const CheckOptions& options) {
  return metric_sweep(
      options, "exp-map-containment", "tangent vectors",
      [&](const ComponentSpec& spec, std::mt19937_64& rng, int) {
        const double mag = std::abs(spec.curvature);
        const double cap = spec.kind == SpaceKind::Euclidean ? 2.5 : 2.5 / std::sqrt(mag);
        const auto v = random_tangent(rng, spec.dim, cap);
        const auto p = manifolds::exp_map(spec.kind, v, spec.curvature);
        if (!manifolds::check_membership(p, spec.kind, spec.curvature, 1e-8)) {
          return std::string("exp image fails membership at 1e-8");
        }
        if (spec.kind == SpaceKind::PoincareBall) {
          double norm2 = 0.0;
          for (const double c : p) norm2 += c * c;
          if (!(norm2 < -1.0 / spec.curvature)) {
            std::ostringstream os;
            os << "|exp(v)|^2=" << norm2 << " not strictly inside the ball of radius^2 "
               << -1.0 / spec.curvature;
            return os.str();
          }
        }
        return std::string();
      });
}

SuiteResult check_product_oracle(const CheckOptions& options) {
  validate_options(options);
  const char* name = "product-distance-oracle";
  constexpr SpaceKind kKinds[] = {SpaceKind::Euclidean, SpaceKind::Hyperboloid,
                                  SpaceKind::Hypersphere, SpaceKind::PoincareBall,
                                  SpaceKind::StereoSphere};
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<int> len_dist(1, 4);
  std::uniform_int_distribution<int> kind_dist(0, 4);
  std::uniform_int_distribution<int> dim_dist(1, 3);
  std::uniform_real_distribution<double> mag_dist(0.25, 4.0);

  for (int s = 0; s < options.samples; ++s) {
    product::ManifoldSignature sig;
    const int len = len_dist(rng);
    for (int c = 0; c < len; ++c) {
      const SpaceKind kind = kKinds[kind_dist(rng)];
      const int dim = dim_dist(rng);
      const double curvature =
          kind == SpaceKind::Euclidean ? 0.0 : signed_curvature(kind, mag_dist(rng));
      sig.components.push_back(ComponentSpec{kind, dim, curvature});
    }

    std::vector<double> va, vb;
    for (const auto& comp : sig.components) {
      const double mag = std::max(std::abs(comp.curvature), 0.25);
      const double cap = 1.2 / std::sqrt(mag);
      for (const double c : random_tangent(rng, comp.dim, cap)) va.push_back(c);
      for (const double c : random_tangent(rng, comp.dim, cap)) vb.push_back(c);
    }
    const product::ProductPoint a = product::product_exp(sig, va);
    const product::ProductPoint b = product::product_exp(sig, vb);

    double sum_sq = 0.0;
    for (std::size_t c = 0; c < sig.components.size(); ++c) {
      const double d = manifolds::component_dist(sig.components[c], a.parts[c], b.parts[c]);
      sum_sq += d * d;
    }
    const double oracle = sig.components.size() == 1
                              ? manifolds::component_dist(sig.components[0], a.parts[0], b.parts[0])
                              : std::sqrt(sum_sq);
    const double got = product::product_dist(sig, a, b);
    if (std::abs(got - oracle) > 1e-12 * std::max(1.0, std::abs(oracle))) {
      std::ostringstream os;
      os << "signature " << sig.str() << ": product distance " << got
         << " differs from per-component reassembly " << oracle << " (seed " << options.seed
         << ", sample " << s << ")";
      return SuiteResult{name, false, os.str()};
    }
  }
  std::ostringstream os;
  os << options.samples << " random signatures over all five spaces, tolerance 1e-12 (seed "
     << options.seed << ")";
  return SuiteResult{name, true, os.str()};
}

SuiteResult check_gumbel_frequency(const CheckOptions& options) {
  validate_options(options);
  const char* name = "gumbel-frequency";
  // fixed five-candidate instance: row 0 of a six-node logit matrix
  const std::vector<double> row_logits = {0.5, -1.0, 0.25, 1.5, -0.5};
  const std::size_t n = row_logits.size() + 1;
  ad::Tensor logits = ad::Tensor::zeros({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) logits(i, j) = i == j ? -kInf : 0.0;
  }
  for (std::size_t j = 1; j < n; ++j) logits(0, j) = row_logits[j - 1];

  const std::vector<double> lp = log_softmax_finite(
      std::span<const double>(logits.data().subspan(0, n)));

  constexpr int kDraws = 200000;
  std::mt19937_64 rng(options.seed);
  std::vector<int> counts(row_logits.size(), 0);
  for (int d = 0; d < kDraws; ++d) {
    const dgm::EdgeSample sample = dgm::gumbel_topk(logits, 1, rng);
    const int target = sample.targets[0][0];
    ++counts[static_cast<std::size_t>(target - 1)];
    if (d == 0 &&
        std::abs(sample.log_probs[0][0] - lp[static_cast<std::size_t>(target)]) > 1e-12) {
      return SuiteResult{name, false,
                         "reported log-probability disagrees with the softmax of the logits"};
    }
  }
  for (std::size_t j = 0; j < counts.size(); ++j) {
    const double p = std::exp(lp[j + 1]);
    const double expected = kDraws * p;
    const double sigma = std::sqrt(kDraws * p * (1.0 - p));
    const double dev = std::abs(counts[j] - expected);
    if (dev > 3.0 * sigma) {
      std::ostringstream os;
      os << "logit " << row_logits[j] << ": count " << counts[j] << " deviates from expected "
         << expected << " by " << dev / sigma << " sigma (seed " << options.seed << ")";
      return SuiteResult{name, false, os.str()};
    }
  }
  std::ostringstream os;
  os << kDraws << " draws over 5 fixed logits, every count within 3 sigma (seed " << options.seed
     << ")";
  return SuiteResult{name, true, os.str()};
}

SuiteResult check_sample_hygiene(const CheckOptions& options) {
  validate_options(options);
  const char* name = "sample-hygiene";
  constexpr std::size_t n = 12;
  constexpr int k = 3;
  std::mt19937_64 rng(options.seed);
  const int draws = std::max(50, options.samples / 5);

  for (int d = 0; d < draws; ++d) {
    const ad::Tensor logits = random_square_logits(rng, n);
    const dgm::EdgeSample sample = dgm::gumbel_topk(logits, k, rng);
    if (sample.n() != n || sample.k != k) {
      return SuiteResult{name, false, "sample shape does not match the logit matrix"};
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto& row = sample.targets[i];
      const std::vector<double> lp =
          log_softmax_finite(logits.data().subspan(i * n, n));
      if (row.size() != static_cast<std::size_t>(k)) {
        return SuiteResult{name, false, "row does not carry exactly k targets"};
      }
      for (std::size_t t = 0; t < row.size(); ++t) {
        const int j = row[t];
        std::ostringstream os;
        if (j < 0 || static_cast<std::size_t>(j) >= n) {
          os << "target " << j << " out of range (seed " << options.seed << ", draw " << d << ")";
          return SuiteResult{name, false, os.str()};
        }
        if (static_cast<std::size_t>(j) == i) {
          os << "row " << i << " selected itself (seed " << options.seed << ", draw " << d << ")";
          return SuiteResult{name, false, os.str()};
        }
        if (t > 0 && row[t - 1] >= j) {
          os << "row " << i << " targets not strictly ascending (seed " << options.seed
             << ", draw " << d << ")";
          return SuiteResult{name, false, os.str()};
        }
        if (std::abs(sample.log_probs[i][t] - lp[static_cast<std::size_t>(j)]) > 1e-12) {
          os << "row " << i << " log-probability differs from the row softmax (seed "
             << options.seed << ", draw " << d << ")";
          return SuiteResult{name, false, os.str()};
        }
      }
    }
    const ad::Tensor dense = dgm::adjacency_from_sample(sample).to_dense();
    for (std::size_t i = 0; i < n; ++i) {
      double row_sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) row_sum += dense(i, j);
      if (dense(i, i) != 0.0 || row_sum != static_cast<double>(k)) {
        return SuiteResult{name, false, "dense adjacency does not carry k off-diagonal ones"};
      }
    }
  }
  std::ostringstream os;
  os << draws << " draws over 12-node logit matrices, k=3 (seed " << options.seed << ")";
  return SuiteResult{name, true, os.str()};
}

SuiteResult check_logit_shift_invariance(const CheckOptions& options) {
  validate_options(options);
  const char* name = "logit-shift-invariance";
  constexpr std::size_t n = 8;
  constexpr int k = 2;
  std::mt19937_64 make_rng(options.seed);
  const int draws = std::max(50, options.samples / 10);

  for (int d = 0; d < draws; ++d) {
    const ad::Tensor logits = random_square_logits(make_rng, n);
    ad::Tensor shifted = logits;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = 0.37 * static_cast<double>(i) - 1.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (std::isfinite(shifted(i, j))) shifted(i, j) += c;
      }
    }
    // identical engines so the perturbations match draw for draw
    std::mt19937_64 rng_a(options.seed + static_cast<std::uint64_t>(d) + 1);
    std::mt19937_64 rng_b(options.seed + static_cast<std::uint64_t>(d) + 1);
    const dgm::EdgeSample a = dgm::gumbel_topk(logits, k, rng_a);
    const dgm::EdgeSample b = dgm::gumbel_topk(shifted, k, rng_b);
    for (std::size_t i = 0; i < n; ++i) {
      if (a.targets[i] != b.targets[i]) {
        std::ostringstream os;
        os << "row " << i << " selection changed under a constant shift (seed " << options.seed
           << ", draw " << d << ")";
        return SuiteResult{name, false, os.str()};
      }
      for (std::size_t t = 0; t < a.log_probs[i].size(); ++t) {
        if (std::abs(a.log_probs[i][t] - b.log_probs[i][t]) > 1e-9) {
          std::ostringstream os;
          os << "row " << i << " log-probability moved by more than 1e-9 under a constant shift"
             << " (seed " << options.seed << ", draw " << d << ")";
          return SuiteResult{name, false, os.str()};
        }
      }
    }
  }
  std::ostringstream os;
  os << draws << " paired draws over 8-node logit matrices (seed " << options.seed << ")";
  return SuiteResult{name, true, os.str()};
}

std::vector<SuiteResult> run_all(const CheckOptions& options) {
  validate_options(options);
  std::vector<SuiteResult> out;
  out.push_back(check_distance_symmetry(options));
  out.push_back(check_distance_identity(options));
  out.push_back(check_distance_nonnegativity(options));
  out.push_back(check_triangle_inequality(options));
  const bool projected_in_scope = !options.space ||
                                  *options.space == SpaceKind::PoincareBall ||
                                  *options.space == SpaceKind::StereoSphere;
  if (projected_in_scope) out.push_back(check_zero_curvature_limit(options));
  out.push_back(check_exp_containment(options));
  if (!options.space) {
    out.push_back(check_product_oracle(options));
    out.push_back(check_gumbel_frequency(options));
    out.push_back(check_sample_hygiene(options));
    out.push_back(check_logit_shift_invariance(options));
  }
  return out;
}

}  // namespace lgi::checks
