#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lgi/manifolds.hpp"

namespace lgi::checks {

/// Outcome of one self-check suite. `detail` summarizes the run on success
/// and names the first violated property (with the reproducing seed and
/// sample index) on failure.
struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Knobs shared by all suites. `space` restricts the space-parametric suites
/// to one model space (and drops the space-independent ones); `curvature`
/// pins a single curvature instead of the default magnitude sweep
/// {0.25, 1, 4}; its sign must match the space when both are given.
/// `distance_tamper` post-processes every geodesic distance the metric
/// suites compute — a fault-injection hook for testing the harness itself.
struct CheckOptions {
  std::optional<manifolds::SpaceKind> space;
  std::optional<double> curvature;
  int samples = 1000;
  std::uint64_t seed = 7;
  std::function<double(double)> distance_tamper;
};

SuiteResult check_distance_symmetry(const CheckOptions& options);
SuiteResult check_distance_identity(const CheckOptions& options);
SuiteResult check_distance_nonnegativity(const CheckOptions& options);
SuiteResult check_triangle_inequality(const CheckOptions& options);
/// Projected-space distances approach 2|x-y| as |K| -> 0: relative deviation
/// <= 10|K| at |K| in {1e-2, 1e-4, 1e-6} and monotone in |K|.
SuiteResult check_zero_curvature_limit(const CheckOptions& options);
/// Exponential-map images satisfy membership at 1e-8 (ball images strictly
/// inside the boundary).
SuiteResult check_exp_containment(const CheckOptions& options);
/// Product distance equals the sqrt-sum-of-squares of per-component
/// distances, recomputed from scalar parts, to 1e-12 on random signatures.
SuiteResult check_product_oracle(const CheckOptions& options);
/// k=1 sampling frequencies over 200,000 draws match the softmax of a fixed
/// five-logit row within 3 sigma per target.
SuiteResult check_gumbel_frequency(const CheckOptions& options);
/// Sampled edge lists are sorted, duplicate-free, off-diagonal, exactly k
/// long, and carry the row log-softmax at the chosen targets.
SuiteResult check_sample_hygiene(const CheckOptions& options);
/// Adding a per-row constant to the logits changes neither the selection nor
/// the reported log-probabilities (softmax shift invariance).
SuiteResult check_logit_shift_invariance(const CheckOptions& options);

/// Every suite honoring the filters: with `space` set, only the
/// space-parametric suites for that space; otherwise all suites.
std::vector<SuiteResult> run_all(const CheckOptions& options);

}  // namespace lgi::checks
