#pragma once

#include <random>
#include <span>
#include <vector>

#include "lgi/autodiff.hpp"
#include "lgi/product.hpp"

namespace lgi::dgm {

using ad::Tensor;

/// Learnable knobs of one latent-graph module: the pre-softplus temperature
/// (T = softplus(temperature_pre) is always positive), the number of edges
/// sampled per node, and the product manifold the nodes are embedded in.
struct DgmParams {
  double temperature_pre = 0.0;
  int k = 1;
  product::ManifoldSignature signature;
};

/// Latent edges drawn for one layer: per row, k target indices (ascending)
/// and the log of the unperturbed edge probabilities at those targets (the
/// row log-softmax of the logits, diagonal excluded).
struct EdgeSample {
  int k = 0;
  std::vector<std::vector<int>> targets;
  std::vector<std::vector<double>> log_probs;

  std::size_t n() const { return targets.size(); }
};

/// Directed graph as sorted per-row target lists.
struct Adjacency {
  std::vector<std::vector<int>> targets;

  std::size_t n() const { return targets.size(); }
  /// {n,n} matrix of 0/1 entries.
  Tensor to_dense() const;
};

Adjacency adjacency_from_sample(const EdgeSample& sample);

/// Edge logits -T * d(i, j) on the product manifold, with -inf on the
/// diagonal so a node can never select itself. T must be positive.
Tensor edge_logits(const product::ManifoldSignature& sig,
                   const std::vector<product::ProductPoint>& points, double temperature);

/// Gumbel top-k: perturbs each finite logit with g = -log(-log u) and keeps
/// the k largest per row (ties broken toward the lower index). Exactly one
/// uniform draw is consumed per matrix entry — finite or not — so the stream
/// stays aligned across inputs. Draws use a fixed 53-bit mapping from the
/// engine, not a distribution object, for cross-version determinism.
/// Rows with fewer than k finite logits raise SamplingError.
EdgeSample gumbel_topk(const Tensor& logits, int k, std::mt19937_64& rng);

/// Noise-free variant: the k largest logits per row.
EdgeSample deterministic_topk(const Tensor& logits, int k);

/// REINFORCE-style graph reward: sum over layers and rows of
/// (baseline_i - correct_i) * (sum of the row's sampled log-probs).
/// `correct` holds 0/1 prediction outcomes.
double graph_reward_loss(std::span<const EdgeSample> samples, std::span<const double> baseline,
                         std::span<const int> correct);

}  // namespace lgi::dgm
