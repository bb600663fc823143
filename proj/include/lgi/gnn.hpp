#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lgi/autodiff.hpp"
#include "lgi/dgm.hpp"
#include "lgi/product.hpp"

namespace lgi::gnn {

enum class Backbone { GCN, GAT, MLP };

const char* backbone_name(Backbone b);

/// Architecture description. The diffusion layers use `backbone`; when
/// `latent_graph` is set the model carries a latent-graph module whose
/// feature transform is a GCN over the input adjacency when
/// `transform_uses_input_graph` (the plain variant) and a dense layer
/// otherwise (the asterisk variant, which needs no input graph).
struct ModelConfig {
  Backbone backbone = Backbone::GCN;
  bool latent_graph = false;
  bool transform_uses_input_graph = false;
  product::ManifoldSignature signature;
  int k = 3;
  int in_dim = 0;
  int hidden_dim = 32;
  int n_classes = 0;
  int n_diffusion_layers = 2;

  /// Canonical name: "GCN", "MLP", "GAT-dDGM*-EHP", "GCN-dDGM-E", ...
  std::string name() const;
  /// True when forward passes need a dataset adjacency (plain-variant
  /// transform, or a graph-based backbone without a latent graph).
  bool needs_input_adjacency() const;
  void validate() const;
};

/// Parses `(GCN|GAT|MLP)` or `(GCN|GAT|MLP)-dDGM(*)?-<signature>` (the bare
/// backbone names are the no-latent-graph baselines). Dimensions and k keep
/// their defaults; callers fill them from the dataset. ParseError otherwise.
ModelConfig parse_model_name(const std::string& text);

/// One layer's learnables. `bias` is empty for attention layers (their
/// update has no bias term) and `attention` (shape {1, 2*out}) is empty for
/// everything else.
struct LayerParams {
  ad::Tensor weight;
  ad::Tensor bias;
  ad::Tensor attention;
};

struct ModelParams {
  std::vector<LayerParams> dgm_transform;
  std::vector<LayerParams> diffusion;
  LayerParams head;
  dgm::DgmParams dgm;
  std::vector<double> curvature_pre;  // one per non-Euclidean component

  /// Visits every non-empty parameter tensor in a fixed canonical order
  /// (transform, diffusion, head; weight, bias, attention within a layer).
  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    auto visit = [&](LayerParams& layer) {
      fn(layer.weight);
      if (layer.bias.numel() > 0) fn(layer.bias);
      if (layer.attention.numel() > 0) fn(layer.attention);
    };
    for (auto& layer : dgm_transform) visit(layer);
    for (auto& layer : diffusion) visit(layer);
    visit(head);
  }
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const {
    const_cast<ModelParams*>(this)->for_each_tensor(
        [&](ad::Tensor& t) { fn(static_cast<const ad::Tensor&>(t)); });
  }

  /// All learnable scalars: tensor entries in canonical order, then
  /// temperature_pre, then curvature_pre.
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> values);
  std::size_t n_scalars() const;
};

/// Glorot-uniform weights (zero biases), temperature and curvature
/// pre-activations set so softplus gives exactly 1. Deterministic in `seed`.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

/// How ddgm_forward picks latent edges: Gumbel-perturbed top-k (training),
/// noise-free top-k, or a caller-provided sample (gradient checking).
enum class SamplerMode { Gumbel, Deterministic, Fixed };

struct ForwardOptions {
  SamplerMode mode = SamplerMode::Gumbel;
  const dgm::EdgeSample* fixed_sample = nullptr;
};

/// Everything the graph loss needs from one latent-graph module.
struct DgmTrace {
  dgm::EdgeSample sample;
  ad::Tensor sampler_logits;   // plain values fed to the sampler (-inf diagonal)
  ad::Var log_probs;           // {n,n} row log-softmax of the logits, diagonal masked
  ad::Var row_log_prob_sum;    // {n,1} per-row sum over the sampled targets
};

struct ForwardResult {
  ad::Var class_log_probs;  // {n, n_classes}, rows log-sum-exp to 0
  std::vector<DgmTrace> traces;
  // Leaves in flatten() order so callers can read gradients back out:
  std::vector<ad::Var> tensor_leaves;
  ad::Var temperature_leaf;
  std::vector<ad::Var> curvature_leaves;
  // Realized values for logging and inspection (empty/zero for baselines):
  ad::Tensor tangent_features;
  double temperature = 0.0;
  std::vector<double> curvatures;
};

/// Full forward pass on one tape: transform features to the tangent space,
/// project through the exponential map, score pairs by geodesic distance
/// times -softplus(temperature_pre), sample k edges per node, diffuse over
/// the sampled graph, classify, log-softmax. Baselines skip straight to
/// diffusion over the input adjacency. ConfigError when a needed input
/// adjacency is missing; the rng is consumed only in Gumbel mode.
ForwardResult ddgm_forward(ad::Tape& tape, const ad::Tensor& features,
                           const ad::Tensor* input_adjacency, const ModelConfig& config,
                           const ModelParams& params, std::mt19937_64& rng,
                           const ForwardOptions& options = {});

/// Plain evaluation of single layers (used as independent oracles and for
/// inference-only paths). All apply relu.
ad::Tensor gcn_layer(const ad::Tensor& features, const ad::Tensor& adjacency,
                     const LayerParams& params);
ad::Tensor gat_layer(const ad::Tensor& features, const ad::Tensor& adjacency,
                     const LayerParams& params);
ad::Tensor mlp_layer(const ad::Tensor& features, const LayerParams& params);

/// Symmetric-normalized propagation matrix with self-loops added:
/// D^{-1/2} (A + I) D^{-1/2}, D the row-degree of A + I.
ad::Tensor gcn_propagation(const ad::Tensor& adjacency);

/// Tape builders for the same layers.
ad::Var gcn_layer_ad(ad::Tape& tape, ad::Var features, const ad::Tensor& adjacency, ad::Var weight,
                     ad::Var bias, bool apply_relu);
ad::Var gat_layer_ad(ad::Tape& tape, ad::Var features, const ad::Tensor& adjacency, ad::Var weight,
                     ad::Var attention, bool apply_relu);
ad::Var mlp_layer_ad(ad::Tape& tape, ad::Var features, ad::Var weight, ad::Var bias,
                     bool apply_relu);

}  // namespace lgi::gnn
