#include "lgi/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lgi/errors.hpp"
#include "lgi/manifolds.hpp"
#include "lgi/product_ad.hpp"

namespace lgi::gnn {

using ad::Tape;
using ad::Tensor;
using ad::Var;

const char* backbone_name(Backbone b) {
  switch (b) {
    case Backbone::GCN: return "GCN";
    case Backbone::GAT: return "GAT";
    case Backbone::MLP: return "MLP";
  }
  throw ConfigError("unknown backbone");
}

std::string ModelConfig::name() const {
  std::string out = backbone_name(backbone);
  if (latent_graph) {
    out += "-dDGM";
    if (!transform_uses_input_graph) out += "*";
    out += "-";
    out += signature.str();
  }
  return out;
}

bool ModelConfig::needs_input_adjacency() const {
  if (latent_graph) return transform_uses_input_graph;
  return backbone != Backbone::MLP;
}

void ModelConfig::validate() const {
  if (in_dim < 1) throw ConfigError("model needs a positive input dimension");
  if (hidden_dim < 1) throw ConfigError("model needs a positive hidden width");
  if (n_classes < 2) throw ConfigError("model needs at least two classes");
  if (n_diffusion_layers < 1) throw ConfigError("model needs at least one diffusion layer");
  if (latent_graph) {
    if (k < 1) throw ConfigError("latent-graph models need k >= 1");
    signature.validate();
  }
}

ModelConfig parse_model_name(const std::string& text) {
  ModelConfig config;
  std::string rest;
  for (const Backbone b : {Backbone::GCN, Backbone::GAT, Backbone::MLP}) {
    const std::string prefix = backbone_name(b);
    if (text.rfind(prefix, 0) == 0) {
      config.backbone = b;
      rest = text.substr(prefix.size());
      break;
    }
    if (b == Backbone::MLP) {
      throw ParseError("unknown model '" + text +
                       "': expected GCN|GAT|MLP optionally followed by -dDGM[*]-<signature>");
    }
  }
  if (rest.empty()) return config;  // bare backbone = baseline without a latent graph

  if (rest.rfind("-dDGM", 0) != 0) {
    throw ParseError("unknown model suffix '" + rest + "' in '" + text + "'");
  }
  rest = rest.substr(5);
  config.latent_graph = true;
  config.transform_uses_input_graph = true;
  if (!rest.empty() && rest.front() == '*') {
    config.transform_uses_input_graph = false;
    rest = rest.substr(1);
  }
  if (rest.size() < 2 || rest.front() != '-') {
    throw ParseError("model '" + text + "' is missing its manifold signature");
  }
  config.signature = product::parse_signature(rest.substr(1));
  return config;
}

namespace {

// pre-activation whose softplus is exactly 1, i.e. log(e - 1)
constexpr double kUnitSoftplusPre = 0.5413248546129181;

Tensor glorot(int rows, int cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-limit, limit);
  Tensor t({static_cast<std::size_t>(rows), static_cast<std::size_t>(cols)});
  for (double& v : t.data()) v = u(rng);
  return t;
}

LayerParams make_layer(Backbone kind, int in, int out, std::mt19937_64& rng) {
  LayerParams layer;
  layer.weight = glorot(in, out, rng);
  if (kind == Backbone::GAT) {
    layer.attention = glorot(1, 2 * out, rng);
  } else {
    layer.bias = Tensor::zeros({1, static_cast<std::size_t>(out)});
  }
  return layer;
}

void check_adjacency(const Tensor& adjacency, std::size_t n) {
  if (adjacency.rank() != 2 || adjacency.rows() != adjacency.cols()) {
    throw DimensionError("adjacency must be square");
  }
  if (adjacency.rows() != n) throw DimensionError("adjacency size does not match node count");
}

}  // namespace

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  ModelParams params;
  if (config.latent_graph) {
    const Backbone tkind =
        config.transform_uses_input_graph ? Backbone::GCN : Backbone::MLP;
    params.dgm_transform.push_back(
        make_layer(tkind, config.in_dim, config.signature.tangent_dim(), rng));
  }
  int width = config.in_dim;
  for (int l = 0; l < config.n_diffusion_layers; ++l) {
    params.diffusion.push_back(make_layer(config.backbone, width, config.hidden_dim, rng));
    width = config.hidden_dim;
  }
  params.head = make_layer(Backbone::MLP, width, config.n_classes, rng);
  params.dgm.temperature_pre = kUnitSoftplusPre;
  params.dgm.k = config.k;
  params.dgm.signature = config.signature;
  const int n_curv = config.latent_graph ? product::curvature_count(config.signature) : 0;
  params.curvature_pre.assign(static_cast<std::size_t>(n_curv), kUnitSoftplusPre);
  return params;
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> out;
  for_each_tensor(
      [&](const Tensor& t) { out.insert(out.end(), t.data().begin(), t.data().end()); });
  out.push_back(dgm.temperature_pre);
  out.insert(out.end(), curvature_pre.begin(), curvature_pre.end());
  return out;
}

void ModelParams::unflatten(std::span<const double> values) {
  if (values.size() != n_scalars()) {
    throw DimensionError("parameter vector length " + std::to_string(values.size()) +
                         " does not match the model (" + std::to_string(n_scalars()) + ")");
  }
  std::size_t pos = 0;
  for_each_tensor([&](Tensor& t) {
    std::copy(values.begin() + static_cast<std::ptrdiff_t>(pos),
              values.begin() + static_cast<std::ptrdiff_t>(pos + t.numel()), t.data().begin());
    pos += t.numel();
  });
  dgm.temperature_pre = values[pos++];
  for (double& c : curvature_pre) c = values[pos++];
}

std::size_t ModelParams::n_scalars() const {
  std::size_t n = 1 + curvature_pre.size();
  for_each_tensor([&](const Tensor& t) { n += t.numel(); });
  return n;
}

Tensor gcn_propagation(const Tensor& adjacency) {
  check_adjacency(adjacency, adjacency.rows());
  const std::size_t n = adjacency.rows();
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 1.0;  // self-loop
    for (std::size_t j = 0; j < n; ++j) deg += adjacency(i, j);
    inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
  }
  Tensor p = Tensor::zeros({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double a = adjacency(i, j) + (i == j ? 1.0 : 0.0);
      if (a != 0.0) p(i, j) = a * inv_sqrt_deg[i] * inv_sqrt_deg[j];
    }
  }
  return p;
}

namespace {

void check_plain_layer(const Tensor& h, const LayerParams& params) {
  if (h.rank() != 2 || params.weight.rank() != 2) throw ShapeError("layers expect matrices");
  if (h.cols() != params.weight.rows()) {
    throw DimensionError("feature width " + std::to_string(h.cols()) +
                         " does not match weight rows " + std::to_string(params.weight.rows()));
  }
}

Tensor matmul_plain(const Tensor& a, const Tensor& b) {
  Tensor out = Tensor::zeros({a.rows(), b.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

}  // namespace

Tensor mlp_layer(const Tensor& features, const LayerParams& params) {
  check_plain_layer(features, params);
  Tensor out = matmul_plain(features, params.weight);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) {
      if (params.bias.numel() > 0) out(i, j) += params.bias(0, j);
      out(i, j) = std::max(out(i, j), 0.0);
    }
  }
  return out;
}

Tensor gcn_layer(const Tensor& features, const Tensor& adjacency, const LayerParams& params) {
  check_plain_layer(features, params);
  check_adjacency(adjacency, features.rows());
  const std::size_t n = features.rows();
  const std::size_t dout = params.weight.cols();
  const Tensor hw = matmul_plain(features, params.weight);
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 1.0;
    for (std::size_t j = 0; j < n; ++j) deg += adjacency(i, j);
    inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
  }
  Tensor out = Tensor::zeros({n, dout});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double a = adjacency(i, j) + (i == j ? 1.0 : 0.0);
      if (a == 0.0) continue;
      const double coef = a * inv_sqrt_deg[i] * inv_sqrt_deg[j];
      for (std::size_t c = 0; c < dout; ++c) out(i, c) += coef * hw(j, c);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < dout; ++c) {
      if (params.bias.numel() > 0) out(i, c) += params.bias(0, c);
      out(i, c) = std::max(out(i, c), 0.0);
    }
  }
  return out;
}

Tensor gat_layer(const Tensor& features, const Tensor& adjacency, const LayerParams& params) {
  check_plain_layer(features, params);
  check_adjacency(adjacency, features.rows());
  const std::size_t n = features.rows();
  const std::size_t dout = params.weight.cols();
  if (params.attention.numel() != 2 * dout) {
    throw DimensionError("attention vector must have twice the output width");
  }
  const Tensor hw = matmul_plain(features, params.weight);
  const auto leaky = [](double x) { return x > 0.0 ? x : 0.2 * x; };
  Tensor out = Tensor::zeros({n, dout});
  std::vector<std::size_t> nbr;
  std::vector<double> score;
  for (std::size_t i = 0; i < n; ++i) {
    nbr.clear();
    score.clear();
    double self_term = 0.0;
    for (std::size_t c = 0; c < dout; ++c) self_term += params.attention.data()[c] * hw(i, c);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && adjacency(i, j) == 0.0) continue;
      double msg_term = 0.0;
      for (std::size_t c = 0; c < dout; ++c) {
        msg_term += params.attention.data()[dout + c] * hw(j, c);
      }
      nbr.push_back(j);
      score.push_back(leaky(self_term + msg_term));
    }
    const double mx = *std::max_element(score.begin(), score.end());
    double z = 0.0;
    for (double& s : score) {
      s = std::exp(s - mx);
      z += s;
    }
    for (std::size_t t = 0; t < nbr.size(); ++t) {
      const double alpha = score[t] / z;
      for (std::size_t c = 0; c < dout; ++c) out(i, c) += alpha * hw(nbr[t], c);
    }
    for (std::size_t c = 0; c < dout; ++c) out(i, c) = std::max(out(i, c), 0.0);
  }
  return out;
}

Var mlp_layer_ad(Tape& tape, Var features, Var weight, Var bias, bool apply_relu) {
  Var z = tape.matmul(features, weight);
  const std::size_t n = tape.value(z).rows();
  const std::size_t m = tape.value(z).cols();
  z = tape.add(z, tape.broadcast(bias, {n, m}));
  return apply_relu ? tape.relu(z) : z;
}

Var gcn_layer_ad(Tape& tape, Var features, const Tensor& adjacency, Var weight, Var bias,
                 bool apply_relu) {
  check_adjacency(adjacency, tape.value(features).rows());
  Var hw = tape.matmul(features, weight);
  Var z = tape.matmul(tape.constant(gcn_propagation(adjacency)), hw);
  const std::size_t n = tape.value(z).rows();
  const std::size_t m = tape.value(z).cols();
  z = tape.add(z, tape.broadcast(bias, {n, m}));
  return apply_relu ? tape.relu(z) : z;
}

Var gat_layer_ad(Tape& tape, Var features, const Tensor& adjacency, Var weight, Var attention,
                 bool apply_relu) {
  const std::size_t n = tape.value(features).rows();
  check_adjacency(adjacency, n);
  const int dout = static_cast<int>(tape.value(weight).cols());
  if (tape.value(attention).numel() != static_cast<std::size_t>(2 * dout)) {
    throw DimensionError("attention vector must have twice the output width");
  }
  Tensor mask({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      mask(i, j) = (i == j || adjacency(i, j) != 0.0) ? 1.0 : 0.0;
    }
  }
  Var hw = tape.matmul(features, weight);
  const int halves[2] = {dout, dout};
  const auto parts = tape.split_cols(attention, halves);
  Var self_score = tape.matmul(hw, tape.transpose(parts[0]));  // {n,1}
  Var msg_score = tape.matmul(hw, tape.transpose(parts[1]));   // {n,1}
  Var scores = tape.add(tape.broadcast(self_score, {n, n}),
                        tape.broadcast(tape.transpose(msg_score), {n, n}));
  Var alpha = tape.masked_row_softmax(tape.leaky_relu(scores, 0.2), mask);
  Var out = tape.matmul(alpha, hw);
  return apply_relu ? tape.relu(out) : out;
}

ForwardResult ddgm_forward(Tape& tape, const Tensor& features, const Tensor* input_adjacency,
                           const ModelConfig& config, const ModelParams& params,
                           std::mt19937_64& rng, const ForwardOptions& options) {
  config.validate();
  if (features.rank() != 2 || features.rows() == 0) {
    throw ShapeError("features must be a nonempty matrix");
  }
  if (static_cast<int>(features.cols()) != config.in_dim) {
    throw DimensionError("feature width " + std::to_string(features.cols()) +
                         " does not match the model input dimension " +
                         std::to_string(config.in_dim));
  }
  const std::size_t n = features.rows();
  if (config.needs_input_adjacency() && input_adjacency == nullptr) {
    throw ConfigError("model '" + config.name() + "' requires the dataset adjacency");
  }
  if (input_adjacency != nullptr) check_adjacency(*input_adjacency, n);

  ForwardResult result;
  params.for_each_tensor(
      [&](const Tensor& t) { result.tensor_leaves.push_back(tape.leaf(t)); });
  result.temperature_leaf = tape.leaf(Tensor::scalar(params.dgm.temperature_pre));
  for (const double c : params.curvature_pre) {
    result.curvature_leaves.push_back(tape.leaf(Tensor::scalar(c)));
  }

  struct LayerVars {
    Var weight, bias, attention;
  };
  std::size_t cursor = 0;
  const auto take_layer = [&](const LayerParams& layer) {
    LayerVars v;
    v.weight = result.tensor_leaves[cursor++];
    if (layer.bias.numel() > 0) v.bias = result.tensor_leaves[cursor++];
    if (layer.attention.numel() > 0) v.attention = result.tensor_leaves[cursor++];
    return v;
  };
  const auto apply = [&](Backbone kind, Var x, const LayerVars& lv, const Tensor* adj,
                         bool relu_on) {
    switch (kind) {
      case Backbone::MLP: return mlp_layer_ad(tape, x, lv.weight, lv.bias, relu_on);
      case Backbone::GCN: return gcn_layer_ad(tape, x, *adj, lv.weight, lv.bias, relu_on);
      case Backbone::GAT: return gat_layer_ad(tape, x, *adj, lv.weight, lv.attention, relu_on);
    }
    throw ConfigError("unknown backbone");
  };

  const Tensor* diffusion_adj = input_adjacency;
  Tensor sampled_dense;

  if (config.latent_graph) {
    Var xhat = tape.constant(features);
    const Backbone tkind =
        config.transform_uses_input_graph ? Backbone::GCN : Backbone::MLP;
    for (std::size_t l = 0; l < params.dgm_transform.size(); ++l) {
      const LayerVars lv = take_layer(params.dgm_transform[l]);
      const bool last = l + 1 == params.dgm_transform.size();
      // the exp map accepts the whole tangent space, so the last transform
      // layer stays linear
      xhat = apply(tkind, xhat, lv, input_adjacency, !last);
    }

    std::vector<Var> curvatures;
    std::size_t ci = 0;
    for (const auto& comp : config.signature.components) {
      if (comp.kind == product::SpaceKind::Euclidean) continue;
      Var magnitude = tape.softplus(result.curvature_leaves[ci++]);
      curvatures.push_back(manifolds::curvature_sign(comp.kind) < 0 ? tape.neg(magnitude)
                                                                    : magnitude);
    }
    const std::vector<Var> blocks =
        product::ad_product_exp(tape, config.signature, xhat, curvatures);
    Var dist = product::ad_product_dist(tape, config.signature, blocks, curvatures);
    Var temperature = tape.softplus(result.temperature_leaf);
    Var edge_logits_ad = tape.neg(tape.mul(dist, temperature));
    result.tangent_features = tape.value(xhat);
    result.temperature = tape.value(temperature).scalar_value();
    for (const Var k_var : curvatures) {
      result.curvatures.push_back(tape.value(k_var).scalar_value());
    }

    Tensor sampler_logits = tape.value(edge_logits_ad);
    for (std::size_t i = 0; i < n; ++i) {
      sampler_logits(i, i) = -std::numeric_limits<double>::infinity();
    }

    dgm::EdgeSample sample;
    switch (options.mode) {
      case SamplerMode::Gumbel:
        sample = dgm::gumbel_topk(sampler_logits, params.dgm.k, rng);
        break;
      case SamplerMode::Deterministic:
        sample = dgm::deterministic_topk(sampler_logits, params.dgm.k);
        break;
      case SamplerMode::Fixed:
        if (options.fixed_sample == nullptr) {
          throw ConfigError("fixed sampler mode needs a sample to replay");
        }
        if (options.fixed_sample->n() != n) {
          throw SamplingError("replayed sample does not match the node count");
        }
        sample = *options.fixed_sample;
        break;
    }

    Tensor offdiag = Tensor::full({n, n}, 1.0);
    for (std::size_t i = 0; i < n; ++i) offdiag(i, i) = 0.0;
    Var log_probs = tape.masked_row_log_softmax(edge_logits_ad, offdiag);
    Tensor selection = Tensor::zeros({n, n});
    for (std::size_t i = 0; i < sample.n(); ++i) {
      for (const int j : sample.targets[i]) selection(i, static_cast<std::size_t>(j)) = 1.0;
    }
    DgmTrace trace;
    trace.sample = sample;
    trace.sampler_logits = sampler_logits;
    trace.log_probs = log_probs;
    trace.row_log_prob_sum = tape.row_sum(tape.mul(log_probs, tape.constant(selection)));
    result.traces.push_back(std::move(trace));

    sampled_dense = dgm::adjacency_from_sample(sample).to_dense();
    diffusion_adj = &sampled_dense;
  }

  Var h = tape.constant(features);
  for (const LayerParams& layer : params.diffusion) {
    const LayerVars lv = take_layer(layer);
    h = apply(config.backbone, h, lv, diffusion_adj, true);
  }
  const LayerVars hv = take_layer(params.head);
  Var logits = mlp_layer_ad(tape, h, hv.weight, hv.bias, false);
  result.class_log_probs = tape.row_log_softmax(logits);
  return result;
}

}  // namespace lgi::gnn
