#include "lgi/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "lgi/errors.hpp"
#include "lgi/manifolds.hpp"

namespace lgi::train {

using ad::Tensor;
using ad::Var;

namespace {

// stream decorrelators: init uses the run seed itself, splits and the edge
// sampler get independently salted engines
constexpr std::uint64_t kSplitStream = 0xd1b54a32d192ed03ull;
constexpr std::uint64_t kSamplerStream = 0x94d049bb133111ebull;

constexpr double kBaselineDecay = 0.9;

int argmax_row(const Tensor& lp, std::size_t i) {
  int best = 0;
  for (std::size_t j = 1; j < lp.cols(); ++j) {
    if (lp(i, j) > lp(i, static_cast<std::size_t>(best))) best = static_cast<int>(j);
  }
  return best;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam epsilon must be positive");
  if (n_runs < 1) throw ConfigError("need at least one run");
  if (!(train_frac > 0.0) || !(val_frac > 0.0) || !(test_frac > 0.0)) {
    throw ConfigError("training needs positive train/val/test fractions");
  }
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  if (!(graph_loss_weight >= 0.0)) throw ConfigError("graph loss weight must be non-negative");
}

double total_loss(const Tensor& class_log_probs, std::span<const int> labels,
                  std::span<const dgm::EdgeSample> samples, std::span<const double> baseline,
                  double graph_loss_weight) {
  if (class_log_probs.rank() != 2) throw ShapeError("class log-probs must be a matrix");
  const std::size_t n = class_log_probs.rows();
  const auto n_classes = static_cast<int>(class_log_probs.cols());
  if (labels.size() != n) throw DimensionError("one label per row required");

  double nll = 0.0;
  std::vector<int> correct(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = labels[i];
    if (label < 0 || label >= n_classes) {
      throw DataError("label " + std::to_string(label) + " outside [0, " +
                      std::to_string(n_classes) + ")");
    }
    nll -= class_log_probs(i, static_cast<std::size_t>(label));
    correct[i] = argmax_row(class_log_probs, i) == label ? 1 : 0;
  }
  nll /= static_cast<double>(n);
  if (samples.empty() || graph_loss_weight == 0.0) return nll;
  return nll + graph_loss_weight * dgm::graph_reward_loss(samples, baseline, correct);
}

double accuracy(const Tensor& class_log_probs, std::span<const int> labels,
                std::span<const int> nodes) {
  if (nodes.empty()) return 0.0;
  std::size_t hits = 0;
  for (const int i : nodes) {
    const auto row = static_cast<std::size_t>(i);
    if (argmax_row(class_log_probs, row) == labels[row]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(nodes.size());
}

namespace {

std::pair<gnn::ModelParams, RunMetrics> train_with_seed(const TrainConfig& config,
                                                        const data::Dataset& dataset,
                                                        std::uint64_t run_seed) {
  gnn::ModelConfig model = config.model;
  model.in_dim = dataset.feature_dim();
  model.n_classes = dataset.n_classes;
  model.validate();

  const data::Splits splits =
      data::make_splits(dataset.labels, dataset.n_classes, config.train_frac, config.val_frac,
                        config.test_frac, run_seed ^ kSplitStream);

  gnn::ModelParams params = gnn::init_params(model, run_seed);
  std::mt19937_64 sampler_rng(run_seed ^ kSamplerStream);

  Tensor dense_adj;
  const Tensor* adj_ptr = nullptr;
  if (model.needs_input_adjacency()) {
    dense_adj = dataset.dense_adjacency();
    adj_ptr = &dense_adj;
  }

  const std::size_t n = static_cast<std::size_t>(dataset.n);
  const auto n_classes = static_cast<std::size_t>(dataset.n_classes);
  std::vector<double> baseline(n, 1.0 / static_cast<double>(dataset.n_classes));

  RunMetrics metrics;
  std::vector<double> best_flat = params.flatten();
  double best_val = -1.0;

  const std::size_t n_params = params.n_scalars();
  std::vector<double> adam_m(n_params, 0.0);
  std::vector<double> adam_v(n_params, 0.0);
  std::vector<double> theta, grad;
  grad.reserve(n_params);

  for (int epoch = 0; epoch <= config.epochs; ++epoch) {
    ad::Tape tape;
    gnn::ForwardResult out;
    Var loss;
    std::vector<int> correct(n);
    try {
      out = gnn::ddgm_forward(tape, dataset.features, adj_ptr, model, params, sampler_rng);

      const Tensor& lp = tape.value(out.class_log_probs);
      for (std::size_t i = 0; i < n; ++i) {
        correct[i] = argmax_row(lp, i) == dataset.labels[i] ? 1 : 0;
      }

      // mean train-node NLL ...
      Tensor pick = Tensor::zeros({n, n_classes});
      const double inv_train = 1.0 / static_cast<double>(splits.train.size());
      for (const int i : splits.train) {
        pick(static_cast<std::size_t>(i), static_cast<std::size_t>(dataset.labels[i])) =
            inv_train;
      }
      loss = tape.neg(tape.sum(tape.mul(out.class_log_probs, tape.constant(pick))));
      // ... plus the advantage-weighted log-probs of the sampled edges
      if (!out.traces.empty() && config.graph_loss_weight != 0.0) {
        Tensor advantage = Tensor::zeros({n, 1});
        for (const int i : splits.train) {
          advantage(static_cast<std::size_t>(i), 0) = baseline[i] - correct[i];
        }
        const Var adv = tape.constant(advantage);
        Var reward;
        for (const gnn::DgmTrace& trace : out.traces) {
          const Var term = tape.sum(tape.mul(adv, trace.row_log_prob_sum));
          reward = reward.id < 0 ? term : tape.add(reward, term);
        }
        loss = tape.add(loss, tape.affine(reward, config.graph_loss_weight, 0.0));
      }
    } catch (const EvaluationError& e) {
      // the tape rejects non-finite values as they are recorded
      throw TrainingError("training diverged at epoch " + std::to_string(epoch) + ": " +
                          e.what());
    }

    const double loss_value = tape.value(loss).scalar_value();
    if (!std::isfinite(loss_value)) {
      throw TrainingError("training diverged at epoch " + std::to_string(epoch));
    }

    // accuracies are reported under the noise-free top-k graph (the latent
    // mode), not the training sample; baselines have nothing stochastic to
    // strip, so their training forward doubles as the evaluation
    Tensor eval_lp = tape.value(out.class_log_probs);
    if (model.latent_graph) {
      try {
        ad::Tape eval_tape;
        gnn::ForwardOptions eval_options;
        eval_options.mode = gnn::SamplerMode::Deterministic;
        const gnn::ForwardResult eval_out = gnn::ddgm_forward(
            eval_tape, dataset.features, adj_ptr, model, params, sampler_rng, eval_options);
        eval_lp = eval_tape.value(eval_out.class_log_probs);
      } catch (const EvaluationError& e) {
        throw TrainingError("training diverged at epoch " + std::to_string(epoch) + ": " +
                            e.what());
      }
    }

    metrics.train_loss.push_back(loss_value);
    metrics.train_accuracy.push_back(accuracy(eval_lp, dataset.labels, splits.train));
    metrics.val_accuracy.push_back(accuracy(eval_lp, dataset.labels, splits.val));
    metrics.test_accuracy.push_back(accuracy(eval_lp, dataset.labels, splits.test));
    if (model.latent_graph) {
      if (!(out.temperature > 0.0)) {
        throw TrainingError("temperature left the positive range at epoch " +
                            std::to_string(epoch));
      }
      std::size_t ci = 0;
      for (const auto& comp : model.signature.components) {
        if (comp.kind == product::SpaceKind::Euclidean) continue;
        const double k_val = out.curvatures[ci++];
        if (manifolds::curvature_sign(comp.kind) * k_val <= 0.0) {
          throw TrainingError("curvature sign flipped at epoch " + std::to_string(epoch));
        }
      }
      metrics.temperature.push_back(out.temperature);
      metrics.curvatures.push_back(out.curvatures);
    }

    if (metrics.val_accuracy.back() > best_val) {
      best_val = metrics.val_accuracy.back();
      metrics.best_epoch = epoch;
      best_flat = params.flatten();
    }
    if (epoch == config.epochs) break;

    tape.backward(loss);
    grad.clear();
    for (const Var leaf : out.tensor_leaves) {
      const Tensor& g = tape.grad(leaf);
      grad.insert(grad.end(), g.data().begin(), g.data().end());
    }
    grad.push_back(tape.grad(out.temperature_leaf).scalar_value());
    for (const Var leaf : out.curvature_leaves) {
      grad.push_back(tape.grad(leaf).scalar_value());
    }

    theta = params.flatten();
    const double t = static_cast<double>(epoch + 1);
    const double bias1 = 1.0 - std::pow(config.adam_beta1, t);
    const double bias2 = 1.0 - std::pow(config.adam_beta2, t);
    for (std::size_t i = 0; i < n_params; ++i) {
      adam_m[i] = config.adam_beta1 * adam_m[i] + (1.0 - config.adam_beta1) * grad[i];
      adam_v[i] = config.adam_beta2 * adam_v[i] + (1.0 - config.adam_beta2) * grad[i] * grad[i];
      const double m_hat = adam_m[i] / bias1;
      const double v_hat = adam_v[i] / bias2;
      theta[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_eps);
    }
    params.unflatten(theta);

    for (const int i : splits.train) {
      baseline[i] = kBaselineDecay * baseline[i] + (1.0 - kBaselineDecay) * correct[i];
    }
  }

  params.unflatten(best_flat);
  metrics.final_test_acc = metrics.test_accuracy[static_cast<std::size_t>(metrics.best_epoch)];
  return {std::move(params), std::move(metrics)};
}

}  // namespace

std::pair<gnn::ModelParams, RunMetrics> train(const TrainConfig& config,
                                              const data::Dataset& dataset) {
  config.validate();
  return train_with_seed(config, dataset, config.seed);
}

RepeatResult repeat_runs(const TrainConfig& config, const data::Dataset& dataset) {
  config.validate();
  RepeatResult out;
  for (int r = 0; r < config.n_runs; ++r) {
    try {
      auto [run_params, run_metrics] = train_with_seed(config, dataset, config.seed + r);
      out.per_run_acc.push_back(run_metrics.final_test_acc);
      out.last_params = std::move(run_params);
      out.last_metrics = std::move(run_metrics);
    } catch (const TrainingError& e) {
      throw TrainingError("run " + std::to_string(r) + ": " + e.what());
    }
  }
  double sum = 0.0;
  for (const double a : out.per_run_acc) sum += a;
  out.mean_acc = sum / static_cast<double>(out.per_run_acc.size());
  double ss = 0.0;
  for (const double a : out.per_run_acc) ss += (a - out.mean_acc) * (a - out.mean_acc);
  out.std_acc = out.per_run_acc.size() > 1
                    ? std::sqrt(ss / static_cast<double>(out.per_run_acc.size() - 1))
                    : 0.0;
  return out;
}

}  // namespace lgi::train
