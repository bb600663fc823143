#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lgi/data.hpp"
#include "lgi/dgm.hpp"
#include "lgi/gnn.hpp"

namespace lgi::train {

struct TrainConfig {
  int epochs = 300;
  double learning_rate = 1e-2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  int n_runs = 1;
  gnn::ModelConfig model;
  double train_frac = 0.6;
  double val_frac = 0.2;
  double test_frac = 0.2;
  double graph_loss_weight = 1.0;

  /// Fractions must all be positive and sum to 1 within 1e-9 (the raw split
  /// helper accepts zeros; training always wants all three sets populated).
  void validate() const;
};

/// One training run's trajectory. Index e holds the state after e optimizer
/// steps, so every vector has epochs + 1 entries and entry 0 describes the
/// untrained model.
struct RunMetrics {
  std::vector<double> train_loss;
  std::vector<double> train_accuracy;
  std::vector<double> val_accuracy;
  std::vector<double> test_accuracy;
  std::vector<double> temperature;               // empty for baselines
  std::vector<std::vector<double>> curvatures;   // per state, per component
  int best_epoch = 0;          // earliest state with the highest val accuracy
  double final_test_acc = 0.0; // test accuracy of that state
};

/// Classification loss plus weighted graph reward, evaluated on plain values
/// over every row: mean negative log-likelihood of the labels under the
/// (row-normalized) class log-probabilities, plus weight * the reward loss
/// with per-node correctness taken from the argmax predictions.
double total_loss(const ad::Tensor& class_log_probs, std::span<const int> labels,
                  std::span<const dgm::EdgeSample> samples, std::span<const double> baseline,
                  double graph_loss_weight = 1.0);

/// Fraction of `nodes` whose argmax row equals its label (ties break toward
/// the lower class index). Empty node sets count as accuracy 0.
double accuracy(const ad::Tensor& class_log_probs, std::span<const int> labels,
                std::span<const int> nodes);

/// Adam-trains the model on one seeded split of the dataset. Epoch loss =
/// mean train-node NLL + graph_loss_weight * reward restricted to train
/// nodes; the per-node correctness baseline is an EMA (decay 0.9) starting
/// at chance. Loss and baseline are computed under the sampled latent graph
/// (the REINFORCE estimator pairs each sample with its own outcome);
/// reported accuracies use the noise-free top-k graph instead. Returns the
/// parameters of the best-validation state (ties go to the earliest).
/// Non-finite losses raise TrainingError naming the epoch.
std::pair<gnn::ModelParams, RunMetrics> train(const TrainConfig& config,
                                              const data::Dataset& dataset);

struct RepeatResult {
  std::vector<double> per_run_acc;
  double mean_acc = 0.0;
  double std_acc = 0.0;  // sample standard deviation, 0 for a single run
  gnn::ModelParams last_params;  // best-val parameters of the final run
  RunMetrics last_metrics;
};

/// Runs train() n_runs times with seeds seed+0 ... seed+n_runs-1, a fresh
/// split each run, and aggregates the test accuracies. Training errors are
/// re-raised with the failing run index prefixed.
RepeatResult repeat_runs(const TrainConfig& config, const data::Dataset& dataset);

}  // namespace lgi::train
