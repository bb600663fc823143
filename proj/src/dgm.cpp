#include "lgi/dgm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace lgi::dgm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double uniform01(std::mt19937_64& rng) {
  // top 53 bits -> [0, 1); clamped so -log(-log u) stays finite
  double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return std::clamp(u, 1e-300, 1.0 - 1e-16);
}

void require_square(const Tensor& logits, const char* who) {
  if (logits.rank() != 2 || logits.rows() != logits.cols()) {
    throw ShapeError(std::string(who) + " expects a square logit matrix");
  }
}

// Selects the top-k of (score, index) pairs, ties toward the lower index,
// then reports them in ascending index order with their log-probs.
void select_row(const Tensor& logits, const std::vector<double>& scores, std::size_t i, int k,
                std::vector<int>& targets_out, std::vector<double>& log_probs_out) {
  const std::size_t n = logits.cols();
  std::vector<std::pair<double, int>> order;
  order.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (std::isfinite(logits(i, j))) order.emplace_back(scores[j], static_cast<int>(j));
  }
  if (static_cast<int>(order.size()) < k) {
    throw SamplingError("row " + std::to_string(i) + " has " + std::to_string(order.size()) +
                        " candidate edges, need " + std::to_string(k));
  }
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                    });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });

  // row log-softmax over the finite entries
  double mx = kNegInf;
  for (std::size_t j = 0; j < n; ++j) {
    if (std::isfinite(logits(i, j))) mx = std::max(mx, logits(i, j));
  }
  double z = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (std::isfinite(logits(i, j))) z += std::exp(logits(i, j) - mx);
  }
  const double lz = std::log(z) + mx;

  targets_out.clear();
  log_probs_out.clear();
  for (const auto& [score, j] : order) {
    targets_out.push_back(j);
    log_probs_out.push_back(logits(i, static_cast<std::size_t>(j)) - lz);
  }
}

EdgeSample topk_impl(const Tensor& logits, int k, std::mt19937_64* rng) {
  require_square(logits, "top-k sampling");
  if (k < 1) throw SamplingError("k must be at least 1, got " + std::to_string(k));
  const std::size_t n = logits.rows();
  EdgeSample sample;
  sample.k = k;
  sample.targets.resize(n);
  sample.log_probs.resize(n);
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double g = rng ? -std::log(-std::log(uniform01(*rng))) : 0.0;
      scores[j] = logits(i, j) + g;
    }
    select_row(logits, scores, i, k, sample.targets[i], sample.log_probs[i]);
  }
  return sample;
}

}  // namespace

Tensor Adjacency::to_dense() const {
  const std::size_t nn = targets.size();
  Tensor dense({nn, nn});
  for (std::size_t i = 0; i < nn; ++i) {
    for (int j : targets[i]) {
      if (j < 0 || static_cast<std::size_t>(j) >= nn) {
        throw GraphError("adjacency target out of range");
      }
      dense(i, static_cast<std::size_t>(j)) = 1.0;
    }
  }
  return dense;
}

Adjacency adjacency_from_sample(const EdgeSample& sample) {
  Adjacency adj;
  adj.targets = sample.targets;  // already ascending per row
  return adj;
}

Tensor edge_logits(const product::ManifoldSignature& sig,
                   const std::vector<product::ProductPoint>& points, double temperature) {
  if (!(temperature > 0.0)) {
    throw ConfigError("temperature must be positive, got " + std::to_string(temperature));
  }
  const std::size_t n = points.size();
  Tensor logits({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    logits(i, i) = kNegInf;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = product_dist(sig, points[i], points[j]);
      const double l = -temperature * d;
      logits(i, j) = l;
      logits(j, i) = l;
    }
  }
  return logits;
}

EdgeSample gumbel_topk(const Tensor& logits, int k, std::mt19937_64& rng) {
  return topk_impl(logits, k, &rng);
}

EdgeSample deterministic_topk(const Tensor& logits, int k) {
  return topk_impl(logits, k, nullptr);
}

double graph_reward_loss(std::span<const EdgeSample> samples, std::span<const double> baseline,
                         std::span<const int> correct) {
  if (baseline.size() != correct.size()) {
    throw DimensionError("baseline and correctness vectors differ in length");
  }
  double loss = 0.0;
  for (const auto& sample : samples) {
    if (sample.n() != baseline.size()) {
      throw DimensionError("sample row count does not match the node count");
    }
    for (std::size_t i = 0; i < baseline.size(); ++i) {
      double row_sum = 0.0;
      for (double lp : sample.log_probs[i]) row_sum += lp;
      loss += (baseline[i] - static_cast<double>(correct[i])) * row_sum;
    }
  }
  return loss;
}

}  // namespace lgi::dgm
