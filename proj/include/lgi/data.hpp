#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lgi/autodiff.hpp"

namespace lgi::data {

/// A node-classification dataset. Edges, when present, are undirected and
/// canonical: first < second, sorted lexicographically, no duplicates.
struct Dataset {
  std::string name;
  int n = 0;
  int n_classes = 0;
  ad::Tensor features;  // {n, d}
  std::vector<int> labels;
  std::optional<std::vector<std::pair<int, int>>> edges;

  int feature_dim() const { return static_cast<int>(features.cols()); }
  bool operator==(const Dataset& other) const;

  /// Dense symmetric 0/1 matrix of the input edges ({n, n}); ConfigError when
  /// the dataset has none.
  ad::Tensor dense_adjacency() const;
};

/// Reads a dataset from JSON ({"name", "n", "n_classes", "features",
/// "labels", "edges"}). Structural problems (malformed JSON, missing or
/// mistyped fields) raise ParseError; semantic ones (self loops, out-of-range
/// labels or endpoints, non-finite features, count mismatches) raise
/// DataError. Edge pairs are normalized to canonical form; duplicates
/// collapse silently.
Dataset load_dataset(const std::string& path);

/// Writes the canonical JSON form; load_dataset(save_dataset(d)) == d.
void save_dataset(const Dataset& dataset, const std::string& path);

/// Stochastic block model: labels cycle 0..n_classes-1, an undirected edge
/// joins i < j with probability p_in (same label) or p_out (different), and
/// features are a one-hot of label % feature_dim plus noise * N(0,1).
/// Deterministic in `seed` (features drawn row by row first, then edges in
/// i < j order).
Dataset generate_sbm(int n, int n_classes, double p_in, double p_out, int feature_dim,
                     double noise, std::uint64_t seed);

/// Disjoint node index sets, each sorted ascending.
struct Splits {
  std::vector<int> train, val, test;
};

/// Stratified split: within every class the fractions are honored by largest
/// remainder (ties favor the earlier of train/val/test), after a seeded
/// shuffle. When train_frac > 0 every class places at least one node in
/// train, moving one from its largest other split if needed. Fractions must
/// be non-negative and sum to 1 (within 1e-9).
Splits make_splits(std::span<const int> labels, int n_classes, double train_frac,
                   double val_frac, double test_frac, std::uint64_t seed);

}  // namespace lgi::data
