#include "lgi/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "json.hpp"
#include "lgi/errors.hpp"

namespace lgi::data {

using nlohmann::json;

bool Dataset::operator==(const Dataset& other) const {
  if (name != other.name || n != other.n || n_classes != other.n_classes ||
      labels != other.labels || edges != other.edges) {
    return false;
  }
  if (!features.same_shape(other.features)) return false;
  for (std::size_t i = 0; i < features.numel(); ++i) {
    if (features.data()[i] != other.features.data()[i]) return false;
  }
  return true;
}

ad::Tensor Dataset::dense_adjacency() const {
  if (!edges) throw ConfigError("dataset '" + name + "' has no input edges");
  const auto nn = static_cast<std::size_t>(n);
  ad::Tensor a = ad::Tensor::zeros({nn, nn});
  for (const auto& [i, j] : *edges) {
    a(i, j) = 1.0;
    a(j, i) = 1.0;
  }
  return a;
}

namespace {

const json& require_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("dataset is missing field '") + key + "'");
  return *it;
}

int require_int(const json& j, const char* key) {
  const json& v = require_field(j, key);
  if (!v.is_number_integer()) throw ParseError(std::string("field '") + key + "' must be an integer");
  return v.get<int>();
}

}  // namespace

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("malformed dataset JSON in '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw ParseError("dataset JSON must be an object");

  Dataset ds;
  const json& name = require_field(j, "name");
  if (!name.is_string()) throw ParseError("field 'name' must be a string");
  ds.name = name.get<std::string>();
  ds.n = require_int(j, "n");
  ds.n_classes = require_int(j, "n_classes");
  if (ds.n < 1) throw DataError("dataset must have at least one node");
  if (ds.n_classes < 1) throw DataError("dataset must have at least one class");

  const json& feats = require_field(j, "features");
  if (!feats.is_array() || feats.empty() || !feats.front().is_array()) {
    throw ParseError("field 'features' must be a non-empty array of rows");
  }
  if (static_cast<int>(feats.size()) != ds.n) {
    throw DataError("dataset declares " + std::to_string(ds.n) + " nodes but has " +
                    std::to_string(feats.size()) + " feature rows");
  }
  const std::size_t dim = feats.front().size();
  if (dim == 0) throw DataError("feature rows must be non-empty");
  ds.features = ad::Tensor({static_cast<std::size_t>(ds.n), dim});
  for (int i = 0; i < ds.n; ++i) {
    const json& row = feats[i];
    if (!row.is_array() || row.size() != dim) {
      throw DataError("feature row " + std::to_string(i) + " has " + std::to_string(row.size()) +
                      " values, expected " + std::to_string(dim));
    }
    for (std::size_t k = 0; k < dim; ++k) {
      if (!row[k].is_number()) throw ParseError("feature entries must be numbers");
      const double value = row[k].get<double>();
      if (!std::isfinite(value)) {
        throw DataError("non-finite feature at node " + std::to_string(i));
      }
      ds.features(i, static_cast<int>(k)) = value;
    }
  }

  const json& labels = require_field(j, "labels");
  if (!labels.is_array()) throw ParseError("field 'labels' must be an array");
  if (static_cast<int>(labels.size()) != ds.n) {
    throw DataError("dataset declares " + std::to_string(ds.n) + " nodes but has " +
                    std::to_string(labels.size()) + " labels");
  }
  ds.labels.reserve(labels.size());
  for (const json& v : labels) {
    if (!v.is_number_integer()) throw ParseError("labels must be integers");
    const int label = v.get<int>();
    if (label < 0 || label >= ds.n_classes) {
      throw DataError("label " + std::to_string(label) + " outside [0, " +
                      std::to_string(ds.n_classes) + ")");
    }
    ds.labels.push_back(label);
  }

  const json& edges = require_field(j, "edges");
  if (edges.is_null()) return ds;
  if (!edges.is_array()) throw ParseError("field 'edges' must be an array or null");
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(edges.size());
  for (const json& e : edges) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer()) {
      throw ParseError("each edge must be a pair of integer node ids");
    }
    int a = e[0].get<int>();
    int b = e[1].get<int>();
    if (a < 0 || a >= ds.n || b < 0 || b >= ds.n) {
      throw DataError("edge [" + std::to_string(a) + ", " + std::to_string(b) +
                      "] has an endpoint outside [0, " + std::to_string(ds.n) + ")");
    }
    if (a == b) throw DataError("self loop at node " + std::to_string(a));
    if (a > b) std::swap(a, b);
    pairs.emplace_back(a, b);
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  ds.edges = std::move(pairs);
  return ds;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  for (std::size_t i = 0; i < dataset.features.numel(); ++i) {
    if (!std::isfinite(dataset.features.data()[i])) {
      throw DataError("refusing to save non-finite features");
    }
  }
  json j;
  j["name"] = dataset.name;
  j["n"] = dataset.n;
  j["n_classes"] = dataset.n_classes;
  json feats = json::array();
  for (int i = 0; i < dataset.n; ++i) {
    json row = json::array();
    for (std::size_t k = 0; k < dataset.features.cols(); ++k) {
      row.push_back(dataset.features(i, static_cast<int>(k)));
    }
    feats.push_back(std::move(row));
  }
  j["features"] = std::move(feats);
  j["labels"] = dataset.labels;
  if (dataset.edges) {
    json es = json::array();
    for (const auto& [a, b] : *dataset.edges) es.push_back(json::array({a, b}));
    j["edges"] = std::move(es);
  } else {
    j["edges"] = nullptr;
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset file '" + path + "'");
  out << j.dump(2) << '\n';
}

Dataset generate_sbm(int n, int n_classes, double p_in, double p_out, int feature_dim,
                     double noise, std::uint64_t seed) {
  if (n < 1) throw ConfigError("sbm needs at least one node");
  if (n_classes < 1 || n_classes > n) {
    throw ConfigError("sbm class count must be in [1, n]");
  }
  if (p_in < 0.0 || p_in > 1.0 || p_out < 0.0 || p_out > 1.0) {
    throw ConfigError("sbm edge probabilities must lie in [0, 1]");
  }
  if (feature_dim < 1) throw ConfigError("sbm feature dimension must be positive");
  if (!(noise >= 0.0)) throw ConfigError("sbm noise must be non-negative");

  Dataset ds;
  ds.name = "sbm";
  ds.n = n;
  ds.n_classes = n_classes;
  ds.labels.resize(n);
  for (int i = 0; i < n; ++i) ds.labels[i] = i % n_classes;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  ds.features = ad::Tensor::zeros(
      {static_cast<std::size_t>(n), static_cast<std::size_t>(feature_dim)});
  for (int i = 0; i < n; ++i) {
    ds.features(i, ds.labels[i] % feature_dim) = 1.0;
    for (int k = 0; k < feature_dim; ++k) ds.features(i, k) += noise * gauss(rng);
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double p = ds.labels[i] == ds.labels[j] ? p_in : p_out;
      if (unit(rng) < p) edges.emplace_back(i, j);
    }
  }
  ds.edges = std::move(edges);
  return ds;
}

Splits make_splits(std::span<const int> labels, int n_classes, double train_frac,
                   double val_frac, double test_frac, std::uint64_t seed) {
  if (n_classes < 1) throw ConfigError("split needs at least one class");
  for (const int label : labels) {
    if (label < 0 || label >= n_classes) {
      throw ConfigError("split saw label " + std::to_string(label) + " outside [0, " +
                        std::to_string(n_classes) + ")");
    }
  }
  const double fracs[3] = {train_frac, val_frac, test_frac};
  for (const double f : fracs) {
    if (!(f >= 0.0)) throw ConfigError("split fractions must be non-negative");
  }
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }

  std::mt19937_64 rng(seed);
  Splits out;
  std::vector<int>* parts[3] = {&out.train, &out.val, &out.test};
  for (int c = 0; c < n_classes; ++c) {
    std::vector<int> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) members.push_back(static_cast<int>(i));
    }
    if (members.empty()) continue;
    std::shuffle(members.begin(), members.end(), rng);

    const auto m = static_cast<double>(members.size());
    std::size_t counts[3];
    double remainders[3];
    std::size_t assigned = 0;
    for (int k = 0; k < 3; ++k) {
      const double exact = fracs[k] * m;
      counts[k] = static_cast<std::size_t>(std::floor(exact));
      remainders[k] = exact - static_cast<double>(counts[k]);
      assigned += counts[k];
    }
    int order[3] = {0, 1, 2};
    std::stable_sort(order, order + 3,
                     [&](int a, int b) { return remainders[a] > remainders[b]; });
    for (std::size_t left = members.size() - assigned, k = 0; k < left; ++k) {
      counts[order[k]] += 1;
    }
    if (train_frac > 0.0 && counts[0] == 0) {
      // every class must reach the train set; borrow from its larger split
      const int source = counts[1] >= counts[2] ? 1 : 2;
      counts[source] -= 1;
      counts[0] += 1;
    }

    std::size_t cursor = 0;
    for (int k = 0; k < 3; ++k) {
      parts[k]->insert(parts[k]->end(), members.begin() + static_cast<std::ptrdiff_t>(cursor),
                       members.begin() + static_cast<std::ptrdiff_t>(cursor + counts[k]));
      cursor += counts[k];
    }
    if (cursor != members.size()) {
      throw SplitError("class " + std::to_string(c) + " assignment lost nodes");
    }
  }
  for (auto* part : parts) std::sort(part->begin(), part->end());
  if (out.train.size() + out.val.size() + out.test.size() != labels.size()) {
    throw SplitError("splits do not cover the node set");
  }
  return out;
}

}  // namespace lgi::data
