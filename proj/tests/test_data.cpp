#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>

#include "doctest.h"
#include "lgi/data.hpp"
#include "lgi/errors.hpp"

using namespace lgi;
using namespace lgi::data;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/lgi_data_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

// Minimal valid dataset JSON with one field overridable per test.
std::string tiny_json(const std::string& edges = "[[0, 1]]",
                      const std::string& labels = "[0, 1]",
                      const std::string& features = "[[1.0, 0.0], [0.0, 1.0]]") {
  return std::string("{\"name\": \"tiny\", \"n\": 2, \"n_classes\": 2, \"features\": ") +
         features + ", \"labels\": " + labels + ", \"edges\": " + edges + "}";
}

}  // namespace

TEST_CASE("sbm generation is deterministic and labeled cyclically") {
  const Dataset a = generate_sbm(30, 3, 0.4, 0.05, 4, 0.1, 11);
  const Dataset b = generate_sbm(30, 3, 0.4, 0.05, 4, 0.1, 11);
  const Dataset c = generate_sbm(30, 3, 0.4, 0.05, 4, 0.1, 12);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(a.n == 30);
  CHECK(a.n_classes == 3);
  CHECK(a.feature_dim() == 4);
  for (int i = 0; i < a.n; ++i) CHECK(a.labels[i] == i % 3);
  REQUIRE(a.edges.has_value());
  for (const auto& [u, v] : *a.edges) {
    CHECK(u < v);
    CHECK(v < a.n);
  }
  CHECK(std::is_sorted(a.edges->begin(), a.edges->end()));
}

TEST_CASE("sbm with zero noise gives exact one-hot features") {
  const Dataset ds = generate_sbm(10, 4, 0.2, 0.2, 3, 0.0, 5);
  for (int i = 0; i < ds.n; ++i) {
    for (int k = 0; k < 3; ++k) {
      const double want = k == ds.labels[i] % 3 ? 1.0 : 0.0;
      CHECK(ds.features(i, k) == want);
    }
  }
}

TEST_CASE("sbm edge counts match the block probabilities") {
  const Dataset ds = generate_sbm(300, 3, 0.1, 0.01, 4, 0.0, 77);
  std::size_t within = 0;
  std::size_t across = 0;
  for (const auto& [u, v] : *ds.edges) {
    (ds.labels[u] == ds.labels[v] ? within : across) += 1;
  }
  // 3 * C(100, 2) within-class pairs, the rest across.
  const double within_pairs = 3 * 100 * 99 / 2.0;
  const double across_pairs = 300 * 299 / 2.0 - within_pairs;
  const double within_mean = 0.1 * within_pairs;
  const double across_mean = 0.01 * across_pairs;
  CHECK(std::abs(static_cast<double>(within) - within_mean) <
        4.0 * std::sqrt(within_mean * 0.9));
  CHECK(std::abs(static_cast<double>(across) - across_mean) <
        4.0 * std::sqrt(across_mean * 0.99));
}

TEST_CASE("sbm argument validation") {
  CHECK_THROWS_AS(generate_sbm(0, 1, 0.1, 0.1, 2, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(generate_sbm(3, 5, 0.1, 0.1, 2, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(generate_sbm(10, 2, 1.5, 0.1, 2, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(generate_sbm(10, 2, 0.1, -0.1, 2, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(generate_sbm(10, 2, 0.1, 0.1, 0, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(generate_sbm(10, 2, 0.1, 0.1, 2, -1.0, 1), ConfigError);
}

TEST_CASE("save and load round-trip exactly") {
  TempFile f("roundtrip.json");
  const Dataset ds = generate_sbm(25, 3, 0.3, 0.05, 5, 0.7, 321);
  save_dataset(ds, f.path);
  const Dataset back = load_dataset(f.path);
  CHECK(back == ds);

  // Saving the loaded copy reproduces the same bytes.
  TempFile g("roundtrip2.json");
  save_dataset(back, g.path);
  std::ifstream fa(f.path), fb(g.path);
  const std::string ta((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  const std::string tb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  CHECK(ta == tb);
}

TEST_CASE("round-trip keeps a missing edge list missing") {
  TempFile f("noedges.json");
  Dataset ds = generate_sbm(6, 2, 0.5, 0.5, 2, 0.0, 9);
  ds.edges.reset();
  save_dataset(ds, f.path);
  const Dataset back = load_dataset(f.path);
  CHECK_FALSE(back.edges.has_value());
  CHECK(back == ds);
}

TEST_CASE("loader normalizes edge order and drops duplicates") {
  TempFile f("norm.json");
  write_text(f.path, tiny_json("[[1, 0], [0, 1], [1, 0]]"));
  const Dataset ds = load_dataset(f.path);
  REQUIRE(ds.edges.has_value());
  CHECK(*ds.edges == std::vector<std::pair<int, int>>{{0, 1}});
}

TEST_CASE("loader rejects malformed and mistyped input") {
  TempFile f("bad.json");

  write_text(f.path, "{not json");
  CHECK_THROWS_AS(load_dataset(f.path), ParseError);

  write_text(f.path, "[1, 2, 3]");
  CHECK_THROWS_AS(load_dataset(f.path), ParseError);

  write_text(f.path, "{\"name\": \"x\", \"n\": 2, \"n_classes\": 2}");
  CHECK_THROWS_WITH_AS(load_dataset(f.path), doctest::Contains("features"), ParseError);

  write_text(f.path, tiny_json("[[0, 1]]", "[0, 1]", "[[1.0, \"oops\"], [0.0, 1.0]]"));
  CHECK_THROWS_AS(load_dataset(f.path), ParseError);

  write_text(f.path, tiny_json("[[0, 0.5]]"));
  CHECK_THROWS_AS(load_dataset(f.path), ParseError);

  CHECK_THROWS_AS(load_dataset("/tmp/lgi_data_does_not_exist.json"), DataError);
}

TEST_CASE("loader rejects semantically invalid data") {
  TempFile f("semantic.json");

  write_text(f.path, tiny_json("[[0, 0]]"));
  CHECK_THROWS_WITH_AS(load_dataset(f.path), doctest::Contains("self loop"), DataError);

  write_text(f.path, tiny_json("[[0, 2]]"));
  CHECK_THROWS_AS(load_dataset(f.path), DataError);

  write_text(f.path, tiny_json("[[0, 1]]", "[0, 2]"));
  CHECK_THROWS_AS(load_dataset(f.path), DataError);

  write_text(f.path, tiny_json("[[0, 1]]", "[0]"));
  CHECK_THROWS_AS(load_dataset(f.path), DataError);

  write_text(f.path, tiny_json("[[0, 1]]", "[0, 1]", "[[1.0], [0.0, 1.0]]"));
  CHECK_THROWS_AS(load_dataset(f.path), DataError);
}

TEST_CASE("dense adjacency is symmetric with zero diagonal") {
  TempFile f("adj.json");
  write_text(f.path, tiny_json());
  const Dataset ds = load_dataset(f.path);
  const ad::Tensor a = ds.dense_adjacency();
  CHECK(a(0, 1) == 1.0);
  CHECK(a(1, 0) == 1.0);
  CHECK(a(0, 0) == 0.0);
  CHECK(a(1, 1) == 0.0);

  Dataset bare = ds;
  bare.edges.reset();
  CHECK_THROWS_AS(bare.dense_adjacency(), ConfigError);
}

TEST_CASE("stratified splits honor per-class fractions") {
  std::vector<int> labels(100);
  for (int i = 0; i < 100; ++i) labels[i] = i % 10;
  const Splits s = make_splits(labels, 10, 0.6, 0.2, 0.2, 3);
  CHECK(s.train.size() == 60);
  CHECK(s.val.size() == 20);
  CHECK(s.test.size() == 20);

  std::set<int> seen;
  for (const auto* part : {&s.train, &s.val, &s.test}) {
    CHECK(std::is_sorted(part->begin(), part->end()));
    for (int i : *part) CHECK(seen.insert(i).second);
  }
  CHECK(seen.size() == 100);

  for (int c = 0; c < 10; ++c) {
    const auto count = [&](const std::vector<int>& part) {
      return std::count_if(part.begin(), part.end(), [&](int i) { return labels[i] == c; });
    };
    CHECK(count(s.train) == 6);
    CHECK(count(s.val) == 2);
    CHECK(count(s.test) == 2);
  }
}

TEST_CASE("splits are seed-deterministic and seed-sensitive") {
  std::vector<int> labels(60);
  for (int i = 0; i < 60; ++i) labels[i] = i % 3;
  const Splits a = make_splits(labels, 3, 0.5, 0.25, 0.25, 4);
  const Splits b = make_splits(labels, 3, 0.5, 0.25, 0.25, 4);
  const Splits c = make_splits(labels, 3, 0.5, 0.25, 0.25, 5);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);
  CHECK(a.train != c.train);
  // Counts stay fixed across seeds; only membership moves.
  CHECK(c.train.size() == 30);
  CHECK(c.val.size() == 15);
  CHECK(c.test.size() == 15);
}

TEST_CASE("every class reaches the train set when train_frac is positive") {
  // Class 1 has a single node; rounding alone would hand it to val.
  std::vector<int> labels = {0, 0, 0, 0, 0, 0, 0, 0, 1};
  const Splits s = make_splits(labels, 2, 0.2, 0.4, 0.4, 1);
  CHECK(std::count(s.train.begin(), s.train.end(), 8) == 1);
}

TEST_CASE("degenerate fractions send everything to one split") {
  std::vector<int> labels = {0, 1, 2, 0, 1, 2};
  const Splits s = make_splits(labels, 3, 1.0, 0.0, 0.0, 2);
  CHECK(s.train.size() == 6);
  CHECK(s.val.empty());
  CHECK(s.test.empty());
}

TEST_CASE("split argument validation") {
  std::vector<int> labels = {0, 1};
  CHECK_THROWS_AS(make_splits(labels, 2, 0.5, 0.5, 0.5, 1), ConfigError);
  CHECK_THROWS_AS(make_splits(labels, 2, -0.2, 0.6, 0.6, 1), ConfigError);
  CHECK_THROWS_AS(make_splits(labels, 1, 0.6, 0.2, 0.2, 1), ConfigError);
  CHECK_THROWS_AS(make_splits(labels, 0, 1.0, 0.0, 0.0, 1), ConfigError);
}
