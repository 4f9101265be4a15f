// Copyright 2026 The spklsh Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "spklsh/error.hpp"
#include "spklsh/hash_index.hpp"
#include "spklsh/linalg.hpp"
#include "spklsh/projections.hpp"
#include "test_helpers.hpp"

using namespace spklsh;

namespace {

// Mean over the training set of (w^T r_j + b_j) with w length-normalized
// (the hashing geometry); zero when centered.
double centering_residual(const EmbeddingStore& train, const ProjectionMatrix& p) {
  double worst = 0.0;
  for (std::size_t j = 0; j < p.bits(); ++j) {
    const auto column = p.matrix.col(j);
    double mean = 0.0;
    for (std::size_t pos = 0; pos < train.size(); ++pos) {
      const auto w = train.vector(pos);
      mean += dot(w, column) / norm(w) + p.bias[j];
    }
    worst = std::max(worst, std::abs(mean / static_cast<double>(train.size())));
  }
  return worst;
}

// Full-enumeration same/different Hamming ratio; independent of the
// sampled estimator in the evaluation module.
double brute_force_hamming_ratio(const EmbeddingStore& store,
                                 const std::vector<ProjectionMatrix>& tables) {
  std::vector<std::vector<HashKey>> keys(store.size());
  for (std::size_t pos = 0; pos < store.size(); ++pos)
    for (const auto& p : tables) keys[pos].push_back(hash_direction(store.vector(pos), p));
  double same_sum = 0.0, diff_sum = 0.0;
  std::size_t same_n = 0, diff_n = 0;
  for (std::size_t i = 0; i < store.size(); ++i) {
    for (std::size_t j = i + 1; j < store.size(); ++j) {
      double distance = 0.0;
      for (std::size_t t = 0; t < tables.size(); ++t)
        distance += static_cast<double>(hamming(keys[i][t], keys[j][t]));
      distance /= static_cast<double>(tables.size());
      if (store.record(i).speaker == store.record(j).speaker) {
        same_sum += distance;
        ++same_n;
      } else {
        diff_sum += distance;
        ++diff_n;
      }
    }
  }
  return (same_sum / same_n) / (diff_sum / diff_n);
}

}  // namespace

TEST_CASE("gen_lsh: shapes, zero biases and determinism") {
  const auto tables = gen_lsh(4, 2, 3, 1);
  REQUIRE(tables.size() == 3);
  for (const auto& p : tables) {
    CHECK(p.matrix.rows() == 4);
    CHECK(p.matrix.cols() == 2);
    CHECK(p.bias == std::vector<double>{0.0, 0.0});
    CHECK(p.method == ProjectionMethod::lsh);
  }
  CHECK(tables[0].table_index == 1);
  CHECK(tables[2].table_index == 3);

  const auto again = gen_lsh(4, 2, 3, 1);
  for (std::size_t l = 0; l < 3; ++l) CHECK(tables[l].matrix == again[l].matrix);
  const auto other_seed = gen_lsh(4, 2, 3, 2);
  CHECK(tables[0].matrix.data() != other_seed[0].matrix.data());

  CHECK_THROWS_AS(gen_lsh(0, 2, 3, 1), ValidationError);
  CHECK_THROWS_AS(gen_lsh(4, 0, 3, 1), ValidationError);
}

TEST_CASE("gen_lsh entries match standard-normal moments") {
  const auto tables = gen_lsh(128, 16, 5, 42);
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& p : tables)
    for (double v : p.matrix.data()) {
      sum += v;
      sq += v * v;
      ++n;
    }
  REQUIRE(n == 10240);
  const double mean = sum / static_cast<double>(n);
  const double variance = sq / static_cast<double>(n) - mean * mean;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(variance - 1.0) < 0.1);
}

TEST_CASE("gen_rss: distinct speaker draws give distinct tables") {
  const auto train = EmbeddingStore::synthesize({24, 4, 8, 1.0, 0.1, 3});
  RssConfig cfg;
  cfg.n_speakers = 8;
  cfg.k = 4;
  cfg.n_tables = 2;
  cfg.seed = 11;
  const auto tables = gen_rss(train, cfg);
  REQUIRE(tables.size() == 2);
  CHECK(testutil::frobenius_distance(tables[0].matrix, tables[1].matrix) > 0.0);
  CHECK(tables[0].method == ProjectionMethod::rss);

  const auto again = gen_rss(train, cfg);
  CHECK(tables[0].matrix == again[0].matrix);
  CHECK(tables[0].bias == again[0].bias);
}

TEST_CASE("gen_rss biases center the training projections exactly") {
  const auto train = EmbeddingStore::synthesize({20, 3, 6, 1.0, 0.1, 5});
  RssConfig cfg;
  cfg.n_speakers = 10;
  cfg.k = 3;
  cfg.n_tables = 4;
  cfg.seed = 7;
  for (const auto& p : gen_rss(train, cfg)) CHECK(centering_residual(train, p) < 1e-9);
}

TEST_CASE("gen_rss rejects oversized speaker subsets and the rank bound") {
  const auto train = EmbeddingStore::synthesize({10, 3, 6, 1.0, 0.1, 5});
  RssConfig cfg;
  cfg.n_speakers = 11;
  cfg.k = 3;
  cfg.n_tables = 1;
  cfg.seed = 1;
  CHECK_THROWS_WITH_AS(gen_rss(train, cfg), doctest::Contains("available training speakers"),
                       ValidationError);

  cfg.n_speakers = 10;
  cfg.k = 10;  // k == N_s: only N_s - 1 directions exist
  CHECK_THROWS_WITH_AS(gen_rss(train, cfg), doctest::Contains("N_s must exceed k"),
                       ValidationError);
}

TEST_CASE("gen_rs_lda with the full basis spans the plain discriminant solution") {
  const auto train = EmbeddingStore::synthesize({12, 5, 6, 1.0, 0.2, 9});
  const auto tables = gen_rs_lda(train, 6, 3, 1, std::nullopt, 17);
  REQUIRE(tables.size() == 1);

  // Selecting every eigenvector only rotates the coordinates, so the
  // composed map must span the same space as LDA on the raw data.
  std::vector<LabeledVec> samples;
  for (std::size_t pos = 0; pos < train.size(); ++pos)
    samples.push_back(LabeledVec{train.record(pos).speaker, train.vector(pos)});
  const LdaTransform direct = lda(samples, 3);
  CHECK(testutil::max_principal_angle(tables[0].matrix, direct.matrix) < 1e-6);
}

TEST_CASE("gen_rs_lda: fixed seed fixture draws different selections per table") {
  const auto train = EmbeddingStore::synthesize({14, 4, 8, 1.0, 0.2, 23});
  const auto tables = gen_rs_lda(train, 4, 3, 2, std::nullopt, 23);
  REQUIRE(tables.size() == 2);
  CHECK(testutil::frobenius_distance(tables[0].matrix, tables[1].matrix) > 1e-6);

  const auto again = gen_rs_lda(train, 4, 3, 2, std::nullopt, 23);
  CHECK(tables[0].matrix == again[0].matrix);
  CHECK(tables[1].bias == again[1].bias);
}

TEST_CASE("gen_rs_lda validates the selection count and rank bound") {
  const auto train = EmbeddingStore::synthesize({10, 3, 6, 1.0, 0.2, 31});
  CHECK_THROWS_WITH_AS(gen_rs_lda(train, 7, 3, 1, std::nullopt, 1),
                       doctest::Contains("eigenvectors"), ValidationError);
  CHECK_THROWS_AS(gen_rs_lda(train, 4, 5, 1, std::nullopt, 1), ValidationError);
}

TEST_CASE("gen_rs_lda biases center the training projections") {
  const auto train = EmbeddingStore::synthesize({16, 3, 8, 1.0, 0.2, 37});
  for (const auto& p : gen_rs_lda(train, 5, 3, 3, std::nullopt, 37))
    CHECK(centering_residual(train, p) < 1e-9);
}

TEST_CASE("rss tables occupy distinct subspaces across tables") {
  const auto train = EmbeddingStore::synthesize({40, 4, 8, 1.0, 0.15, 41});
  RssConfig cfg;
  cfg.n_speakers = 10;
  cfg.k = 4;
  cfg.n_tables = 4;
  cfg.seed = 41;
  const auto tables = gen_rss(train, cfg);
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < tables.size(); ++a)
    for (std::size_t b = a + 1; b < tables.size(); ++b) {
      total += testutil::mean_principal_angle(tables[a].matrix, tables[b].matrix);
      ++pairs;
    }
  CHECK(total / static_cast<double>(pairs) > 0.1);
}

TEST_CASE("speaker-subspace hashes separate speakers better than random hyperplanes") {
  // Clustered data, one store reused as training set and corpus.
  const auto store = EmbeddingStore::synthesize({30, 6, 16, 1.0, 0.1, 19});
  RssConfig cfg;
  cfg.n_speakers = 16;
  cfg.k = 8;
  cfg.n_tables = 4;
  cfg.seed = 19;
  const double rss_ratio = brute_force_hamming_ratio(store, gen_rss(store, cfg));
  const double rs_lda_ratio =
      brute_force_hamming_ratio(store, gen_rs_lda(store, 12, 8, 4, std::nullopt, 19));
  const double lsh_ratio = brute_force_hamming_ratio(store, gen_lsh(16, 8, 4, 19));
  CHECK(rss_ratio < lsh_ratio);
  CHECK(rs_lda_ratio < lsh_ratio);
}

TEST_CASE("projection sets round trip through JSON exactly") {
  testutil::TempDir dir("spklsh-proj");
  const auto train = EmbeddingStore::synthesize({12, 4, 6, 1.0, 0.2, 43});
  RssConfig cfg;
  cfg.n_speakers = 8;
  cfg.k = 3;
  cfg.n_tables = 2;
  cfg.seed = 43;

  ProjectionSet set;
  set.method = ProjectionMethod::rss;
  set.d = 6;
  set.k = 3;
  set.n_tables = 2;
  set.seed = 43;
  set.tables = gen_rss(train, cfg);
  save_projections(dir.file("p.json"), set);

  const ProjectionSet loaded = load_projections(dir.file("p.json"));
  CHECK(loaded.method == ProjectionMethod::rss);
  CHECK(loaded.d == 6);
  CHECK(loaded.k == 3);
  CHECK(loaded.n_tables == 2);
  CHECK(loaded.seed == 43);
  REQUIRE(loaded.tables.size() == 2);
  for (std::size_t l = 0; l < 2; ++l) {
    CHECK(loaded.tables[l].matrix == set.tables[l].matrix);  // bitwise
    CHECK(loaded.tables[l].bias == set.tables[l].bias);
    CHECK(loaded.tables[l].table_index == l + 1);
  }
}

TEST_CASE("projection files are validated on load") {
  testutil::TempDir dir("spklsh-proj");
  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream out(dir.file(name));
    out << content;
    return dir.file(name);
  };

  CHECK_THROWS_AS(load_projections(dir.file("absent.json")), ValidationError);
  CHECK_THROWS_AS(load_projections(write("garbled.json", "{not json")), ValidationError);
  CHECK_THROWS_WITH_AS(
      load_projections(write("missing.json", R"({"method":"lsh","d":2,"k":1,"L":1})")),
      doctest::Contains("seed"), ValidationError);
  CHECK_THROWS_WITH_AS(
      load_projections(write(
          "short.json",
          R"({"method":"lsh","d":2,"k":2,"L":1,"seed":0,"tables":[{"matrix":[1.0],"bias":[0,0]}]})")),
      doctest::Contains("size"), ValidationError);
  CHECK_THROWS_WITH_AS(
      load_projections(write("count.json",
                             R"({"method":"lsh","d":2,"k":1,"L":2,"seed":0,"tables":[]})")),
      doctest::Contains("2 tables"), ValidationError);
}

TEST_CASE("method tags parse and print") {
  CHECK(parse_method("lsh") == ProjectionMethod::lsh);
  CHECK(parse_method("rs-lda") == ProjectionMethod::rs_lda);
  CHECK(parse_method("rss") == ProjectionMethod::rss);
  CHECK(method_name(ProjectionMethod::rs_lda) == "rs-lda");
  CHECK_THROWS_AS(parse_method("simhash"), ValidationError);
}
