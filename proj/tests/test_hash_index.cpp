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

#include <random>
#include <set>
#include <thread>

#include "spklsh/error.hpp"
#include "spklsh/hash_index.hpp"
#include "spklsh/projections.hpp"
#include "test_helpers.hpp"

using namespace spklsh;

namespace {

ProjectionMatrix make_projection(const Matrix& m, std::vector<double> bias) {
  ProjectionMatrix p;
  p.matrix = m;
  p.bias = std::move(bias);
  return p;
}

EmbeddingStore random_store(std::size_t n, std::size_t d, std::uint64_t seed) {
  auto rng = std::mt19937_64(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Embedding> records;
  for (std::size_t i = 0; i < n; ++i) {
    Embedding rec;
    rec.id = "u" + std::to_string(1000 + i);  // fixed width keeps id order sane
    rec.speaker = "s" + std::to_string(i % 7);
    rec.vector.resize(d);
    for (double& v : rec.vector) v = gauss(rng);
    records.push_back(std::move(rec));
  }
  return EmbeddingStore(d, std::move(records));
}

}  // namespace

TEST_CASE("hash_vector: the sign boundary maps to bit 1") {
  // Columns orthogonal to w, zero bias: every projection is exactly 0.
  Matrix m(2, 3);
  m(1, 0) = 1.0;
  m(1, 1) = -2.0;
  m(1, 2) = 0.5;
  const auto p = make_projection(m, {0.0, 0.0, 0.0});
  const std::vector<double> w{1.0, 0.0};
  const HashKey key = hash_vector(w, p);
  CHECK(key.width == 3);
  CHECK(key.bits == 0b111);
}

TEST_CASE("hash_vector: negating the vector flips every off-boundary bit") {
  auto rng = std::mt19937_64(3);
  const auto tables = gen_lsh(6, 8, 1, 3);
  const auto w = testutil::random_unit_vector(6, rng);
  std::vector<double> neg(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) neg[i] = -w[i];
  const HashKey a = hash_vector(w, tables[0]);
  const HashKey b = hash_vector(neg, tables[0]);
  CHECK(hamming(a, b) == 8);  // no projection lands exactly on the boundary
}

TEST_CASE("hash_vector agrees with a scalar-loop recomputation") {
  auto rng = std::mt19937_64(7);
  const auto tables = gen_lsh(10, 8, 1, 7);
  const auto w = testutil::random_unit_vector(10, rng);
  const HashKey key = hash_vector(w, tables[0]);
  for (std::size_t j = 0; j < 8; ++j) {
    double s = tables[0].bias[j];
    for (std::size_t i = 0; i < 10; ++i) s += w[i] * tables[0].matrix(i, j);
    const bool bit = (key.bits >> j) & 1;
    CHECK(bit == (s >= 0.0));
  }
}

TEST_CASE("hash_vector validates dimensions and width") {
  const auto tables = gen_lsh(4, 2, 1, 1);
  const std::vector<double> wrong{1.0, 2.0};
  CHECK_THROWS_AS(hash_vector(wrong, tables[0]), ValidationError);

  ProjectionMatrix wide = make_projection(Matrix(4, 65), std::vector<double>(65, 0.0));
  const std::vector<double> w{1.0, 2.0, 3.0, 4.0};
  CHECK_THROWS_AS(hash_vector(w, wide), ValidationError);
}

TEST_CASE("hamming distances") {
  const HashKey a{0b10110101, 8};
  CHECK(hamming(a, a) == 0);
  const HashKey complement{static_cast<std::uint64_t>(0b01001010), 8};
  CHECK(hamming(a, complement) == 8);

  auto rng = std::mt19937_64(11);
  std::uniform_int_distribution<std::uint64_t> bits;
  for (int i = 0; i < 20; ++i) {
    const HashKey x{bits(rng) & 0xFFFFFFFFFFFFull, 48};
    const HashKey y{bits(rng) & 0xFFFFFFFFFFFFull, 48};
    std::size_t expected = 0;
    for (int b = 0; b < 48; ++b)
      if (((x.bits >> b) & 1) != ((y.bits >> b) & 1)) ++expected;
    CHECK(hamming(x, y) == expected);
  }

  const HashKey narrow{0b1, 4};
  CHECK_THROWS_AS(hamming(a, narrow), ValidationError);
}

TEST_CASE("cosine_from_hamming endpoints") {
  CHECK(cosine_from_hamming(0, 8) == doctest::Approx(1.0));
  CHECK(cosine_from_hamming(8, 8) == doctest::Approx(-1.0));
  CHECK(cosine_from_hamming(4, 8) == doctest::Approx(0.0));
  CHECK_THROWS_AS(cosine_from_hamming(9, 8), ValidationError);
  CHECK_THROWS_AS(cosine_from_hamming(0, 0), ValidationError);
}

TEST_CASE("build: one bucket entry per record per table") {
  const auto store = random_store(10, 6, 5);
  const auto index = HashIndex::build(store, gen_lsh(6, 3, 2, 5));
  CHECK(index.table_count() == 2);
  CHECK(index.indexed_count() == 10);
  for (std::size_t t = 0; t < 2; ++t) {
    std::size_t occupancy = 0;
    std::set<std::uint64_t> seen_keys;
    for (std::size_t pos = 0; pos < store.size(); ++pos) {
      const HashKey key = hash_direction(store.vector(pos), index.projections()[t]);
      if (seen_keys.insert(key.bits).second) occupancy += index.bucket(t, key).size();
    }
    CHECK(occupancy == 10);
  }
}

TEST_CASE("build rejects zero-width projections, mixed shapes and unknown ids") {
  const auto store = random_store(4, 6, 9);
  std::vector<ProjectionMatrix> zero_width{
      make_projection(Matrix(6, 0), {})};
  CHECK_THROWS_AS(HashIndex::build(store, zero_width), ValidationError);

  auto mixed = gen_lsh(6, 3, 1, 1);
  auto extra = gen_lsh(6, 4, 1, 2);
  mixed.push_back(extra.front());
  CHECK_THROWS_AS(HashIndex::build(store, mixed), ValidationError);

  const std::vector<std::string> unknown{"missing"};
  CHECK_THROWS_AS(HashIndex::build(store, gen_lsh(6, 3, 1, 1), unknown), ValidationError);
}

TEST_CASE("rebuild from serialized projections assigns identical buckets") {
  testutil::TempDir dir("spklsh-index");
  const auto store = random_store(30, 8, 13);

  ProjectionSet set;
  set.method = ProjectionMethod::lsh;
  set.d = 8;
  set.k = 5;
  set.n_tables = 3;
  set.seed = 13;
  set.tables = gen_lsh(8, 5, 3, 13);
  save_projections(dir.file("p.json"), set);
  const ProjectionSet loaded = load_projections(dir.file("p.json"));

  const auto a = HashIndex::build(store, set.tables);
  const auto b = HashIndex::build(store, loaded.tables);
  for (std::size_t pos = 0; pos < store.size(); ++pos)
    for (std::size_t t = 0; t < 3; ++t) {
      const HashKey ka = hash_direction(store.vector(pos), a.projections()[t]);
      const HashKey kb = hash_direction(store.vector(pos), b.projections()[t]);
      CHECK(ka == kb);
      const auto bucket_a = a.bucket(t, ka);
      const auto bucket_b = b.bucket(t, kb);
      REQUIRE(bucket_a.size() == bucket_b.size());
      for (std::size_t i = 0; i < bucket_a.size(); ++i) CHECK(bucket_a[i] == bucket_b[i]);
    }
}

TEST_CASE("query: a stored vector collides with itself and ranks first") {
  const auto store = random_store(25, 8, 17);
  const auto index = HashIndex::build(store, gen_lsh(8, 4, 3, 17));
  const auto result = index.query(store.vector(6), 10);
  REQUIRE(!result.ranked.empty());
  CHECK(result.ranked.front().id == store.record(6).id);
  CHECK(result.ranked.front().score == doctest::Approx(1.0));
  CHECK(result.tables_probed == 3);
  CHECK(result.candidates_examined <= 25);
}

TEST_CASE("query: all-empty buckets yield an empty ranking") {
  // One record on the positive side of a single hyperplane; query from
  // the negative side probes a bucket that was never filled.
  std::vector<Embedding> records{{"u1", "s1", {1.0, 0.0}}};
  const EmbeddingStore store(2, std::move(records));
  Matrix m(2, 1);
  m(0, 0) = 1.0;
  const auto index = HashIndex::build(store, {make_projection(m, {0.0})});
  const std::vector<double> q{-1.0, 0.0};
  const auto result = index.query(q, 5);
  CHECK(result.ranked.empty());
  CHECK(result.candidates_examined == 0);
}

TEST_CASE("query candidates equal a brute-force bucket union") {
  const auto store = random_store(40, 6, 21);
  const auto tables = gen_lsh(6, 2, 5, 21);
  const auto index = HashIndex::build(store, tables);
  auto rng = std::mt19937_64(22);
  for (int trial = 0; trial < 10; ++trial) {
    const auto q = testutil::random_unit_vector(6, rng);
    const auto result = index.query(q, 40);

    std::set<std::string> expected;
    for (const auto& p : tables) {
      const HashKey qkey = hash_direction(q, p);
      for (std::size_t pos = 0; pos < store.size(); ++pos)
        if (hash_direction(store.vector(pos), p) == qkey) expected.insert(store.record(pos).id);
    }
    CHECK(result.candidates_examined == expected.size());
    std::set<std::string> got;
    for (const auto& item : result.ranked) got.insert(item.id);
    CHECK(got == expected);
  }
}

TEST_CASE("linear_search: degenerate subsets and the id tie rule") {
  const auto store = random_store(10, 4, 25);
  const std::vector<std::string> one{store.record(3).id};
  const auto single = linear_search(store, store.vector(3), one, 5);
  REQUIRE(single.ranked.size() == 1);
  CHECK(single.ranked.front().id == store.record(3).id);
  CHECK(single.candidates_examined == 1);

  // Repeated subset ids count once.
  const std::vector<std::string> repeated{store.record(3).id, store.record(3).id};
  CHECK(linear_search(store, store.vector(3), repeated, 5).candidates_examined == 1);

  // Query orthogonal to every record: all scores zero, id order.
  std::vector<Embedding> planar;
  for (int i = 0; i < 5; ++i)
    planar.push_back({"u" + std::to_string(9 - i), "s", {double(i + 1), double(2 * i + 1), 0.0}});
  const EmbeddingStore flat(3, std::move(planar));
  const std::vector<double> q{0.0, 0.0, 1.0};
  const auto result = linear_search(flat, q, {}, 5);
  REQUIRE(result.ranked.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(result.ranked[i].score == 0.0);
    CHECK(result.ranked[i].id == "u" + std::to_string(5 + i));
  }
}

TEST_CASE("query ranking is the linear ranking restricted to the candidates") {
  const auto store = random_store(50, 8, 29);
  const auto index = HashIndex::build(store, gen_lsh(8, 3, 4, 29));
  auto rng = std::mt19937_64(30);
  for (int trial = 0; trial < 5; ++trial) {
    const auto q = testutil::random_unit_vector(8, rng);
    const auto approx = index.query(q, 50);
    const auto exact = linear_search(store, q, {}, 50);

    std::set<std::string> candidates;
    for (const auto& item : approx.ranked) candidates.insert(item.id);
    std::vector<ScoredItem> filtered;
    for (const auto& item : exact.ranked)
      if (candidates.contains(item.id)) filtered.push_back(item);
    REQUIRE(filtered.size() == approx.ranked.size());
    for (std::size_t i = 0; i < filtered.size(); ++i) {
      CHECK(filtered[i].id == approx.ranked[i].id);
      CHECK(filtered[i].score == approx.ranked[i].score);
    }
  }
}

TEST_CASE("recall against the linear top-1 never drops as tables are added") {
  const auto store = EmbeddingStore::synthesize({20, 5, 8, 1.0, 0.08, 31});
  for (std::uint64_t seed : {101u, 202u, 303u}) {
    const auto all_tables = gen_lsh(8, 4, 8, seed);
    double previous_recall = -1.0;
    for (std::size_t n_tables : {1u, 2u, 4u, 8u}) {
      std::vector<ProjectionMatrix> tables(all_tables.begin(), all_tables.begin() + n_tables);
      const auto index = HashIndex::build(store, tables);
      std::size_t hits = 0;
      const std::size_t n_queries = 30;
      auto qrng = std::mt19937_64(seed);
      for (std::size_t qi = 0; qi < n_queries; ++qi) {
        const auto q = testutil::random_unit_vector(8, qrng);
        const auto exact = linear_search(store, q, {}, 1);
        const auto approx = index.query(q, store.size());
        for (const auto& item : approx.ranked)
          if (item.id == exact.ranked.front().id) {
            ++hits;
            break;
          }
      }
      const double recall = static_cast<double>(hits) / n_queries;
      CHECK(recall >= previous_recall);
      previous_recall = recall;
    }
  }
}

TEST_CASE("sign-bit agreement tracks cosine as the bit budget grows") {
  // 1024 bits assembled from 16 tables of 64; Hamming distances add
  // across disjoint bit blocks.
  const std::size_t d = 24;
  auto rng = std::mt19937_64(33);
  std::vector<double> previous_error{2.0};
  for (std::size_t total_bits : {16u, 64u, 256u}) {
    const std::size_t width = std::min<std::size_t>(total_bits, 64);
    const std::size_t n_tables = total_bits / width;
    const auto tables = gen_lsh(d, width, n_tables, 77);
    double error_sum = 0.0;
    const int pairs = 120;
    for (int i = 0; i < pairs; ++i) {
      const auto x = testutil::random_unit_vector(d, rng);
      const auto y = testutil::random_unit_vector(d, rng);
      std::size_t h = 0;
      for (const auto& p : tables) h += hamming(hash_vector(x, p), hash_vector(y, p));
      error_sum += std::abs(cosine_from_hamming(h, total_bits) - dot(x, y));
    }
    const double mean_error = error_sum / pairs;
    CHECK(mean_error < previous_error.back());
    previous_error.push_back(mean_error);
  }
}

TEST_CASE("centered speaker-subspace hyperplanes split the corpus near evenly") {
  const auto store = EmbeddingStore::synthesize({200, 5, 16, 1.0, 0.1, 35});
  RssConfig cfg;
  cfg.n_speakers = 16;
  cfg.k = 8;
  cfg.n_tables = 4;
  cfg.seed = 35;
  const auto tables = gen_rss(store, cfg);
  const auto index = HashIndex::build(store, tables);
  for (const auto& p : index.projections()) {
    std::vector<std::size_t> ones(p.bits(), 0);
    for (std::size_t pos = 0; pos < store.size(); ++pos) {
      const HashKey key = hash_direction(store.vector(pos), p);
      for (std::size_t j = 0; j < p.bits(); ++j)
        if ((key.bits >> j) & 1) ++ones[j];
    }
    for (std::size_t j = 0; j < p.bits(); ++j) {
      const double fraction = static_cast<double>(ones[j]) / static_cast<double>(store.size());
      CHECK(fraction >= 0.4);
      CHECK(fraction <= 0.6);
    }
  }
}

TEST_CASE("concurrent queries return what serial queries return") {
  const auto store = random_store(200, 8, 41);
  const auto index = HashIndex::build(store, gen_lsh(8, 4, 6, 41));

  std::vector<std::vector<double>> queries;
  auto rng = std::mt19937_64(42);
  for (int i = 0; i < 32; ++i) queries.push_back(testutil::random_unit_vector(8, rng));
  std::vector<QueryResult> serial;
  for (const auto& q : queries) serial.push_back(index.query(q, 10));

  std::vector<std::vector<QueryResult>> parallel(4);
  std::vector<std::thread> workers;
  for (std::size_t t = 0; t < 4; ++t)
    workers.emplace_back([&, t] {
      for (const auto& q : queries) parallel[t].push_back(index.query(q, 10));
    });
  for (auto& w : workers) w.join();

  for (const auto& results : parallel) {
    REQUIRE(results.size() == serial.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
      CHECK(results[i].candidates_examined == serial[i].candidates_examined);
      REQUIRE(results[i].ranked.size() == serial[i].ranked.size());
      for (std::size_t r = 0; r < serial[i].ranked.size(); ++r) {
        CHECK(results[i].ranked[r].id == serial[i].ranked[r].id);
        CHECK(results[i].ranked[r].score == serial[i].ranked[r].score);
      }
    }
  }
}

TEST_CASE("full candidate coverage reproduces the linear ranking exactly") {
  const auto store = random_store(30, 6, 37);
  // A catch-all table (huge positive biases) guarantees one bucket
  // holding the whole corpus, so the union always covers it.
  auto tables = gen_lsh(6, 3, 2, 37);
  tables.push_back(make_projection(Matrix(6, 3), {1e6, 1e6, 1e6}));
  const auto index = HashIndex::build(store, tables);
  auto rng = std::mt19937_64(38);
  for (int trial = 0; trial < 5; ++trial) {
    const auto q = testutil::random_unit_vector(6, rng);
    const auto approx = index.query(q, store.size());
    const auto exact = linear_search(store, q, {}, store.size());
    CHECK(approx.candidates_examined == store.size());
    REQUIRE(approx.ranked.size() == exact.ranked.size());
    for (std::size_t i = 0; i < exact.ranked.size(); ++i) {
      CHECK(approx.ranked[i].id == exact.ranked[i].id);
      CHECK(approx.ranked[i].score == exact.ranked[i].score);
    }
  }
}
