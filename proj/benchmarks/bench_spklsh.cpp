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

#include <benchmark/benchmark.h>

#include <random>

#include "spklsh/spklsh.hpp"

namespace {

using namespace spklsh;

const EmbeddingStore& corpus() {
  static const EmbeddingStore store = EmbeddingStore::synthesize({2000, 10, 150, 1.0, 0.05, 1});
  return store;
}

std::vector<double> random_query(std::size_t d, std::uint64_t seed) {
  auto rng = make_engine(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> q(d);
  for (double& x : q) x = gauss(rng);
  normalize(q);
  return q;
}

void BM_HashVector(benchmark::State& state) {
  const auto tables = gen_lsh(150, state.range(0), 1, 3);
  const auto q = random_query(150, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(hash_vector(q, tables.front()));
  }
}
BENCHMARK(BM_HashVector)->Arg(8)->Arg(16)->Arg(64);

void BM_IndexBuild(benchmark::State& state) {
  const auto& store = corpus();
  const auto tables = gen_lsh(150, 12, state.range(0), 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(HashIndex::build(store, tables));
  }
  state.SetItemsProcessed(state.iterations() * store.size() * state.range(0));
}
BENCHMARK(BM_IndexBuild)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_QueryLinear(benchmark::State& state) {
  const auto& store = corpus();
  const auto q = random_query(150, 9);
  for (auto _ : state) {
    benchmark::DoNotOptimize(linear_search(store, q, {}, 10));
  }
  state.SetItemsProcessed(state.iterations() * store.size());
}
BENCHMARK(BM_QueryLinear)->Unit(benchmark::kMicrosecond);

void BM_QueryHash(benchmark::State& state) {
  const auto& store = corpus();
  static const HashIndex index = HashIndex::build(corpus(), gen_lsh(150, 12, 16, 7));
  const auto q = random_query(150, 9);
  for (auto _ : state) {
    benchmark::DoNotOptimize(index.query(q, 10));
  }
  benchmark::DoNotOptimize(store);
}
BENCHMARK(BM_QueryHash)->Unit(benchmark::kMicrosecond);

void BM_JacobiEig(benchmark::State& state) {
  auto rng = make_engine(11);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t n = state.range(0);
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double v = gauss(rng);
      m(i, j) = v;
      m(j, i) = v;
    }
  for (auto _ : state) {
    benchmark::DoNotOptimize(symmetric_eig(m));
  }
}
BENCHMARK(BM_JacobiEig)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_RssTable(benchmark::State& state) {
  static const EmbeddingStore train = EmbeddingStore::synthesize({200, 10, 64, 1.0, 0.05, 13});
  RssConfig cfg;
  cfg.n_speakers = 64;
  cfg.k = 12;
  cfg.n_tables = 1;
  cfg.seed = 13;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gen_rss(train, cfg));
  }
}
BENCHMARK(BM_RssTable)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
