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

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "spklsh/embedding_store.hpp"
#include "spklsh/projections.hpp"

namespace spklsh {

/// Packed k-bit hash code, k <= 64. Bit j is 1 iff w^T r_j + b_j >= 0
/// (the boundary maps to 1).
struct HashKey {
  std::uint64_t bits = 0;
  std::uint32_t width = 0;

  bool operator==(const HashKey&) const = default;
};

HashKey hash_vector(std::span<const double> w, const ProjectionMatrix& p);

/// Hash of the vector's direction: hash_vector applied to w / |w|.
/// Scoring is cosine throughout, so indexing and querying operate on the
/// unit sphere; biases are calibrated on the same sphere. For zero-bias
/// tables this equals hashing the raw vector. Zero vectors hash as-is.
HashKey hash_direction(std::span<const double> w, const ProjectionMatrix& p);

/// Population count of the XOR. Throws on width mismatch.
std::size_t hamming(HashKey a, HashKey b);

/// cos(pi * h / k): the cosine a Hamming distance h out of k sign bits
/// approximates.
double cosine_from_hamming(std::size_t h, std::size_t k);

/// One retrieval answer: candidates scored by exact cosine against the
/// stored vectors, descending, ties broken by ascending record id.
struct ScoredItem {
  std::string id;
  double score = 0.0;
};

struct QueryResult {
  std::vector<ScoredItem> ranked;
  std::size_t candidates_examined = 0;
  std::size_t tables_probed = 0;
};

/// L hash tables over a subset of an EmbeddingStore. Records and queries
/// are hashed by direction (hash_direction); rerank scores are exact
/// cosine on the original vectors. Immutable after build; queries are
/// read-only and safe to run concurrently. The store must outlive the
/// index.
class HashIndex {
 public:
  /// Indexes every record of the store.
  static HashIndex build(const EmbeddingStore& store, std::vector<ProjectionMatrix> projections);
  /// Indexes the given utterance ids only. All projections must share
  /// the store's dimension and one bit width.
  static HashIndex build(const EmbeddingStore& store, std::vector<ProjectionMatrix> projections,
                         std::span<const std::string> subset_ids);

  /// Unions the buckets matching the query's key in every table, then
  /// reranks by exact cosine. An L=0 index yields empty results.
  QueryResult query(std::span<const double> q, std::size_t top_n) const;

  const EmbeddingStore& store() const { return *store_; }
  const std::vector<ProjectionMatrix>& projections() const { return projections_; }
  std::size_t table_count() const { return projections_.size(); }
  std::size_t indexed_count() const { return positions_.size(); }
  std::span<const std::uint32_t> indexed_positions() const { return positions_; }
  /// Bucket of the given table holding the given key; empty when absent.
  std::span<const std::uint32_t> bucket(std::size_t table, HashKey key) const;

 private:
  HashIndex(const EmbeddingStore& store, std::vector<ProjectionMatrix> projections,
            std::vector<std::uint32_t> positions);

  const EmbeddingStore* store_ = nullptr;
  std::vector<ProjectionMatrix> projections_;
  std::vector<std::uint32_t> positions_;  // ascending store positions
  std::vector<std::unordered_map<std::uint64_t, std::vector<std::uint32_t>>> tables_;
};

/// Exact cosine scoring over a subset (every id when empty); the oracle
/// the hash index is measured against. Same ordering rule as query().
QueryResult linear_search(const EmbeddingStore& store, std::span<const double> q,
                          std::span<const std::string> subset_ids, std::size_t top_n);

}  // namespace spklsh
