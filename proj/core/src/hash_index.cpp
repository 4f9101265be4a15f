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

#include "spklsh/hash_index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

#include "spklsh/error.hpp"
#include "spklsh/matrix.hpp"

namespace spklsh {

namespace {

void rank_candidates(const EmbeddingStore& store, std::span<const double> q,
                     std::vector<std::uint32_t>& candidates, std::size_t top_n,
                     QueryResult& out) {
  out.ranked.reserve(candidates.size());
  for (std::uint32_t pos : candidates)
    out.ranked.push_back(ScoredItem{store.record(pos).id, cosine_similarity(q, store.vector(pos))});
  std::sort(out.ranked.begin(), out.ranked.end(), [](const ScoredItem& a, const ScoredItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  if (out.ranked.size() > top_n) out.ranked.resize(top_n);
}

}  // namespace

HashKey hash_vector(std::span<const double> w, const ProjectionMatrix& p) {
  if (w.size() != p.dim())
    throw ValidationError("hash_vector: vector dimension " + std::to_string(w.size()) +
                          " does not match projection dimension " + std::to_string(p.dim()));
  const std::size_t k = p.bits();
  if (k == 0 || k > 64)
    throw ValidationError("hash_vector: bit width must be in [1, 64], got " + std::to_string(k));

  std::vector<double> proj = mat_tvec(p.matrix, w);
  HashKey key;
  key.width = static_cast<std::uint32_t>(k);
  for (std::size_t j = 0; j < k; ++j)
    if (proj[j] + p.bias[j] >= 0.0) key.bits |= (std::uint64_t{1} << j);
  return key;
}

HashKey hash_direction(std::span<const double> w, const ProjectionMatrix& p) {
  const double n = norm(w);
  if (n == 0.0) return hash_vector(w, p);
  std::vector<double> unit(w.begin(), w.end());
  for (double& v : unit) v /= n;
  return hash_vector(unit, p);
}

std::size_t hamming(HashKey a, HashKey b) {
  if (a.width != b.width)
    throw ValidationError("hamming: key widths differ (" + std::to_string(a.width) + " vs " +
                          std::to_string(b.width) + ")");
  return static_cast<std::size_t>(std::popcount(a.bits ^ b.bits));
}

double cosine_from_hamming(std::size_t h, std::size_t k) {
  if (k == 0) throw ValidationError("cosine_from_hamming: k must be positive");
  if (h > k)
    throw ValidationError("cosine_from_hamming: h=" + std::to_string(h) + " out of range [0, " +
                          std::to_string(k) + "]");
  return std::cos(std::numbers::pi * static_cast<double>(h) / static_cast<double>(k));
}

HashIndex::HashIndex(const EmbeddingStore& store, std::vector<ProjectionMatrix> projections,
                     std::vector<std::uint32_t> positions)
    : store_(&store), projections_(std::move(projections)), positions_(std::move(positions)) {
  tables_.resize(projections_.size());
  for (std::size_t t = 0; t < projections_.size(); ++t) {
    for (std::uint32_t pos : positions_) {
      const HashKey key = hash_direction(store_->vector(pos), projections_[t]);
      tables_[t][key.bits].push_back(pos);
    }
  }
}

namespace {

void check_projection_shapes(const EmbeddingStore& store,
                             const std::vector<ProjectionMatrix>& projections) {
  for (const ProjectionMatrix& p : projections) {
    if (p.dim() != store.dimension())
      throw ValidationError("HashIndex::build: projection dimension " + std::to_string(p.dim()) +
                            " does not match store dimension " +
                            std::to_string(store.dimension()));
    if (p.bits() != projections.front().bits())
      throw ValidationError("HashIndex::build: projections disagree on bit width");
    if (p.bits() == 0 || p.bits() > 64)
      throw ValidationError("HashIndex::build: bit width must be in [1, 64]");
  }
}

}  // namespace

HashIndex HashIndex::build(const EmbeddingStore& store,
                           std::vector<ProjectionMatrix> projections) {
  if (store.size() == 0) throw ValidationError("HashIndex::build: store is empty");
  check_projection_shapes(store, projections);
  std::vector<std::uint32_t> positions(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) positions[i] = static_cast<std::uint32_t>(i);
  return HashIndex(store, std::move(projections), std::move(positions));
}

HashIndex HashIndex::build(const EmbeddingStore& store, std::vector<ProjectionMatrix> projections,
                           std::span<const std::string> subset_ids) {
  if (subset_ids.empty()) return build(store, std::move(projections));
  check_projection_shapes(store, projections);
  std::vector<std::uint32_t> positions;
  positions.reserve(subset_ids.size());
  for (const auto& id : subset_ids)
    positions.push_back(static_cast<std::uint32_t>(store.position_of(id)));
  std::sort(positions.begin(), positions.end());
  positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
  return HashIndex(store, std::move(projections), std::move(positions));
}

QueryResult HashIndex::query(std::span<const double> q, std::size_t top_n) const {
  if (q.size() != store_->dimension())
    throw ValidationError("query: vector dimension " + std::to_string(q.size()) +
                          " does not match index dimension " +
                          std::to_string(store_->dimension()));
  if (positions_.empty()) throw ValidationError("query: empty index");

  QueryResult out;
  out.tables_probed = projections_.size();

  std::vector<std::uint32_t> candidates;
  std::vector<bool> seen(store_->size(), false);
  for (std::size_t t = 0; t < projections_.size(); ++t) {
    const HashKey key = hash_direction(q, projections_[t]);
    auto it = tables_[t].find(key.bits);
    if (it == tables_[t].end()) continue;
    for (std::uint32_t pos : it->second) {
      if (!seen[pos]) {
        seen[pos] = true;
        candidates.push_back(pos);
      }
    }
  }
  out.candidates_examined = candidates.size();
  rank_candidates(*store_, q, candidates, top_n, out);
  return out;
}

std::span<const std::uint32_t> HashIndex::bucket(std::size_t table, HashKey key) const {
  if (table >= tables_.size()) throw ValidationError("bucket: table index out of range");
  auto it = tables_[table].find(key.bits);
  if (it == tables_[table].end()) return {};
  return it->second;
}

QueryResult linear_search(const EmbeddingStore& store, std::span<const double> q,
                          std::span<const std::string> subset_ids, std::size_t top_n) {
  if (q.size() != store.dimension())
    throw ValidationError("linear_search: vector dimension " + std::to_string(q.size()) +
                          " does not match store dimension " + std::to_string(store.dimension()));
  std::vector<std::uint32_t> positions;
  if (subset_ids.empty()) {
    positions.resize(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) positions[i] = static_cast<std::uint32_t>(i);
  } else {
    positions.reserve(subset_ids.size());
    for (const auto& id : subset_ids)
      positions.push_back(static_cast<std::uint32_t>(store.position_of(id)));
    std::sort(positions.begin(), positions.end());
    positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
  }

  QueryResult out;
  out.candidates_examined = positions.size();
  out.tables_probed = 0;
  rank_candidates(store, q, positions, top_n, out);
  return out;
}

}  // namespace spklsh
