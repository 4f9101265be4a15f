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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spklsh/embedding_store.hpp"
#include "spklsh/matrix.hpp"

namespace spklsh {

/// How a table's projection matrix was generated.
enum class ProjectionMethod { lsh, rs_lda, rss };

ProjectionMethod parse_method(std::string_view name);  // "lsh" | "rs-lda" | "rss"
std::string_view method_name(ProjectionMethod method);

/// Per-table projection: hash bit j of vector w is sgn(w^T r_j + b_j)
/// where r_j is column j of `matrix`.
struct ProjectionMatrix {
  Matrix matrix;             ///< d x k, columns are hyperplane normals
  std::vector<double> bias;  ///< length k
  ProjectionMethod method = ProjectionMethod::lsh;
  std::size_t table_index = 0;  ///< l in [1, L]

  std::size_t dim() const { return matrix.rows(); }
  std::size_t bits() const { return matrix.cols(); }
};

/// Parameters for the speaker-subspace generator.
struct RssConfig {
  std::size_t n_speakers = 0;  ///< speakers sampled per table; must exceed k
  std::size_t k = 0;           ///< hyperplanes per table
  std::size_t n_tables = 0;    ///< L
  std::optional<double> ridge; ///< within-scatter regularizer; auto when unset
  std::uint64_t seed = 0;
};

/// L tables of i.i.d. standard-normal entries with zero biases.
/// Table l draws from a stream keyed by (seed, l), so generation order
/// never affects the result.
std::vector<ProjectionMatrix> gen_lsh(std::size_t d, std::size_t k, std::size_t n_tables,
                                      std::uint64_t seed);

/// Per table: samples cfg.n_speakers distinct training speakers (fresh
/// draw each table), runs a k-dimensional discriminant analysis on their
/// utterances and uses its columns as the projection. Biases center the
/// projections of the full training set, b_j = -mean_i(w_i^T r_j), with
/// each w_i length-normalized to match the cosine hashing geometry.
std::vector<ProjectionMatrix> gen_rss(const EmbeddingStore& train, const RssConfig& cfg);

/// Per table: selects m_eigen of the training set's PCA eigenvectors at
/// random, runs the discriminant analysis over all speakers inside that
/// subspace and composes the two maps. Biases as in gen_rss.
std::vector<ProjectionMatrix> gen_rs_lda(const EmbeddingStore& train, std::size_t m_eigen,
                                         std::size_t k, std::size_t n_tables,
                                         std::optional<double> ridge, std::uint64_t seed);

/// A generated projection set plus the parameters that produced it;
/// the unit of (de)serialization.
struct ProjectionSet {
  ProjectionMethod method = ProjectionMethod::lsh;
  std::size_t d = 0;
  std::size_t k = 0;
  std::size_t n_tables = 0;
  std::uint64_t seed = 0;
  std::vector<ProjectionMatrix> tables;
};

/// JSON document {method, d, k, L, seed, tables: [{matrix: row-major
/// array, bias: array}]}. Round-trips exactly.
void save_projections(const std::filesystem::path& path, const ProjectionSet& set);
ProjectionSet load_projections(const std::filesystem::path& path);

}  // namespace spklsh
