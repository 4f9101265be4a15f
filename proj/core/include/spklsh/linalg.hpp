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

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spklsh/matrix.hpp"

namespace spklsh {

/// One labeled sample. Views reference caller-owned storage and must
/// outlive the call they are passed to.
struct LabeledVec {
  std::string_view label;
  std::span<const double> values;
};

/// Between / within-class scatter of a labeled sample set.
///
///   within  = sum_c sum_{i in c} (x_i - mu_c)(x_i - mu_c)^T
///   between = sum_c n_c (mu_c - mu)(mu_c - mu)^T
///
/// and between + within equals the total scatter around the global mean.
struct ScatterPair {
  Matrix between;
  Matrix within;
  std::vector<double> global_mean;
  std::map<std::string, std::vector<double>> class_means;
  std::map<std::string, std::size_t> class_counts;
};

/// Eigenvalues in descending order; eigenvectors as matching orthonormal
/// columns.
struct EigenDecomposition {
  std::vector<double> eigenvalues;
  Matrix eigenvectors;
};

/// Discriminant transform: d x k eigenvector columns ordered by descending
/// generalized eigenvalue of (within + ridge*I)^-1 * between.
struct LdaTransform {
  Matrix matrix;
  std::vector<double> eigenvalues;
};

/// Requires >= 2 classes, every class non-empty, consistent dimensions.
ScatterPair scatter_matrices(std::span<const LabeledVec> samples);

/// Cyclic Jacobi rotations on a copy of m. Input must be symmetric within
/// tolerance; it is symmetrized exactly before iterating. Throws on
/// non-symmetric input and (reported, never truncated) non-convergence.
EigenDecomposition symmetric_eig(const Matrix& m);

/// Lower-triangular L with L L^T = m. Throws if m is not positive definite.
Matrix cholesky_lower(const Matrix& m);

/// When unset, the ridge added to the within-class scatter defaults to
/// ridge_scale * trace(S_w) / d with this scale.
inline constexpr double kDefaultRidgeScale = 1e-6;

/// Linear discriminant analysis via Cholesky whitening of (S_w + eps*I)
/// followed by a symmetric eigensolve; k must not exceed min(d, C-1).
LdaTransform lda(std::span<const LabeledVec> samples, std::size_t k,
                 std::optional<double> ridge = std::nullopt);

/// Top-m orthonormal eigenvectors (descending eigenvalue) of the sample
/// covariance of the centered data. Requires m <= d and >= 2 vectors.
Matrix pca(std::span<const std::span<const double>> vectors, std::size_t m);

}  // namespace spklsh
