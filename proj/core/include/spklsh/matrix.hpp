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
#include <span>
#include <vector>

namespace spklsh {

/// Dense row-major matrix of doubles. Sized for the problems this library
/// actually solves (d up to ~1024); no fancy storage, no views.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<double> row(std::size_t i) {
    return {data_.data() + i * cols_, cols_};
  }
  std::vector<double> col(std::size_t j) const;

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  Matrix transposed() const;
  double trace() const;
  double frobenius_norm() const;
  double max_abs() const;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// A * B. Throws ValidationError on shape mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

/// A * x (length rows result).
std::vector<double> mat_vec(const Matrix& a, std::span<const double> x);

/// A^T * x (length cols result); the projection step w -> R^T w.
std::vector<double> mat_tvec(const Matrix& a, std::span<const double> x);

/// max |a_ij - a_ji| <= tol * max(1, max|a_ij|)
bool is_symmetric(const Matrix& a, double rel_tol = 1e-8);

// Plain-vector helpers used throughout.
double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
void normalize(std::span<double> a);  // no-op guard throws on zero norm
/// Cosine similarity clamped to [-1, 1]; 0 when either vector has zero norm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace spklsh
