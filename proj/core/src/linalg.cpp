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

#include "spklsh/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spklsh/error.hpp"

namespace spklsh {

namespace {

// Adds the outer product w * delta * delta^T into acc, writing both
// triangles from the same product so the result stays exactly symmetric.
void accumulate_outer(Matrix& acc, std::span<const double> delta, double w) {
  const std::size_t d = delta.size();
  for (std::size_t i = 0; i < d; ++i) {
    const double wi = w * delta[i];
    acc(i, i) += wi * delta[i];
    for (std::size_t j = i + 1; j < d; ++j) {
      const double p = wi * delta[j];
      acc(i, j) += p;
      acc(j, i) += p;
    }
  }
}

// Solves L y = b in place (L lower triangular).
void forward_substitute(const Matrix& L, std::span<double> b) {
  const std::size_t n = L.rows();
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    const auto lrow = L.row(i);
    for (std::size_t j = 0; j < i; ++j) s -= lrow[j] * b[j];
    b[i] = s / lrow[i];
  }
}

// Solves L^T x = b in place.
void backward_substitute_transposed(const Matrix& L, std::span<double> b) {
  const std::size_t n = L.rows();
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= L(j, ii) * b[j];
    b[ii] = s / L(ii, ii);
  }
}

void sort_descending(EigenDecomposition& eig) {
  const std::size_t n = eig.eigenvalues.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return eig.eigenvalues[a] > eig.eigenvalues[b];
  });
  std::vector<double> vals(n);
  Matrix vecs(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    vals[j] = eig.eigenvalues[order[j]];
    for (std::size_t i = 0; i < n; ++i) vecs(i, j) = eig.eigenvectors(i, order[j]);
  }
  eig.eigenvalues = std::move(vals);
  eig.eigenvectors = std::move(vecs);
}

}  // namespace

ScatterPair scatter_matrices(std::span<const LabeledVec> samples) {
  if (samples.empty()) throw ValidationError("scatter_matrices: empty input");
  const std::size_t d = samples.front().values.size();

  std::map<std::string, std::vector<double>> sums;
  std::map<std::string, std::size_t> counts;
  std::vector<double> global_sum(d, 0.0);
  for (const auto& s : samples) {
    if (s.values.size() != d)
      throw ValidationError("scatter_matrices: inconsistent sample dimension");
    auto [it, inserted] = sums.try_emplace(std::string(s.label), d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      it->second[i] += s.values[i];
      global_sum[i] += s.values[i];
    }
    ++counts[std::string(s.label)];
  }
  if (counts.size() < 2) throw ValidationError("scatter_matrices: need at least 2 classes");

  const double n_total = static_cast<double>(samples.size());
  std::vector<double> global_mean(d);
  for (std::size_t i = 0; i < d; ++i) global_mean[i] = global_sum[i] / n_total;

  std::map<std::string, std::vector<double>> class_means;
  for (const auto& [label, sum] : sums) {
    std::vector<double> mean(d);
    const double n_c = static_cast<double>(counts.at(label));
    for (std::size_t i = 0; i < d; ++i) mean[i] = sum[i] / n_c;
    class_means.emplace(label, std::move(mean));
  }

  Matrix within(d, d);
  std::vector<double> delta(d);
  for (const auto& s : samples) {
    const auto& mean = class_means.at(std::string(s.label));
    for (std::size_t i = 0; i < d; ++i) delta[i] = s.values[i] - mean[i];
    accumulate_outer(within, delta, 1.0);
  }

  Matrix between(d, d);
  for (const auto& [label, mean] : class_means) {
    for (std::size_t i = 0; i < d; ++i) delta[i] = mean[i] - global_mean[i];
    accumulate_outer(between, delta, static_cast<double>(counts.at(label)));
  }

  return ScatterPair{std::move(between), std::move(within), std::move(global_mean),
                     std::move(class_means), std::move(counts)};
}

EigenDecomposition symmetric_eig(const Matrix& m) {
  if (m.rows() != m.cols()) throw ValidationError("symmetric_eig: matrix not square");
  if (!is_symmetric(m)) throw ValidationError("symmetric_eig: matrix not symmetric");
  const std::size_t n = m.rows();
  if (n == 0) return {{}, Matrix{}};

  // Work on the exactly symmetrized copy.
  Matrix a = m;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = v;
      a(j, i) = v;
    }
  Matrix v = Matrix::identity(n);

  const double fro = std::max(a.frobenius_norm(), 1e-300);
  constexpr int kMaxSweeps = 100;
  bool converged = false;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (std::sqrt(off) <= 1e-14 * fro) {
      converged = true;
      break;
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (tau >= 0.0) ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                      : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        for (std::size_t i = 0; i < n; ++i) {
          const double aip = a(i, p);
          const double aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(i, q) = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double api = a(p, i);
          const double aqi = a(q, i);
          a(p, i) = c * api - s * aqi;
          a(q, i) = s * api + c * aqi;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = v(i, p);
          const double viq = v(i, q);
          v(i, p) = c * vip - s * viq;
          v(i, q) = s * vip + c * viq;
        }
      }
    }
  }
  if (!converged) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (std::sqrt(off) > 1e-10 * fro)
      throw std::runtime_error("symmetric_eig: Jacobi iteration did not converge in " +
                               std::to_string(kMaxSweeps) + " sweeps");
  }

  EigenDecomposition eig;
  eig.eigenvalues.resize(n);
  for (std::size_t i = 0; i < n; ++i) eig.eigenvalues[i] = a(i, i);
  eig.eigenvectors = std::move(v);
  sort_descending(eig);
  return eig;
}

Matrix cholesky_lower(const Matrix& m) {
  if (m.rows() != m.cols()) throw ValidationError("cholesky: matrix not square");
  const std::size_t n = m.rows();
  Matrix L(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      if (i == j) {
        if (s <= 0.0) throw ValidationError("cholesky: matrix not positive definite");
        L(i, j) = std::sqrt(s);
      } else {
        L(i, j) = s / L(j, j);
      }
    }
  }
  return L;
}

LdaTransform lda(std::span<const LabeledVec> samples, std::size_t k,
                 std::optional<double> ridge) {
  ScatterPair sp = scatter_matrices(samples);
  const std::size_t d = sp.within.rows();
  const std::size_t n_classes = sp.class_counts.size();
  const std::size_t rank_bound = std::min(d, n_classes - 1);
  if (k == 0) throw ValidationError("lda: k must be positive");
  if (k > rank_bound)
    throw ValidationError("lda: k=" + std::to_string(k) + " exceeds min(d, C-1)=" +
                          std::to_string(rank_bound) + " with C=" + std::to_string(n_classes) +
                          " classes in dimension " + std::to_string(d));

  const double eps = ridge.value_or(kDefaultRidgeScale * sp.within.trace() /
                                    static_cast<double>(d));
  Matrix regularized = sp.within;
  for (std::size_t i = 0; i < d; ++i) regularized(i, i) += eps;

  // Whiten: B = L^-1 S_b L^-T is symmetric, so the generalized problem
  // reduces to a plain symmetric eigensolve.
  const Matrix L = cholesky_lower(regularized);
  Matrix b = sp.between;
  std::vector<double> work(d);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < d; ++i) work[i] = b(i, j);
    forward_substitute(L, work);
    for (std::size_t i = 0; i < d; ++i) b(i, j) = work[i];
  }
  for (std::size_t i = 0; i < d; ++i) {
    auto brow = b.row(i);
    forward_substitute(L, brow);
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      const double v = 0.5 * (b(i, j) + b(j, i));
      b(i, j) = v;
      b(j, i) = v;
    }

  EigenDecomposition eig = symmetric_eig(b);

  // Map whitened eigenvectors back: w = L^-T v.
  LdaTransform out;
  out.matrix = Matrix(d, k);
  out.eigenvalues.assign(eig.eigenvalues.begin(), eig.eigenvalues.begin() + k);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < d; ++i) work[i] = eig.eigenvectors(i, j);
    backward_substitute_transposed(L, work);
    for (std::size_t i = 0; i < d; ++i) out.matrix(i, j) = work[i];
  }
  return out;
}

Matrix pca(std::span<const std::span<const double>> vectors, std::size_t m) {
  if (vectors.size() < 2) throw ValidationError("pca: need at least 2 vectors");
  const std::size_t d = vectors.front().size();
  if (m > d)
    throw ValidationError("pca: m=" + std::to_string(m) + " exceeds dimension " +
                          std::to_string(d));
  if (m == 0) throw ValidationError("pca: m must be positive");

  std::vector<double> mean(d, 0.0);
  for (const auto& v : vectors) {
    if (v.size() != d) throw ValidationError("pca: inconsistent vector dimension");
    for (std::size_t i = 0; i < d; ++i) mean[i] += v[i];
  }
  for (double& x : mean) x /= static_cast<double>(vectors.size());

  Matrix cov(d, d);
  std::vector<double> delta(d);
  for (const auto& v : vectors) {
    for (std::size_t i = 0; i < d; ++i) delta[i] = v[i] - mean[i];
    for (std::size_t i = 0; i < d; ++i) {
      const double di = delta[i];
      cov(i, i) += di * di;
      for (std::size_t j = i + 1; j < d; ++j) {
        const double p = di * delta[j];
        cov(i, j) += p;
        cov(j, i) += p;
      }
    }
  }
  const double denom = static_cast<double>(vectors.size() - 1);
  for (double& x : cov.data()) x /= denom;

  EigenDecomposition eig = symmetric_eig(cov);
  Matrix components(d, m);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i < d; ++i) components(i, j) = eig.eigenvectors(i, j);
  return components;
}

}  // namespace spklsh
