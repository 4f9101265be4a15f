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

#include "spklsh/projections.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <random>

#include <json.hpp>

#include "spklsh/error.hpp"
#include "spklsh/linalg.hpp"
#include "spklsh/prng.hpp"

namespace spklsh {

namespace {

using nlohmann::json;

// b_j = -(1/N) sum_i w_i^T r_j over every training utterance, so hash
// bins are balanced around the training data's center. Hashing operates
// on directions (cosine geometry), so the calibration does too: each
// training vector enters length-normalized.
std::vector<double> centering_bias(const EmbeddingStore& train, const Matrix& matrix) {
  std::vector<double> mean(matrix.cols(), 0.0);
  std::vector<double> unit(train.dimension());
  for (std::size_t pos = 0; pos < train.size(); ++pos) {
    const auto w = train.vector(pos);
    const double n = norm(w);
    for (std::size_t i = 0; i < w.size(); ++i) unit[i] = (n == 0.0) ? w[i] : w[i] / n;
    const std::vector<double> proj = mat_tvec(matrix, unit);
    for (std::size_t j = 0; j < proj.size(); ++j) mean[j] += proj[j];
  }
  for (double& m : mean) m = -m / static_cast<double>(train.size());
  return mean;
}

// First n entries of a seeded partial Fisher-Yates shuffle of [0, total).
std::vector<std::size_t> sample_without_replacement(std::size_t total, std::size_t n,
                                                    std::mt19937_64& rng) {
  std::vector<std::size_t> indices(total);
  for (std::size_t i = 0; i < total; ++i) indices[i] = i;
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, total - 1);
    std::swap(indices[i], indices[pick(rng)]);
  }
  indices.resize(n);
  return indices;
}

}  // namespace

ProjectionMethod parse_method(std::string_view name) {
  if (name == "lsh") return ProjectionMethod::lsh;
  if (name == "rs-lda") return ProjectionMethod::rs_lda;
  if (name == "rss") return ProjectionMethod::rss;
  throw ValidationError("unknown method '" + std::string(name) +
                        "' (expected lsh, rs-lda or rss)");
}

std::string_view method_name(ProjectionMethod method) {
  switch (method) {
    case ProjectionMethod::lsh: return "lsh";
    case ProjectionMethod::rs_lda: return "rs-lda";
    case ProjectionMethod::rss: return "rss";
  }
  return "?";
}

std::vector<ProjectionMatrix> gen_lsh(std::size_t d, std::size_t k, std::size_t n_tables,
                                      std::uint64_t seed) {
  if (d == 0 || k == 0 || n_tables == 0)
    throw ValidationError("gen_lsh: d, k and L must be positive");
  std::vector<ProjectionMatrix> tables;
  tables.reserve(n_tables);
  for (std::size_t l = 1; l <= n_tables; ++l) {
    auto rng = make_engine(seed, l);
    std::normal_distribution<double> gauss(0.0, 1.0);
    ProjectionMatrix p;
    p.matrix = Matrix(d, k);
    for (double& v : p.matrix.data()) v = gauss(rng);
    p.bias.assign(k, 0.0);
    p.method = ProjectionMethod::lsh;
    p.table_index = l;
    tables.push_back(std::move(p));
  }
  return tables;
}

std::vector<ProjectionMatrix> gen_rss(const EmbeddingStore& train, const RssConfig& cfg) {
  if (cfg.k == 0 || cfg.n_tables == 0)
    throw ValidationError("gen_rss: k and L must be positive");
  if (cfg.n_speakers > train.speaker_count())
    throw ValidationError("gen_rss: N_s=" + std::to_string(cfg.n_speakers) + " exceeds the " +
                          std::to_string(train.speaker_count()) + " available training speakers");
  if (cfg.k + 1 > cfg.n_speakers)
    throw ValidationError("gen_rss: k=" + std::to_string(cfg.k) + " requires N_s >= k+1 (got N_s=" +
                          std::to_string(cfg.n_speakers) +
                          "); a subset of N_s speakers spans at most N_s-1 discriminant "
                          "directions, so N_s must exceed k");

  const std::vector<std::string> speakers = train.speakers();
  std::vector<ProjectionMatrix> tables;
  tables.reserve(cfg.n_tables);
  for (std::size_t l = 1; l <= cfg.n_tables; ++l) {
    auto rng = make_engine(cfg.seed, l);
    const auto chosen = sample_without_replacement(speakers.size(), cfg.n_speakers, rng);

    std::vector<LabeledVec> samples;
    for (std::size_t idx : chosen) {
      const std::string& speaker = speakers[idx];
      const auto& positions = train.speaker_index().at(speaker);
      if (positions.size() < 2)
        std::cerr << "spklsh: warning: speaker '" << speaker << "' sampled for table " << l
                  << " has a single utterance (no within-class spread)\n";
      for (std::uint32_t pos : positions)
        samples.push_back(LabeledVec{speaker, train.vector(pos)});
    }

    ProjectionMatrix p;
    p.matrix = lda(samples, cfg.k, cfg.ridge).matrix;
    p.bias = centering_bias(train, p.matrix);
    p.method = ProjectionMethod::rss;
    p.table_index = l;
    tables.push_back(std::move(p));
  }
  return tables;
}

std::vector<ProjectionMatrix> gen_rs_lda(const EmbeddingStore& train, std::size_t m_eigen,
                                         std::size_t k, std::size_t n_tables,
                                         std::optional<double> ridge, std::uint64_t seed) {
  if (k == 0 || n_tables == 0) throw ValidationError("gen_rs_lda: k and L must be positive");
  const std::size_t d = train.dimension();
  if (m_eigen == 0 || m_eigen > d)
    throw ValidationError("gen_rs_lda: eigenvector selection count " + std::to_string(m_eigen) +
                          " exceeds the " + std::to_string(d) + " available PCA eigenvectors");
  const std::size_t n_classes = train.speaker_count();
  if (n_classes < 2) throw ValidationError("gen_rs_lda: need at least 2 training speakers");
  if (k > std::min(m_eigen, n_classes - 1))
    throw ValidationError("gen_rs_lda: k=" + std::to_string(k) + " exceeds min(m_eigen, C-1)=" +
                          std::to_string(std::min(m_eigen, n_classes - 1)));

  std::vector<std::span<const double>> rows;
  rows.reserve(train.size());
  for (std::size_t pos = 0; pos < train.size(); ++pos) rows.push_back(train.vector(pos));
  const Matrix basis = pca(rows, d);

  std::vector<ProjectionMatrix> tables;
  tables.reserve(n_tables);
  for (std::size_t l = 1; l <= n_tables; ++l) {
    auto rng = make_engine(seed, l);
    const auto chosen = sample_without_replacement(d, m_eigen, rng);
    Matrix selected(d, m_eigen);
    for (std::size_t j = 0; j < m_eigen; ++j)
      for (std::size_t i = 0; i < d; ++i) selected(i, j) = basis(i, chosen[j]);

    // Discriminant analysis over all speakers inside the selected subspace.
    std::vector<std::vector<double>> projected(train.size());
    std::vector<LabeledVec> samples;
    samples.reserve(train.size());
    for (std::size_t pos = 0; pos < train.size(); ++pos) {
      projected[pos] = mat_tvec(selected, train.vector(pos));
      samples.push_back(LabeledVec{train.record(pos).speaker, projected[pos]});
    }
    const LdaTransform discriminant = lda(samples, k, ridge);

    ProjectionMatrix p;
    p.matrix = matmul(selected, discriminant.matrix);
    p.bias = centering_bias(train, p.matrix);
    p.method = ProjectionMethod::rs_lda;
    p.table_index = l;
    tables.push_back(std::move(p));
  }
  return tables;
}

void save_projections(const std::filesystem::path& path, const ProjectionSet& set) {
  json doc;
  doc["method"] = std::string(method_name(set.method));
  doc["d"] = set.d;
  doc["k"] = set.k;
  doc["L"] = set.n_tables;
  doc["seed"] = set.seed;
  json tables = json::array();
  for (const ProjectionMatrix& p : set.tables) {
    json t;
    t["matrix"] = p.matrix.data();  // row-major d*k
    t["bias"] = p.bias;
    tables.push_back(std::move(t));
  }
  doc["tables"] = std::move(tables);
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file: " + path.string());
  out << doc.dump() << '\n';
}

ProjectionSet load_projections(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ValidationError("projection file " + path.string() + ": " + e.what());
  }
  for (const char* key : {"method", "d", "k", "L", "seed", "tables"})
    if (!doc.contains(key))
      throw ValidationError("projection file " + path.string() + ": missing key '" + key + "'");

  ProjectionSet set;
  set.method = parse_method(doc["method"].get<std::string>());
  set.d = doc["d"].get<std::size_t>();
  set.k = doc["k"].get<std::size_t>();
  set.n_tables = doc["L"].get<std::size_t>();
  set.seed = doc["seed"].get<std::uint64_t>();
  if (set.d == 0 || set.k == 0)
    throw ValidationError("projection file " + path.string() + ": d and k must be positive");
  if (!doc["tables"].is_array() || doc["tables"].size() != set.n_tables)
    throw ValidationError("projection file " + path.string() + ": expected " +
                          std::to_string(set.n_tables) + " tables");

  std::size_t l = 0;
  for (const auto& t : doc["tables"]) {
    ++l;
    if (!t.contains("matrix") || !t.contains("bias"))
      throw ValidationError("projection file " + path.string() + ": table " + std::to_string(l) +
                            " needs matrix and bias");
    const auto values = t["matrix"].get<std::vector<double>>();
    const auto bias = t["bias"].get<std::vector<double>>();
    if (values.size() != set.d * set.k || bias.size() != set.k)
      throw ValidationError("projection file " + path.string() + ": table " + std::to_string(l) +
                            " has wrong matrix or bias size");
    ProjectionMatrix p;
    p.matrix = Matrix(set.d, set.k);
    p.matrix.data() = values;
    p.bias = bias;
    for (double v : values)
      if (!std::isfinite(v))
        throw ValidationError("projection file " + path.string() + ": non-finite matrix entry");
    for (double v : bias)
      if (!std::isfinite(v))
        throw ValidationError("projection file " + path.string() + ": non-finite bias entry");
    p.method = set.method;
    p.table_index = l;
    set.tables.push_back(std::move(p));
  }
  return set;
}

}  // namespace spklsh
