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
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "spklsh/embedding_store.hpp"
#include "spklsh/hash_index.hpp"
#include "spklsh/projections.hpp"

namespace spklsh {

/// One verification trial. An absent score means the item never surfaced
/// in the candidate set (it is rejected at every threshold).
struct Trial {
  std::string query_id;
  std::string item_id;
  bool target = false;
  std::optional<double> score;
};

/// One metric of one run; a CSV row.
struct EvalReport {
  std::string method;  ///< linear | lsh | rs-lda | rss
  std::string task;    ///< retrieval | identification | openset
  std::size_t k = 0;
  std::size_t n_tables = 0;
  std::uint64_t seed = 0;
  std::string metric_name;  ///< eer_percent | accuracy_percent | miss_rate | fa_rate | hamming_ratio
  double metric_value = 0.0;
  double mean_candidates = 0.0;
  double relative_speed = 1.0;  ///< linear search's own value is 1.0 by definition
};

/// `method,task,k,L,seed,metric_name,metric_value,mean_candidates,relative_speed`
/// with a header row. All but relative_speed are reproducible byte for
/// byte under a fixed seed.
void write_report_csv(std::ostream& out, std::span<const EvalReport> reports);

/// Equal error rate in percent.
///
/// Operating points are taken at every distinct observed score (accept
/// iff score >= threshold) plus the reject-all point; the crossing of the
/// false-acceptance and false-rejection rates is located by linear
/// interpolation between the two bracketing points. Unretrieved trials
/// count as rejected at every threshold. If the rejection rate exceeds
/// the acceptance rate already at the most liberal threshold (no
/// crossing), the midpoint of the two rates at that point is returned.
double eer_percent(std::span<const Trial> trials);

/// Scoring backend the task protocols run against: either exact linear
/// search or the multi-table hash index.
class SearchBackend {
 public:
  virtual ~SearchBackend() = default;
  virtual QueryResult search(std::span<const double> q, std::size_t top_n) const = 0;
  /// The entities being searched (utterances or speaker centroids).
  virtual const EmbeddingStore& corpus() const = 0;
  virtual std::span<const std::uint32_t> corpus_positions() const = 0;
  virtual std::string method_tag() const = 0;
  virtual std::size_t bits() const = 0;     ///< k; 0 for linear
  virtual std::size_t tables() const = 0;   ///< L; 0 for linear
};

class LinearBackend final : public SearchBackend {
 public:
  explicit LinearBackend(const EmbeddingStore& store,
                         std::span<const std::string> subset_ids = {});

  QueryResult search(std::span<const double> q, std::size_t top_n) const override;
  const EmbeddingStore& corpus() const override { return *store_; }
  std::span<const std::uint32_t> corpus_positions() const override { return positions_; }
  std::string method_tag() const override { return "linear"; }
  std::size_t bits() const override { return 0; }
  std::size_t tables() const override { return 0; }

 private:
  const EmbeddingStore* store_;
  std::vector<std::uint32_t> positions_;
};

class HashBackend final : public SearchBackend {
 public:
  HashBackend(const EmbeddingStore& store, std::vector<ProjectionMatrix> projections,
              std::span<const std::string> subset_ids = {});

  QueryResult search(std::span<const double> q, std::size_t top_n) const override;
  const EmbeddingStore& corpus() const override { return index_.store(); }
  std::span<const std::uint32_t> corpus_positions() const override {
    return index_.indexed_positions();
  }
  std::string method_tag() const override;
  std::size_t bits() const override;
  std::size_t tables() const override { return index_.table_count(); }
  const HashIndex& index() const { return index_; }

 private:
  HashIndex index_;
};

/// Full-combination 1-to-N verification: split.queries name speakers
/// (an utterance id stands for its speaker), whose centroid
/// representations are run against every indexed item; every
/// (query, item) pair becomes a Trial and the report carries the EER.
/// Requires the backend to search `store` itself.
struct RetrievalOutcome {
  std::vector<Trial> trials;
  EvalReport report;
  double mean_query_seconds = 0.0;
};
RetrievalOutcome retrieval_task(const SearchBackend& backend, const EmbeddingStore& store,
                                const SplitSpec& split);

/// Closed-set identification: split.queries name utterances of `store`,
/// the backend searches speaker representations, and accuracy is the
/// fraction of queries whose top-1 entity has the query's speaker.
/// Queries with an empty candidate set count as errors; queries whose
/// speaker is absent from the backend corpus violate the closed-set
/// premise and raise a ValidationError naming them.
struct IdentificationOutcome {
  EvalReport report;
  std::size_t correct = 0;
  std::size_t total = 0;
  double mean_query_seconds = 0.0;
};
IdentificationOutcome identification_task(const SearchBackend& backend,
                                          const EmbeddingStore& store, const SplitSpec& split);

/// Top-1 detector sweep: at threshold t an in-set query misses when its
/// top-1 is the wrong speaker or scores below t; an out-of-set query
/// false-alarms when its top-1 scores at or above t.
struct OpensetPoint {
  double threshold = 0.0;
  double miss_rate = 0.0;
  double fa_rate = 0.0;
};
std::vector<OpensetPoint> openset_identification(const SearchBackend& backend,
                                                 const EmbeddingStore& store,
                                                 const SplitSpec& split,
                                                 std::span<const double> thresholds);

/// Mean same-speaker Hamming distance divided by mean different-speaker
/// Hamming distance, each averaged over all tables, over `sample_pairs`
/// seeded random pairs per group. Lower means a more identity-preserving
/// hash. Requires at least two speakers with two utterances each.
double hamming_ratio(const EmbeddingStore& store, std::span<const ProjectionMatrix> projections,
                     std::size_t sample_pairs, std::uint64_t seed);

/// Grid sweep over methods x k x L x seeds for the named tasks.
struct SweepConfig {
  std::vector<ProjectionMethod> methods;
  std::vector<std::size_t> k_values;
  std::vector<std::size_t> L_values;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> tasks = {"retrieval", "identification"};
  /// Speakers per RSS table; 0 picks the embedding dimension, clamped to
  /// the available training speakers with a warning.
  std::size_t rss_speakers = 0;
  /// PCA eigenvectors kept per rs-lda table; 0 picks min(100, d).
  std::size_t m_eigen = 0;
  std::optional<double> ridge;
};
struct SweepResult {
  /// One report per (method, k, L, seed, task), sorted by those fields.
  std::vector<EvalReport> reports;
  /// One linear-search baseline per task, relative_speed 1.0.
  std::vector<EvalReport> linear_baselines;
};
SweepResult sweep(const EmbeddingStore& store, const SplitSpec& split, const SweepConfig& cfg);

}  // namespace spklsh
