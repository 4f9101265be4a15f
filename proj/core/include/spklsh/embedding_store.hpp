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
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace spklsh {

/// One speaker-labeled embedding vector; the atom of indexing and scoring.
struct Embedding {
  std::string id;       ///< unique utterance identifier
  std::string speaker;  ///< speaker identifier
  std::vector<double> vector;

  bool operator==(const Embedding&) const = default;
};

enum class FileFormat { csv, jsonl };

/// Parses "csv" / "jsonl"; throws ValidationError otherwise.
FileFormat parse_format(std::string_view name);
std::string_view format_name(FileFormat format);
/// Infers the format from a .csv / .jsonl extension.
FileFormat format_from_extension(const std::filesystem::path& path);

struct SynthesisParams {
  std::size_t n_speakers = 0;
  std::size_t utts_per_speaker = 0;
  std::size_t dimension = 0;
  double between_var = 1.0;  ///< variance of speaker means around the origin
  double within_var = 0.1;   ///< variance of utterances around their speaker mean
  std::uint64_t seed = 0;
};

/// Immutable collection of embeddings with a speaker index. Safe for
/// concurrent reads after construction.
///
/// Invariants enforced at construction: every vector has the declared
/// dimension, contains only finite values, and ids are unique.
class EmbeddingStore {
 public:
  EmbeddingStore(std::size_t dimension, std::vector<Embedding> records);

  /// Reads a file in the named format. CSV lines are
  /// `id,speaker,v0,...,v{d-1}` with no header; JSONL lines are objects
  /// with keys "id", "speaker", "vector". Dimension comes from the first
  /// record.
  static EmbeddingStore ingest(const std::filesystem::path& path, FileFormat format);

  /// Isotropic-Gaussian speaker clusters: means ~ N(0, between_var*I),
  /// utterances ~ N(mean, within_var*I). Deterministic per seed.
  static EmbeddingStore synthesize(const SynthesisParams& params);

  void save(const std::filesystem::path& path, FileFormat format) const;

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return records_.size(); }
  const Embedding& record(std::size_t pos) const { return records_[pos]; }
  std::span<const double> vector(std::size_t pos) const { return records_[pos].vector; }

  bool contains(const std::string& id) const { return id_to_pos_.contains(id); }
  /// Throws ValidationError for unknown ids.
  std::size_t position_of(const std::string& id) const;

  bool has_speaker(const std::string& speaker) const { return speaker_index_.contains(speaker); }
  std::size_t speaker_count() const { return speaker_index_.size(); }
  /// Sorted speaker ids.
  std::vector<std::string> speakers() const;
  /// Record positions per speaker, in store order.
  const std::map<std::string, std::vector<std::uint32_t>>& speaker_index() const {
    return speaker_index_;
  }

  /// Mean of the speaker's vectors, length-normalized to unit norm.
  std::vector<double> speaker_centroid(const std::string& speaker) const;

  /// Sub-store with the given utterance ids, kept in store order.
  EmbeddingStore subset(std::span<const std::string> ids) const;

  bool operator==(const EmbeddingStore& other) const {
    return dimension_ == other.dimension_ && records_ == other.records_;
  }

 private:
  std::size_t dimension_ = 0;
  std::vector<Embedding> records_;
  std::unordered_map<std::string, std::uint32_t> id_to_pos_;
  std::map<std::string, std::vector<std::uint32_t>> speaker_index_;
};

/// One record per speaker: id = speaker = speaker id, vector = centroid of
/// that speaker's vectors among `utterance_ids` (all store records when
/// empty). Records ordered by speaker id.
EmbeddingStore speaker_centroid_store(const EmbeddingStore& store,
                                      std::span<const std::string> utterance_ids);

/// Dataset split: which utterances train the projections, which form the
/// search space, and which ids (utterance or speaker, task-dependent)
/// serve as queries.
struct SplitSpec {
  std::vector<std::string> train;
  std::vector<std::string> search_space;
  std::vector<std::string> queries;

  static SplitSpec load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Checks pairwise disjointness at the utterance level, no duplicates,
  /// and that every id names an utterance (queries: utterance or speaker).
  void validate(const EmbeddingStore& store) const;
};

}  // namespace spklsh
