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

#include "spklsh/embedding_store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "spklsh/error.hpp"
#include "spklsh/matrix.hpp"
#include "spklsh/prng.hpp"
#include "spklsh/text.hpp"

namespace spklsh {

namespace {

using nlohmann::json;

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file: " + path.string());
  return out;
}

std::string zero_padded(std::size_t value, std::size_t width) {
  std::string s = std::to_string(value);
  if (s.size() < width) s.insert(s.begin(), width - s.size(), '0');
  return s;
}

std::vector<Embedding> read_csv(std::istream& in) {
  std::vector<Embedding> records;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = strip_cr(raw);
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() < 3)
      throw ValidationError("csv line " + std::to_string(line_no) +
                            ": expected id,speaker,v0,... (got " +
                            std::to_string(fields.size()) + " fields)");
    Embedding rec;
    rec.id = std::string(fields[0]);
    rec.speaker = std::string(fields[1]);
    rec.vector.reserve(fields.size() - 2);
    for (std::size_t i = 2; i < fields.size(); ++i) {
      double v;
      if (!parse_double(fields[i], v))
        throw ValidationError("csv line " + std::to_string(line_no) + " (id '" + rec.id +
                              "'): malformed number '" + std::string(fields[i]) + "'");
      rec.vector.push_back(v);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<Embedding> read_jsonl(std::istream& in) {
  std::vector<Embedding> records;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = strip_cr(raw);
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError("jsonl line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.is_object() || !obj.contains("id") || !obj.contains("speaker") ||
        !obj.contains("vector") || !obj["id"].is_string() || !obj["speaker"].is_string() ||
        !obj["vector"].is_array())
      throw ValidationError("jsonl line " + std::to_string(line_no) +
                            ": expected object with id, speaker, vector");
    Embedding rec;
    rec.id = obj["id"].get<std::string>();
    rec.speaker = obj["speaker"].get<std::string>();
    for (const auto& v : obj["vector"]) {
      if (!v.is_number())
        throw ValidationError("jsonl line " + std::to_string(line_no) + " (id '" + rec.id +
                              "'): vector entries must be numbers");
      rec.vector.push_back(v.get<double>());
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace

FileFormat parse_format(std::string_view name) {
  if (name == "csv") return FileFormat::csv;
  if (name == "jsonl") return FileFormat::jsonl;
  throw ValidationError("unknown format '" + std::string(name) + "' (expected csv or jsonl)");
}

std::string_view format_name(FileFormat format) {
  return format == FileFormat::csv ? "csv" : "jsonl";
}

FileFormat format_from_extension(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".csv") return FileFormat::csv;
  if (ext == ".jsonl") return FileFormat::jsonl;
  throw ValidationError("cannot infer format from extension of '" + path.string() +
                        "' (use --format)");
}

EmbeddingStore::EmbeddingStore(std::size_t dimension, std::vector<Embedding> records)
    : dimension_(dimension), records_(std::move(records)) {
  if (dimension_ == 0) throw ValidationError("store dimension must be positive");
  id_to_pos_.reserve(records_.size());
  for (std::size_t pos = 0; pos < records_.size(); ++pos) {
    const Embedding& rec = records_[pos];
    if (rec.vector.size() != dimension_)
      throw ValidationError("record '" + rec.id + "' has dimension " +
                            std::to_string(rec.vector.size()) + ", store expects " +
                            std::to_string(dimension_));
    for (double v : rec.vector)
      if (!std::isfinite(v))
        throw ValidationError("record '" + rec.id + "' contains a non-finite value");
    if (!id_to_pos_.emplace(rec.id, static_cast<std::uint32_t>(pos)).second)
      throw ValidationError("duplicate id '" + rec.id + "'");
    speaker_index_[rec.speaker].push_back(static_cast<std::uint32_t>(pos));
  }
}

EmbeddingStore EmbeddingStore::ingest(const std::filesystem::path& path, FileFormat format) {
  auto in = open_input(path);
  std::vector<Embedding> records =
      format == FileFormat::csv ? read_csv(in) : read_jsonl(in);
  if (records.empty()) throw ValidationError("no records in " + path.string());
  const std::size_t dimension = records.front().vector.size();
  return EmbeddingStore(dimension, std::move(records));
}

EmbeddingStore EmbeddingStore::synthesize(const SynthesisParams& p) {
  if (p.n_speakers == 0 || p.utts_per_speaker == 0 || p.dimension == 0)
    throw ValidationError("synthesize: speaker, utterance and dimension counts must be positive");
  if (p.between_var <= 0.0 || p.within_var <= 0.0)
    throw ValidationError("synthesize: variances must be positive");

  const double between_sd = std::sqrt(p.between_var);
  const double within_sd = std::sqrt(p.within_var);
  const std::size_t spk_width = std::to_string(p.n_speakers).size();
  const std::size_t utt_width = std::to_string(p.utts_per_speaker).size();

  std::vector<Embedding> records;
  records.reserve(p.n_speakers * p.utts_per_speaker);
  std::vector<double> mean(p.dimension);
  for (std::size_t s = 0; s < p.n_speakers; ++s) {
    auto rng = make_engine(p.seed, s);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double& m : mean) m = between_sd * gauss(rng);
    const std::string speaker = "spk" + zero_padded(s + 1, spk_width);
    for (std::size_t u = 0; u < p.utts_per_speaker; ++u) {
      Embedding rec;
      rec.speaker = speaker;
      rec.id = speaker + "_utt" + zero_padded(u + 1, utt_width);
      rec.vector.resize(p.dimension);
      for (std::size_t i = 0; i < p.dimension; ++i)
        rec.vector[i] = mean[i] + within_sd * gauss(rng);
      records.push_back(std::move(rec));
    }
  }
  return EmbeddingStore(p.dimension, std::move(records));
}

void EmbeddingStore::save(const std::filesystem::path& path, FileFormat format) const {
  auto out = open_output(path);
  if (format == FileFormat::csv) {
    for (const Embedding& rec : records_) {
      out << rec.id << ',' << rec.speaker;
      for (double v : rec.vector) out << ',' << format_double(v);
      out << '\n';
    }
  } else {
    for (const Embedding& rec : records_) {
      json obj;
      obj["id"] = rec.id;
      obj["speaker"] = rec.speaker;
      obj["vector"] = rec.vector;
      out << obj.dump() << '\n';
    }
  }
  if (!out) throw ValidationError("write failed: " + path.string());
}

std::size_t EmbeddingStore::position_of(const std::string& id) const {
  auto it = id_to_pos_.find(id);
  if (it == id_to_pos_.end()) throw ValidationError("unknown utterance id '" + id + "'");
  return it->second;
}

std::vector<std::string> EmbeddingStore::speakers() const {
  std::vector<std::string> out;
  out.reserve(speaker_index_.size());
  for (const auto& [speaker, positions] : speaker_index_) out.push_back(speaker);
  return out;
}

std::vector<double> EmbeddingStore::speaker_centroid(const std::string& speaker) const {
  auto it = speaker_index_.find(speaker);
  if (it == speaker_index_.end())
    throw ValidationError("unknown speaker '" + speaker + "'");
  std::vector<double> centroid(dimension_, 0.0);
  for (std::uint32_t pos : it->second) {
    const auto& v = records_[pos].vector;
    for (std::size_t i = 0; i < dimension_; ++i) centroid[i] += v[i];
  }
  for (double& c : centroid) c /= static_cast<double>(it->second.size());
  normalize(centroid);
  return centroid;
}

EmbeddingStore EmbeddingStore::subset(std::span<const std::string> ids) const {
  std::vector<std::uint32_t> positions;
  positions.reserve(ids.size());
  for (const auto& id : ids) positions.push_back(static_cast<std::uint32_t>(position_of(id)));
  std::sort(positions.begin(), positions.end());
  std::vector<Embedding> records;
  records.reserve(positions.size());
  for (std::uint32_t pos : positions) records.push_back(records_[pos]);
  return EmbeddingStore(dimension_, std::move(records));
}

EmbeddingStore speaker_centroid_store(const EmbeddingStore& store,
                                      std::span<const std::string> utterance_ids) {
  std::map<std::string, std::pair<std::vector<double>, std::size_t>> sums;
  auto add = [&](std::size_t pos) {
    const Embedding& rec = store.record(pos);
    auto [it, inserted] =
        sums.try_emplace(rec.speaker, std::vector<double>(store.dimension(), 0.0), 0);
    for (std::size_t i = 0; i < store.dimension(); ++i) it->second.first[i] += rec.vector[i];
    ++it->second.second;
  };
  if (utterance_ids.empty()) {
    for (std::size_t pos = 0; pos < store.size(); ++pos) add(pos);
  } else {
    for (const auto& id : utterance_ids) add(store.position_of(id));
  }
  if (sums.empty()) throw ValidationError("speaker_centroid_store: no records selected");

  std::vector<Embedding> records;
  records.reserve(sums.size());
  for (auto& [speaker, sum_count] : sums) {
    Embedding rec;
    rec.id = speaker;
    rec.speaker = speaker;
    rec.vector = std::move(sum_count.first);
    for (double& v : rec.vector) v /= static_cast<double>(sum_count.second);
    normalize(rec.vector);
    records.push_back(std::move(rec));
  }
  return EmbeddingStore(store.dimension(), std::move(records));
}

SplitSpec SplitSpec::load(const std::filesystem::path& path) {
  auto in = open_input(path);
  json obj;
  try {
    in >> obj;
  } catch (const json::parse_error& e) {
    throw ValidationError("split file " + path.string() + ": " + e.what());
  }
  auto read_list = [&](const char* key) {
    if (!obj.contains(key) || !obj[key].is_array())
      throw ValidationError("split file " + path.string() + ": missing array '" + key + "'");
    std::vector<std::string> out;
    for (const auto& v : obj[key]) {
      if (!v.is_string())
        throw ValidationError("split file " + path.string() + ": '" + key +
                              "' entries must be strings");
      out.push_back(v.get<std::string>());
    }
    return out;
  };
  SplitSpec split;
  split.train = read_list("train");
  split.search_space = read_list("search_space");
  split.queries = read_list("queries");
  return split;
}

void SplitSpec::save(const std::filesystem::path& path) const {
  json obj;
  obj["train"] = train;
  obj["search_space"] = search_space;
  obj["queries"] = queries;
  auto out = open_output(path);
  out << obj.dump(2) << '\n';
}

void SplitSpec::validate(const EmbeddingStore& store) const {
  std::unordered_set<std::string> seen;
  auto check_utterances = [&](const std::vector<std::string>& ids, const char* name) {
    for (const auto& id : ids) {
      if (!store.contains(id))
        throw ValidationError(std::string("split ") + name + ": unknown utterance id '" + id +
                              "'");
      if (!seen.insert(id).second)
        throw ValidationError(std::string("split ") + name + ": id '" + id +
                              "' appears in more than one set");
    }
  };
  check_utterances(train, "train");
  check_utterances(search_space, "search_space");
  for (const auto& id : queries) {
    if (store.contains(id)) {
      if (!seen.insert(id).second)
        throw ValidationError("split queries: id '" + id + "' appears in more than one set");
    } else if (!store.has_speaker(id)) {
      throw ValidationError("split queries: '" + id +
                            "' is neither an utterance id nor a speaker id");
    }
  }
}

}  // namespace spklsh
