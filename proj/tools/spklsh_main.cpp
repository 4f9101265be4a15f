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
//
// spklsh command-line driver: synthesis, ingestion checks, projection
// builds, queries, task evaluation and parameter sweeps. Every command
// takes an explicit --seed and writes byte-reproducible primary outputs
// (timing columns excepted).

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spklsh/spklsh.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOpts {
  std::uint64_t seed = 0;
  std::string output;
  std::string format;  // csv | jsonl | "" (infer from extension)
};

spklsh::FileFormat resolve_format(const GlobalOpts& global, const fs::path& path) {
  if (!global.format.empty()) return spklsh::parse_format(global.format);
  return spklsh::format_from_extension(path);
}

fs::path require_output(const GlobalOpts& global) {
  if (global.output.empty())
    throw spklsh::ValidationError("an output path is required (use -o/--output)");
  return global.output;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw spklsh::ValidationError("cannot write file: " + path.string());
  return out;
}

template <typename T>
std::vector<T> parse_number_list(const std::string& text, const std::string& flag) {
  std::vector<T> values;
  for (std::string_view field : spklsh::split(text, ',')) {
    if (field.empty()) throw CLI::ValidationError(flag, "empty entry in list");
    T value{};
    auto res = std::from_chars(field.data(), field.data() + field.size(), value);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size())
      throw CLI::ValidationError(flag, "not a number: '" + std::string(field) + "'");
    values.push_back(value);
  }
  if (values.empty()) throw CLI::ValidationError(flag, "empty list");
  return values;
}

std::vector<std::string> parse_string_list(const std::string& text) {
  std::vector<std::string> values;
  for (std::string_view field : spklsh::split(text, ','))
    if (!field.empty()) values.emplace_back(field);
  return values;
}

// ---------------------------------------------------------------- synth

struct SynthOpts {
  std::size_t speakers = 0;
  std::size_t utts = 0;
  std::size_t dim = 0;
  double between_var = 1.0;
  double within_var = 0.1;
  std::string split_out;
  std::string split_task = "retrieval";
  std::size_t train_speakers = 0;
  std::size_t query_speakers = 10;
};

spklsh::SplitSpec make_retrieval_split(const spklsh::EmbeddingStore& store,
                                       std::size_t train_speakers, std::size_t query_speakers) {
  const auto speakers = store.speakers();
  if (train_speakers == 0 || train_speakers >= speakers.size())
    throw spklsh::ValidationError("--train-speakers must leave at least one evaluation speaker");
  spklsh::SplitSpec split;
  for (std::size_t s = 0; s < speakers.size(); ++s) {
    auto& bucket = (s < train_speakers) ? split.train : split.search_space;
    for (std::uint32_t pos : store.speaker_index().at(speakers[s]))
      bucket.push_back(store.record(pos).id);
  }
  const std::size_t n_eval = speakers.size() - train_speakers;
  const std::size_t n_queries = std::min(query_speakers, n_eval);
  for (std::size_t s = train_speakers; s < train_speakers + n_queries; ++s)
    split.queries.push_back(speakers[s]);
  return split;
}

spklsh::SplitSpec make_identification_split(const spklsh::EmbeddingStore& store,
                                            std::size_t train_speakers) {
  const auto speakers = store.speakers();
  if (train_speakers == 0 || train_speakers >= speakers.size())
    throw spklsh::ValidationError("--train-speakers must leave at least one evaluation speaker");
  spklsh::SplitSpec split;
  for (std::size_t s = 0; s < speakers.size(); ++s) {
    const auto& positions = store.speaker_index().at(speakers[s]);
    if (s < train_speakers) {
      for (std::uint32_t pos : positions) split.train.push_back(store.record(pos).id);
      continue;
    }
    if (positions.size() < 2)
      throw spklsh::ValidationError("identification split needs >= 2 utterances per evaluation "
                                    "speaker; '" + speakers[s] + "' has one");
    // Last utterance becomes the query; the rest form the speaker's
    // search-space representation.
    for (std::size_t i = 0; i + 1 < positions.size(); ++i)
      split.search_space.push_back(store.record(positions[i]).id);
    split.queries.push_back(store.record(positions.back()).id);
  }
  return split;
}

void run_synth(const GlobalOpts& global, const SynthOpts& opts) {
  spklsh::SynthesisParams params;
  params.n_speakers = opts.speakers;
  params.utts_per_speaker = opts.utts;
  params.dimension = opts.dim;
  params.between_var = opts.between_var;
  params.within_var = opts.within_var;
  params.seed = global.seed;
  const auto store = spklsh::EmbeddingStore::synthesize(params);

  const fs::path path = require_output(global);
  store.save(path, resolve_format(global, path));
  std::cout << "wrote " << store.size() << " records, " << store.speaker_count()
            << " speakers, dimension " << store.dimension() << " to " << path.string()
            << " (seed " << global.seed << ")\n";

  if (!opts.split_out.empty()) {
    spklsh::SplitSpec split;
    if (opts.split_task == "retrieval")
      split = make_retrieval_split(store, opts.train_speakers, opts.query_speakers);
    else if (opts.split_task == "identification")
      split = make_identification_split(store, opts.train_speakers);
    else
      throw spklsh::ValidationError("--split-task must be retrieval or identification");
    split.validate(store);
    split.save(opts.split_out);
    std::cout << "wrote split (" << split.train.size() << " train, " << split.search_space.size()
              << " search, " << split.queries.size() << " queries) to " << opts.split_out << "\n";
  }
}

// ---------------------------------------------------------- ingest-check

void run_ingest_check(const GlobalOpts& global, const std::string& file) {
  const fs::path path = file;
  const auto store = spklsh::EmbeddingStore::ingest(path, resolve_format(global, path));
  std::cout << "ok: " << store.size() << " records, " << store.speaker_count()
            << " speakers, dimension " << store.dimension() << "\n";
}

// ---------------------------------------------------------------- build

struct BuildOpts {
  std::string embeddings;
  std::string method;
  std::size_t k = 0;
  std::size_t n_tables = 0;
  std::size_t n_speakers = 0;  // 0 = default (d, clamped)
  std::size_t m_eigen = 0;     // 0 = default (min(100, d))
  std::optional<double> ridge;
  std::string split;
};

void run_build(const GlobalOpts& global, const BuildOpts& opts) {
  const fs::path embeddings_path = opts.embeddings;
  const auto store =
      spklsh::EmbeddingStore::ingest(embeddings_path, resolve_format(global, embeddings_path));

  std::optional<spklsh::EmbeddingStore> train;
  if (!opts.split.empty()) {
    const auto split = spklsh::SplitSpec::load(opts.split);
    split.validate(store);
    if (split.train.empty()) throw spklsh::ValidationError("split has an empty train set");
    train.emplace(store.subset(split.train));
  }
  const spklsh::EmbeddingStore& train_store = train ? *train : store;
  const std::size_t d = store.dimension();

  const auto method = spklsh::parse_method(opts.method);
  spklsh::ProjectionSet set;
  set.method = method;
  set.d = d;
  set.k = opts.k;
  set.n_tables = opts.n_tables;
  set.seed = global.seed;

  std::size_t n_speakers = opts.n_speakers;
  std::size_t m_eigen = opts.m_eigen;
  switch (method) {
    case spklsh::ProjectionMethod::lsh:
      set.tables = spklsh::gen_lsh(d, opts.k, opts.n_tables, global.seed);
      break;
    case spklsh::ProjectionMethod::rss: {
      if (n_speakers == 0) {
        n_speakers = d;
        if (n_speakers > train_store.speaker_count()) {
          n_speakers = train_store.speaker_count();
          std::cerr << "spklsh: warning: clamping N_s to the " << n_speakers
                    << " available training speakers\n";
        }
      }
      spklsh::RssConfig cfg;
      cfg.n_speakers = n_speakers;
      cfg.k = opts.k;
      cfg.n_tables = opts.n_tables;
      cfg.ridge = opts.ridge;
      cfg.seed = global.seed;
      set.tables = spklsh::gen_rss(train_store, cfg);
      break;
    }
    case spklsh::ProjectionMethod::rs_lda:
      if (m_eigen == 0) m_eigen = std::min<std::size_t>(100, d);
      set.tables =
          spklsh::gen_rs_lda(train_store, m_eigen, opts.k, opts.n_tables, opts.ridge, global.seed);
      break;
  }

  const fs::path out_path = require_output(global);
  spklsh::save_projections(out_path, set);

  json manifest;
  manifest["command"] = "build";
  manifest["method"] = opts.method;
  manifest["embeddings"] = opts.embeddings;
  manifest["d"] = d;
  manifest["k"] = opts.k;
  manifest["L"] = opts.n_tables;
  manifest["seed"] = global.seed;
  if (method == spklsh::ProjectionMethod::rss) manifest["n_speakers"] = n_speakers;
  if (method == spklsh::ProjectionMethod::rs_lda) manifest["m_eigen"] = m_eigen;
  if (opts.ridge) manifest["ridge"] = *opts.ridge;
  manifest["split"] = opts.split.empty() ? json() : json(opts.split);
  manifest["output"] = out_path.string();
  auto mout = open_output(out_path.string() + ".manifest.json");
  mout << manifest.dump(2) << '\n';

  std::cout << "wrote " << set.n_tables << " tables (method " << opts.method << ", k=" << opts.k
            << ", d=" << d << ") to " << out_path.string() << "\n";
}

// ---------------------------------------------------------------- query

struct QueryOpts {
  std::string embeddings;
  std::string projections;
  std::string split;
  std::string utterance_id;
  std::string speaker_id;
  bool linear = false;
  std::size_t top_n = 10;
};

void run_query(const GlobalOpts& global, const QueryOpts& opts) {
  const fs::path embeddings_path = opts.embeddings;
  const auto store =
      spklsh::EmbeddingStore::ingest(embeddings_path, resolve_format(global, embeddings_path));

  std::vector<std::string> subset;
  if (!opts.split.empty()) {
    const auto split = spklsh::SplitSpec::load(opts.split);
    split.validate(store);
    subset = split.search_space;
  }

  if (opts.utterance_id.empty() == opts.speaker_id.empty())
    throw spklsh::ValidationError("give exactly one of --id or --speaker");
  std::vector<double> query;
  if (!opts.utterance_id.empty()) {
    const auto v = store.vector(store.position_of(opts.utterance_id));
    query.assign(v.begin(), v.end());
  } else {
    query = store.speaker_centroid(opts.speaker_id);
  }

  spklsh::QueryResult result;
  if (opts.linear) {
    result = spklsh::linear_search(store, query, subset, opts.top_n);
  } else {
    if (opts.projections.empty())
      throw spklsh::ValidationError("a projection file is required unless --linear is given");
    auto set = spklsh::load_projections(opts.projections);
    if (set.d != store.dimension())
      throw spklsh::ValidationError("projection dimension " + std::to_string(set.d) +
                                    " does not match store dimension " +
                                    std::to_string(store.dimension()));
    const auto index = spklsh::HashIndex::build(store, std::move(set.tables), subset);
    result = index.query(query, opts.top_n);
  }

  const std::size_t corpus_size = subset.empty() ? store.size() : subset.size();
  for (std::size_t rank = 0; rank < result.ranked.size(); ++rank)
    std::cout << rank + 1 << '\t' << result.ranked[rank].id << '\t'
              << spklsh::format_double(result.ranked[rank].score) << '\n';
  std::cout << "candidates examined: " << result.candidates_examined << " / " << corpus_size
            << "\n";
  std::cout << "tables probed: " << result.tables_probed << "\n";
}

// ----------------------------------------------------------------- eval

struct EvalOpts {
  std::string embeddings;
  std::string task;
  std::string split;
  std::string projections;
  bool linear = false;
  std::string thresholds = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9";
};

void run_eval(const GlobalOpts& global, const EvalOpts& opts) {
  const fs::path embeddings_path = opts.embeddings;
  const auto store =
      spklsh::EmbeddingStore::ingest(embeddings_path, resolve_format(global, embeddings_path));
  const auto split = spklsh::SplitSpec::load(opts.split);
  split.validate(store);

  if (!opts.linear && opts.projections.empty())
    throw spklsh::ValidationError("give --projections or --linear");

  // Retrieval searches raw utterances; identification and the open-set
  // detector search one centroid per search-space speaker.
  std::optional<spklsh::EmbeddingStore> centroids;
  const spklsh::EmbeddingStore* entities = &store;
  std::vector<std::string> corpus_ids;
  if (opts.task == "retrieval") {
    corpus_ids = split.search_space;
  } else if (opts.task == "identification" || opts.task == "openset") {
    centroids = spklsh::speaker_centroid_store(store, split.search_space);
    entities = &*centroids;
  } else {
    throw spklsh::ValidationError("--task must be retrieval, identification or openset");
  }

  std::optional<spklsh::ProjectionSet> set;
  std::optional<spklsh::HashBackend> hash;
  if (!opts.projections.empty()) {
    set = spklsh::load_projections(opts.projections);
    if (set->d != store.dimension())
      throw spklsh::ValidationError("projection dimension " + std::to_string(set->d) +
                                    " does not match store dimension " +
                                    std::to_string(store.dimension()));
    hash.emplace(*entities, set->tables, corpus_ids);
  }
  const spklsh::LinearBackend linear(*entities, corpus_ids);

  const fs::path out_path = require_output(global);
  auto out = open_output(out_path);

  if (opts.task == "openset") {
    const auto thresholds = parse_number_list<double>(opts.thresholds, "--thresholds");
    const spklsh::SearchBackend& backend =
        hash ? static_cast<const spklsh::SearchBackend&>(*hash) : linear;
    const auto points = spklsh::openset_identification(backend, store, split, thresholds);
    out << "threshold,miss_rate,fa_rate\n";
    for (const auto& p : points)
      out << spklsh::format_double(p.threshold) << ',' << spklsh::format_double(p.miss_rate)
          << ',' << spklsh::format_double(p.fa_rate) << '\n';
    std::cout << "wrote " << points.size() << " operating points to " << out_path.string()
              << "\n";
    return;
  }

  std::vector<spklsh::EvalReport> reports;
  double linear_seconds = 0.0;
  if (opts.task == "retrieval") {
    auto lin = spklsh::retrieval_task(linear, store, split);
    linear_seconds = lin.mean_query_seconds;
    lin.report.relative_speed = 1.0;
    reports.push_back(lin.report);
    if (hash) {
      auto res = spklsh::retrieval_task(*hash, store, split);
      res.report.seed = set->seed;
      res.report.relative_speed =
          res.mean_query_seconds > 0.0 ? linear_seconds / res.mean_query_seconds : 1.0;
      reports.push_back(res.report);
    }
  } else {
    auto lin = spklsh::identification_task(linear, store, split);
    linear_seconds = lin.mean_query_seconds;
    lin.report.relative_speed = 1.0;
    reports.push_back(lin.report);
    if (hash) {
      auto res = spklsh::identification_task(*hash, store, split);
      res.report.seed = set->seed;
      res.report.relative_speed =
          res.mean_query_seconds > 0.0 ? linear_seconds / res.mean_query_seconds : 1.0;
      reports.push_back(res.report);
    }
  }
  spklsh::write_report_csv(out, reports);
  std::cout << "wrote " << reports.size() << " report rows to " << out_path.string() << "\n";
}

// ---------------------------------------------------------------- sweep

struct SweepOpts {
  std::string embeddings;
  std::string split;
  std::string methods = "lsh,rs-lda,rss";
  std::string k_values;
  std::string L_values;
  std::string seeds;
  std::string tasks = "retrieval,identification";
  std::size_t n_speakers = 0;
  std::size_t m_eigen = 0;
  std::optional<double> ridge;
};

void run_sweep(const GlobalOpts& global, const SweepOpts& opts) {
  const fs::path embeddings_path = opts.embeddings;
  const auto store =
      spklsh::EmbeddingStore::ingest(embeddings_path, resolve_format(global, embeddings_path));
  const auto split = spklsh::SplitSpec::load(opts.split);

  spklsh::SweepConfig cfg;
  for (const std::string& name : parse_string_list(opts.methods))
    cfg.methods.push_back(spklsh::parse_method(name));
  cfg.k_values = parse_number_list<std::size_t>(opts.k_values, "--k-values");
  cfg.L_values = parse_number_list<std::size_t>(opts.L_values, "--L-values");
  cfg.seeds = opts.seeds.empty() ? std::vector<std::uint64_t>{global.seed}
                                 : parse_number_list<std::uint64_t>(opts.seeds, "--seeds");
  cfg.tasks = parse_string_list(opts.tasks);
  cfg.rss_speakers = opts.n_speakers;
  cfg.m_eigen = opts.m_eigen;
  cfg.ridge = opts.ridge;

  const auto result = spklsh::sweep(store, split, cfg);

  const fs::path out_path = require_output(global);
  auto out = open_output(out_path);
  std::vector<spklsh::EvalReport> rows = result.linear_baselines;
  rows.insert(rows.end(), result.reports.begin(), result.reports.end());
  spklsh::write_report_csv(out, rows);
  std::cout << "wrote " << rows.size() << " report rows to " << out_path.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"speaker-embedding retrieval with multi-table sign-hash indexes"};
  app.require_subcommand(1);

  GlobalOpts global;
  app.add_option("--seed", global.seed, "seed for all derived randomness")->capture_default_str();
  app.add_option("-o,--output", global.output, "primary output path");
  app.add_option("--format", global.format, "embedding file format (csv or jsonl)")
      ->check(CLI::IsMember({"csv", "jsonl"}));

  SynthOpts synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic labeled embedding file");
  synth_cmd->fallthrough();
  synth_cmd->add_option("--speakers", synth.speakers, "speaker count")
      ->required()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--utts", synth.utts, "utterances per speaker")
      ->required()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--dim", synth.dim, "embedding dimension")
      ->required()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--between-var", synth.between_var, "speaker-mean variance")
      ->capture_default_str()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--within-var", synth.within_var, "within-speaker variance")
      ->capture_default_str()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--split-out", synth.split_out, "also write a split file here");
  synth_cmd->add_option("--split-task", synth.split_task,
                        "split layout: retrieval or identification")
      ->capture_default_str();
  synth_cmd->add_option("--train-speakers", synth.train_speakers,
                        "speakers reserved for projection training (with --split-out)");
  synth_cmd->add_option("--query-speakers", synth.query_speakers,
                        "query speakers in a retrieval split")->capture_default_str();
  synth_cmd->callback([&] { run_synth(global, synth); });

  std::string check_file;
  auto* check_cmd = app.add_subcommand("ingest-check", "validate an embedding file");
  check_cmd->fallthrough();
  check_cmd->add_option("file", check_file, "embedding file")->required();
  check_cmd->callback([&] { run_ingest_check(global, check_file); });

  BuildOpts build;
  auto* build_cmd = app.add_subcommand("build", "generate and serialize projection tables");
  build_cmd->fallthrough();
  build_cmd->add_option("--embeddings", build.embeddings, "embedding file")->required();
  build_cmd->add_option("--method", build.method, "lsh, rs-lda or rss")->required();
  build_cmd->add_option("--k", build.k, "hyperplanes per table")
      ->required()->check(CLI::PositiveNumber);
  build_cmd->add_option("--L", build.n_tables, "hash table count")
      ->required()->check(CLI::PositiveNumber);
  build_cmd->add_option("--ns", build.n_speakers, "speakers per rss table (default: dimension)");
  build_cmd->add_option("--m-eigen", build.m_eigen,
                        "eigenvectors kept per rs-lda table (default: min(100, d))");
  build_cmd->add_option("--ridge", build.ridge, "within-scatter ridge (default: trace-scaled)");
  build_cmd->add_option("--split", build.split, "split file; train set feeds rss / rs-lda");
  build_cmd->callback([&] { run_build(global, build); });

  QueryOpts query;
  auto* query_cmd = app.add_subcommand("query", "run one query against an index");
  query_cmd->fallthrough();
  query_cmd->add_option("--embeddings", query.embeddings, "embedding file")->required();
  query_cmd->add_option("--projections", query.projections, "projection file from build");
  query_cmd->add_option("--split", query.split, "restrict the corpus to the split's search space");
  query_cmd->add_option("--id", query.utterance_id, "query utterance id");
  query_cmd->add_option("--speaker", query.speaker_id, "query speaker id (centroid)");
  query_cmd->add_flag("--linear", query.linear, "exact linear search instead of the hash index");
  query_cmd->add_option("--top-n", query.top_n, "results to print")
      ->capture_default_str()->check(CLI::PositiveNumber);
  query_cmd->callback([&] { run_query(global, query); });

  EvalOpts eval;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate one task and write a report CSV");
  eval_cmd->fallthrough();
  eval_cmd->add_option("--embeddings", eval.embeddings, "embedding file")->required();
  eval_cmd->add_option("--task", eval.task, "retrieval, identification or openset")->required();
  eval_cmd->add_option("--split", eval.split, "split file")->required();
  eval_cmd->add_option("--projections", eval.projections, "projection file from build");
  eval_cmd->add_flag("--linear", eval.linear, "evaluate the linear baseline only");
  eval_cmd->add_option("--thresholds", eval.thresholds, "openset thresholds (comma list)")
      ->capture_default_str();
  eval_cmd->callback([&] { run_eval(global, eval); });

  SweepOpts sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "grid-sweep methods x k x L x seeds");
  sweep_cmd->fallthrough();
  sweep_cmd->add_option("--embeddings", sweep.embeddings, "embedding file")->required();
  sweep_cmd->add_option("--split", sweep.split, "split file")->required();
  sweep_cmd->add_option("--methods", sweep.methods, "comma list of lsh, rs-lda, rss")
      ->capture_default_str();
  sweep_cmd->add_option("--k-values", sweep.k_values, "comma list of k")->required();
  sweep_cmd->add_option("--L-values", sweep.L_values, "comma list of L")->required();
  sweep_cmd->add_option("--seeds", sweep.seeds, "comma list of seeds (default: --seed)");
  sweep_cmd->add_option("--tasks", sweep.tasks, "comma list of tasks")->capture_default_str();
  sweep_cmd->add_option("--ns", sweep.n_speakers, "speakers per rss table (default: dimension)");
  sweep_cmd->add_option("--m-eigen", sweep.m_eigen,
                        "eigenvectors kept per rs-lda table (default: min(100, d))");
  sweep_cmd->add_option("--ridge", sweep.ridge, "within-scatter ridge (default: trace-scaled)");
  sweep_cmd->callback([&] { run_sweep(global, sweep); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const spklsh::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
