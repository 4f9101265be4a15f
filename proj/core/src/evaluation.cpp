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

#include "spklsh/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <iostream>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "spklsh/error.hpp"
#include "spklsh/matrix.hpp"
#include "spklsh/prng.hpp"
#include "spklsh/text.hpp"

namespace spklsh {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::uint32_t> resolve_positions(const EmbeddingStore& store,
                                             std::span<const std::string> subset_ids) {
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
  return positions;
}

}  // namespace

void write_report_csv(std::ostream& out, std::span<const EvalReport> reports) {
  out << "method,task,k,L,seed,metric_name,metric_value,mean_candidates,relative_speed\n";
  for (const EvalReport& r : reports) {
    out << r.method << ',' << r.task << ',' << r.k << ',' << r.n_tables << ',' << r.seed << ','
        << r.metric_name << ',' << format_double(r.metric_value) << ','
        << format_double(r.mean_candidates) << ',' << format_double(r.relative_speed) << '\n';
  }
}

double eer_percent(std::span<const Trial> trials) {
  std::vector<double> target_scores;
  std::vector<double> nontarget_scores;
  std::size_t unretrieved_targets = 0;
  std::size_t unretrieved_nontargets = 0;
  for (const Trial& t : trials) {
    if (t.score && !(*t.score >= -1.0 && *t.score <= 1.0))  // also rejects NaN
      throw ValidationError("eer: score outside [-1, 1] for trial '" + t.query_id + "'/'" +
                            t.item_id + "'");
    if (t.target) {
      if (t.score) target_scores.push_back(*t.score); else ++unretrieved_targets;
    } else {
      if (t.score) nontarget_scores.push_back(*t.score); else ++unretrieved_nontargets;
    }
  }
  const std::size_t n_targets = target_scores.size() + unretrieved_targets;
  const std::size_t n_nontargets = nontarget_scores.size() + unretrieved_nontargets;
  if (n_targets == 0) throw ValidationError("eer: no target trials");
  if (n_nontargets == 0) throw ValidationError("eer: no non-target trials");

  std::sort(target_scores.begin(), target_scores.end());
  std::sort(nontarget_scores.begin(), nontarget_scores.end());

  // Operating points at each distinct observed score (accept iff
  // score >= threshold), plus the reject-all point.
  std::vector<double> thresholds;
  thresholds.reserve(target_scores.size() + nontarget_scores.size());
  std::merge(target_scores.begin(), target_scores.end(), nontarget_scores.begin(),
             nontarget_scores.end(), std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  auto rates_at = [&](double threshold, bool reject_all) {
    std::size_t accepted_nontargets = 0;
    std::size_t rejected_targets = target_scores.size();
    if (!reject_all) {
      accepted_nontargets =
          nontarget_scores.end() -
          std::lower_bound(nontarget_scores.begin(), nontarget_scores.end(), threshold);
      rejected_targets =
          std::lower_bound(target_scores.begin(), target_scores.end(), threshold) -
          target_scores.begin();
    }
    const double far = static_cast<double>(accepted_nontargets) / n_nontargets;
    const double frr =
        static_cast<double>(rejected_targets + unretrieved_targets) / n_targets;
    return std::pair{far, frr};
  };

  double prev_far = 0.0, prev_frr = 0.0, prev_diff = 0.0;
  bool have_prev = false;
  const std::size_t n_points = thresholds.size() + 1;
  for (std::size_t i = 0; i < n_points; ++i) {
    const bool reject_all = (i == thresholds.size());
    const auto [far, frr] = rates_at(reject_all ? 0.0 : thresholds[i], reject_all);
    const double diff = far - frr;
    if (diff <= 0.0) {
      if (diff == 0.0 || !have_prev) return 100.0 * 0.5 * (far + frr);
      // Linear interpolation between the bracketing operating points.
      const double alpha = prev_diff / (prev_diff - diff);
      const double far_star = prev_far + alpha * (far - prev_far);
      const double frr_star = prev_frr + alpha * (frr - prev_frr);
      return 100.0 * 0.5 * (far_star + frr_star);
    }
    prev_far = far;
    prev_frr = frr;
    prev_diff = diff;
    have_prev = true;
  }
  // Unreachable: the reject-all point has far=0, frr=1.
  return 100.0 * 0.5 * (prev_far + prev_frr);
}

LinearBackend::LinearBackend(const EmbeddingStore& store,
                             std::span<const std::string> subset_ids)
    : store_(&store), positions_(resolve_positions(store, subset_ids)) {
  if (positions_.empty()) throw ValidationError("linear backend: empty corpus");
}

QueryResult LinearBackend::search(std::span<const double> q, std::size_t top_n) const {
  if (q.size() != store_->dimension())
    throw ValidationError("linear search: query dimension mismatch");
  QueryResult out;
  out.candidates_examined = positions_.size();
  out.tables_probed = 0;
  out.ranked.reserve(positions_.size());
  for (std::uint32_t pos : positions_)
    out.ranked.push_back(
        ScoredItem{store_->record(pos).id, cosine_similarity(q, store_->vector(pos))});
  std::sort(out.ranked.begin(), out.ranked.end(), [](const ScoredItem& a, const ScoredItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  if (out.ranked.size() > top_n) out.ranked.resize(top_n);
  return out;
}

HashBackend::HashBackend(const EmbeddingStore& store, std::vector<ProjectionMatrix> projections,
                         std::span<const std::string> subset_ids)
    : index_(HashIndex::build(store, std::move(projections), subset_ids)) {}

QueryResult HashBackend::search(std::span<const double> q, std::size_t top_n) const {
  return index_.query(q, top_n);
}

std::string HashBackend::method_tag() const {
  if (index_.projections().empty()) return "lsh";
  return std::string(method_name(index_.projections().front().method));
}

std::size_t HashBackend::bits() const {
  return index_.projections().empty() ? 0 : index_.projections().front().bits();
}

RetrievalOutcome retrieval_task(const SearchBackend& backend, const EmbeddingStore& store,
                                const SplitSpec& split) {
  if (&backend.corpus() != &store)
    throw ValidationError("retrieval_task: backend must search the utterance store itself");
  if (split.queries.empty()) throw ValidationError("retrieval_task: no queries in split");
  const auto items = backend.corpus_positions();
  if (items.empty()) throw ValidationError("retrieval_task: empty search space");

  RetrievalOutcome outcome;
  outcome.trials.reserve(split.queries.size() * items.size());
  double total_seconds = 0.0;
  double total_candidates = 0.0;

  for (const std::string& query_id : split.queries) {
    // Query entries name speakers; an utterance id stands for its speaker.
    std::string speaker;
    if (store.has_speaker(query_id)) {
      speaker = query_id;
    } else if (store.contains(query_id)) {
      speaker = store.record(store.position_of(query_id)).speaker;
    } else {
      throw ValidationError("retrieval_task: query '" + query_id +
                            "' is neither a speaker nor an utterance id");
    }
    const std::vector<double> query = store.speaker_centroid(speaker);
    const auto start = Clock::now();
    const QueryResult result = backend.search(query, items.size());
    total_seconds += seconds_since(start);
    total_candidates += static_cast<double>(result.candidates_examined);

    std::unordered_map<std::string_view, double> scores;
    scores.reserve(result.ranked.size());
    for (const ScoredItem& item : result.ranked) scores.emplace(item.id, item.score);

    for (std::uint32_t pos : items) {
      const Embedding& rec = store.record(pos);
      Trial trial;
      trial.query_id = query_id;
      trial.item_id = rec.id;
      trial.target = (rec.speaker == speaker);
      if (auto it = scores.find(rec.id); it != scores.end()) trial.score = it->second;
      outcome.trials.push_back(std::move(trial));
    }
  }

  outcome.report.method = backend.method_tag();
  outcome.report.task = "retrieval";
  outcome.report.k = backend.bits();
  outcome.report.n_tables = backend.tables();
  outcome.report.metric_name = "eer_percent";
  outcome.report.metric_value = eer_percent(outcome.trials);
  outcome.report.mean_candidates = total_candidates / static_cast<double>(split.queries.size());
  outcome.mean_query_seconds = total_seconds / static_cast<double>(split.queries.size());
  return outcome;
}

IdentificationOutcome identification_task(const SearchBackend& backend,
                                          const EmbeddingStore& store, const SplitSpec& split) {
  if (split.queries.empty()) throw ValidationError("identification_task: no queries in split");
  const EmbeddingStore& corpus = backend.corpus();

  std::unordered_set<std::string> corpus_speakers;
  for (std::uint32_t pos : backend.corpus_positions())
    corpus_speakers.insert(corpus.record(pos).speaker);

  std::vector<std::string> missing;
  for (const std::string& id : split.queries) {
    const Embedding& rec = store.record(store.position_of(id));
    if (!corpus_speakers.contains(rec.speaker)) missing.push_back(id);
  }
  if (!missing.empty()) {
    std::string msg = "identification_task: closed-set premise violated; query speakers missing "
                      "from the search space for: ";
    for (std::size_t i = 0; i < missing.size() && i < 8; ++i) {
      if (i) msg += ", ";
      msg += "'" + missing[i] + "'";
    }
    if (missing.size() > 8) msg += ", and " + std::to_string(missing.size() - 8) + " more";
    throw ValidationError(msg);
  }

  IdentificationOutcome outcome;
  outcome.total = split.queries.size();
  double total_seconds = 0.0;
  double total_candidates = 0.0;
  for (const std::string& id : split.queries) {
    const std::size_t pos = store.position_of(id);
    const auto start = Clock::now();
    const QueryResult result = backend.search(store.vector(pos), 1);
    total_seconds += seconds_since(start);
    total_candidates += static_cast<double>(result.candidates_examined);
    if (result.ranked.empty()) continue;  // nothing surfaced: an error
    const Embedding& top = corpus.record(corpus.position_of(result.ranked.front().id));
    if (top.speaker == store.record(pos).speaker) ++outcome.correct;
  }

  outcome.report.method = backend.method_tag();
  outcome.report.task = "identification";
  outcome.report.k = backend.bits();
  outcome.report.n_tables = backend.tables();
  outcome.report.metric_name = "accuracy_percent";
  outcome.report.metric_value =
      100.0 * static_cast<double>(outcome.correct) / static_cast<double>(outcome.total);
  outcome.report.mean_candidates = total_candidates / static_cast<double>(outcome.total);
  outcome.mean_query_seconds = total_seconds / static_cast<double>(outcome.total);
  return outcome;
}

std::vector<OpensetPoint> openset_identification(const SearchBackend& backend,
                                                 const EmbeddingStore& store,
                                                 const SplitSpec& split,
                                                 std::span<const double> thresholds) {
  if (split.queries.empty()) throw ValidationError("openset: no queries in split");
  if (thresholds.empty()) throw ValidationError("openset: no thresholds");
  const EmbeddingStore& corpus = backend.corpus();

  std::unordered_set<std::string> corpus_speakers;
  for (std::uint32_t pos : backend.corpus_positions())
    corpus_speakers.insert(corpus.record(pos).speaker);

  struct Top1 {
    bool in_set = false;
    bool retrieved = false;
    bool correct_speaker = false;
    double score = 0.0;
  };
  std::vector<Top1> tops;
  tops.reserve(split.queries.size());
  std::size_t n_in = 0, n_out = 0;
  for (const std::string& id : split.queries) {
    const std::size_t pos = store.position_of(id);
    const Embedding& rec = store.record(pos);
    Top1 t;
    t.in_set = corpus_speakers.contains(rec.speaker);
    t.in_set ? ++n_in : ++n_out;
    const QueryResult result = backend.search(store.vector(pos), 1);
    if (!result.ranked.empty()) {
      t.retrieved = true;
      t.score = result.ranked.front().score;
      const Embedding& top = corpus.record(corpus.position_of(result.ranked.front().id));
      t.correct_speaker = (top.speaker == rec.speaker);
    }
    tops.push_back(t);
  }
  if (n_out == 0) throw ValidationError("openset: no out-of-set queries");
  if (n_in == 0) throw ValidationError("openset: no in-set queries");

  std::vector<OpensetPoint> points;
  points.reserve(thresholds.size());
  for (double threshold : thresholds) {
    std::size_t misses = 0, false_alarms = 0;
    for (const Top1& t : tops) {
      if (t.in_set) {
        if (!t.retrieved || !t.correct_speaker || t.score < threshold) ++misses;
      } else {
        if (t.retrieved && t.score >= threshold) ++false_alarms;
      }
    }
    points.push_back(OpensetPoint{threshold, static_cast<double>(misses) / n_in,
                                  static_cast<double>(false_alarms) / n_out});
  }
  return points;
}

double hamming_ratio(const EmbeddingStore& store, std::span<const ProjectionMatrix> projections,
                     std::size_t sample_pairs, std::uint64_t seed) {
  if (projections.empty()) throw ValidationError("hamming_ratio: no projections");
  if (sample_pairs == 0) throw ValidationError("hamming_ratio: sample count must be positive");

  std::vector<const std::vector<std::uint32_t>*> eligible;  // speakers with >= 2 utterances
  for (const auto& [speaker, positions] : store.speaker_index())
    if (positions.size() >= 2) eligible.push_back(&positions);
  if (eligible.size() < 2 || store.speaker_count() < 2)
    throw ValidationError("hamming_ratio: insufficient pairs (need >= 2 speakers with >= 2 "
                          "utterances each)");

  // Keys are computed lazily; only sampled records get hashed.
  std::vector<std::vector<HashKey>> keys(store.size());
  auto keys_of = [&](std::uint32_t pos) -> const std::vector<HashKey>& {
    auto& slot = keys[pos];
    if (slot.empty()) {
      slot.reserve(projections.size());
      for (const ProjectionMatrix& p : projections)
        slot.push_back(hash_direction(store.vector(pos), p));
    }
    return slot;
  };
  auto mean_table_distance = [&](std::uint32_t a, std::uint32_t b) {
    const auto& ka = keys_of(a);
    const auto& kb = keys_of(b);
    double sum = 0.0;
    for (std::size_t t = 0; t < ka.size(); ++t)
      sum += static_cast<double>(hamming(ka[t], kb[t]));
    return sum / static_cast<double>(ka.size());
  };

  auto rng = make_engine(seed);
  double same_total = 0.0;
  std::uniform_int_distribution<std::size_t> pick_speaker(0, eligible.size() - 1);
  for (std::size_t i = 0; i < sample_pairs; ++i) {
    const auto& positions = *eligible[pick_speaker(rng)];
    std::uniform_int_distribution<std::size_t> pick(0, positions.size() - 1);
    const std::size_t a = pick(rng);
    std::size_t b = pick(rng);
    while (b == a) b = pick(rng);
    same_total += mean_table_distance(positions[a], positions[b]);
  }

  double diff_total = 0.0;
  std::uniform_int_distribution<std::uint32_t> pick_record(
      0, static_cast<std::uint32_t>(store.size() - 1));
  for (std::size_t i = 0; i < sample_pairs; ++i) {
    std::uint32_t a = pick_record(rng);
    std::uint32_t b = pick_record(rng);
    while (store.record(a).speaker == store.record(b).speaker) {
      a = pick_record(rng);
      b = pick_record(rng);
    }
    diff_total += mean_table_distance(a, b);
  }

  if (diff_total == 0.0)
    throw ValidationError("hamming_ratio: different-speaker distance is zero");
  return same_total / diff_total;
}

SweepResult sweep(const EmbeddingStore& store, const SplitSpec& split, const SweepConfig& cfg) {
  if (cfg.methods.empty() || cfg.k_values.empty() || cfg.L_values.empty() || cfg.seeds.empty())
    throw ValidationError("sweep: methods, k, L and seed grids must be non-empty");
  for (const std::string& task : cfg.tasks)
    if (task != "retrieval" && task != "identification")
      throw ValidationError("sweep: unknown task '" + task + "'");
  if (cfg.tasks.empty()) throw ValidationError("sweep: no tasks");
  split.validate(store);

  const bool needs_training = std::any_of(cfg.methods.begin(), cfg.methods.end(), [](auto m) {
    return m != ProjectionMethod::lsh;
  });
  std::optional<EmbeddingStore> train;
  if (needs_training) {
    if (split.train.empty())
      throw ValidationError("sweep: rss / rs-lda require a non-empty train split");
    train.emplace(store.subset(split.train));
  }
  const std::size_t d = store.dimension();
  std::size_t rss_speakers = cfg.rss_speakers;
  if (rss_speakers == 0 && train) {
    rss_speakers = d;
    if (rss_speakers > train->speaker_count()) {
      rss_speakers = train->speaker_count();
      std::cerr << "spklsh: warning: clamping N_s to the " << rss_speakers
                << " available training speakers\n";
    }
  }
  const std::size_t m_eigen = cfg.m_eigen ? cfg.m_eigen : std::min<std::size_t>(100, d);

  // Per-task protocol context: the entities searched and the linear
  // baseline all hash runs are measured against.
  struct TaskContext {
    std::string task;
    const EmbeddingStore* entities = nullptr;
    std::vector<std::string> corpus_ids;  // empty = every record
    double linear_seconds = 0.0;
  };
  std::optional<EmbeddingStore> centroid_entities;
  std::vector<TaskContext> contexts;
  SweepResult result;
  for (const std::string& task : cfg.tasks) {
    TaskContext ctx;
    ctx.task = task;
    if (task == "retrieval") {
      ctx.entities = &store;
      ctx.corpus_ids = split.search_space;
    } else {
      if (!centroid_entities)
        centroid_entities = speaker_centroid_store(store, split.search_space);
      ctx.entities = &*centroid_entities;
    }
    const LinearBackend linear(*ctx.entities, ctx.corpus_ids);
    EvalReport baseline;
    if (task == "retrieval") {
      RetrievalOutcome out = retrieval_task(linear, store, split);
      baseline = out.report;
      ctx.linear_seconds = out.mean_query_seconds;
    } else {
      IdentificationOutcome out = identification_task(linear, store, split);
      baseline = out.report;
      ctx.linear_seconds = out.mean_query_seconds;
    }
    baseline.relative_speed = 1.0;
    result.linear_baselines.push_back(std::move(baseline));
    contexts.push_back(std::move(ctx));
  }

  const std::size_t max_tables = *std::max_element(cfg.L_values.begin(), cfg.L_values.end());
  for (ProjectionMethod method : cfg.methods) {
    for (std::size_t k : cfg.k_values) {
      for (std::uint64_t seed : cfg.seeds) {
        // Table l depends only on (seed, l), so one generation at the
        // largest L serves every smaller L as a prefix.
        std::vector<ProjectionMatrix> all_tables;
        switch (method) {
          case ProjectionMethod::lsh:
            all_tables = gen_lsh(d, k, max_tables, seed);
            break;
          case ProjectionMethod::rss:
            all_tables = gen_rss(*train, RssConfig{rss_speakers, k, max_tables, cfg.ridge, seed});
            break;
          case ProjectionMethod::rs_lda:
            all_tables = gen_rs_lda(*train, m_eigen, k, max_tables, cfg.ridge, seed);
            break;
        }
        for (std::size_t n_tables : cfg.L_values) {
          std::vector<ProjectionMatrix> tables(all_tables.begin(),
                                               all_tables.begin() + n_tables);
          for (TaskContext& ctx : contexts) {
            const HashBackend backend(*ctx.entities, tables, ctx.corpus_ids);
            EvalReport report;
            double seconds = 0.0;
            if (ctx.task == "retrieval") {
              RetrievalOutcome out = retrieval_task(backend, store, split);
              report = out.report;
              seconds = out.mean_query_seconds;
            } else {
              IdentificationOutcome out = identification_task(backend, store, split);
              report = out.report;
              seconds = out.mean_query_seconds;
            }
            report.seed = seed;
            report.relative_speed = seconds > 0.0 ? ctx.linear_seconds / seconds : 1.0;
            result.reports.push_back(std::move(report));
          }
        }
      }
    }
  }

  std::stable_sort(result.reports.begin(), result.reports.end(),
                   [](const EvalReport& a, const EvalReport& b) {
                     return std::tie(a.method, a.task, a.k, a.n_tables, a.seed) <
                            std::tie(b.method, b.task, b.k, b.n_tables, b.seed);
                   });
  return result;
}

}  // namespace spklsh
