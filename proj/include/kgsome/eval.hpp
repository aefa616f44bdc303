// Copyright 2026 The kgsome Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "kgsome/errors.hpp"
#include "kgsome/graph.hpp"
#include "kgsome/path_sampler.hpp"
#include "kgsome/transe.hpp"

namespace kgsome {

// 1-based rank of `gold` among `candidates` by descending score_path. Entities
// in `filtered` (sorted; the other correct answers) are skipped. Ties count
// against the gold answer.
inline std::size_t rank_answer(const EmbeddingModel& m, EntityId source, std::span<const RelationId> relations,
                               EntityId gold, std::span<const EntityId> candidates,
                               std::span<const EntityId> filtered = {}) {
  if (candidates.empty()) throw EvalError("no candidates to rank");
  if (std::find(candidates.begin(), candidates.end(), gold) == candidates.end())
    throw EvalError("gold answer is not among the candidates");
  const auto u = path_vector(m, source, relations);
  const double gold_score = membership(u, m.entity(gold));
  std::size_t rank = 1;
  for (auto c : candidates) {
    if (c == gold) continue;
    if (std::binary_search(filtered.begin(), filtered.end(), c)) continue;
    if (membership(u, m.entity(c)) >= gold_score) ++rank;
  }
  return rank;
}

// Filtered rank against every entity; alternative answers come from
// answer_set(filter_graph, ...), which should hold train and test edges.
inline std::size_t filtered_rank(const EmbeddingModel& m, const PathQuery& q, const KnowledgeGraph& filter_graph) {
  const auto answers = answer_set(filter_graph, q.source, q.relations);
  const auto u = path_vector(m, q.source, q.relations);
  const double gold_score = membership(u, m.entity(q.answer));
  std::size_t rank = 1;
  for (EntityId c = 0; c < m.entity_count(); ++c) {
    if (c == q.answer) continue;
    if (std::binary_search(answers.begin(), answers.end(), c)) continue;
    if (membership(u, m.entity(c)) >= gold_score) ++rank;
  }
  return rank;
}

inline double hits_from_ranks(std::span<const std::size_t> ranks, std::size_t k) {
  if (ranks.empty()) throw EvalError("empty query set");
  const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r <= k; });
  return 100.0 * static_cast<double>(hits) / static_cast<double>(ranks.size());
}

inline double hits_at_k(const EmbeddingModel& m, std::span<const PathQuery> queries, const KnowledgeGraph& filter_graph,
                        std::size_t k) {
  if (k < 1) throw EvalError("k must be at least 1");
  if (queries.empty()) throw EvalError("empty query set");
  std::vector<std::size_t> ranks;
  ranks.reserve(queries.size());
  for (const auto& q : queries) ranks.push_back(filtered_rank(m, q, filter_graph));
  return hits_from_ranks(ranks, k);
}

using Thresholds = std::map<RelationId, double>;

// A query is predicted positive iff its score reaches the threshold of its
// first relation. Returns balanced accuracy in percent.
inline double classify(const EmbeddingModel& m, std::span<const PathQuery> positives,
                       std::span<const PathQuery> negatives, const Thresholds& thresholds) {
  if (positives.empty() || negatives.empty()) throw EvalError("classification needs positives and negatives");
  const auto predict = [&](const PathQuery& q) {
    auto it = thresholds.find(q.relations.front());
    if (it == thresholds.end())
      throw EvalError("no threshold for relation id " + std::to_string(q.relations.front()));
    return score_path(m, q, q.answer) >= it->second;
  };
  std::size_t tp = 0, tn = 0;
  for (const auto& q : positives) tp += predict(q) ? 1 : 0;
  for (const auto& q : negatives) tn += predict(q) ? 0 : 1;
  return 50.0 * (static_cast<double>(tp) / static_cast<double>(positives.size()) +
                 static_cast<double>(tn) / static_cast<double>(negatives.size()));
}

// Threshold maximizing accuracy of (score >= threshold) on one relation's
// scores. Among optimal thresholds the first maximal interval is taken and its
// midpoint returned; an interval open to -inf returns its upper end, one open
// to +inf its lower end, and a fully unbounded one the midpoint of the
// observed score range.
inline double best_threshold(std::span<const double> pos, std::span<const double> neg) {
  if (pos.empty() || neg.empty()) throw EvalError("calibration needs a positive and a negative score");
  std::vector<double> u;
  u.insert(u.end(), pos.begin(), pos.end());
  u.insert(u.end(), neg.begin(), neg.end());
  std::sort(u.begin(), u.end());
  u.erase(std::unique(u.begin(), u.end()), u.end());
  std::vector<double> ps(pos.begin(), pos.end()), ns(neg.begin(), neg.end());
  std::sort(ps.begin(), ps.end());
  std::sort(ns.begin(), ns.end());

  // Cut j (0..m) puts the threshold in (u[j-1], u[j]]: scores >= u[j] positive.
  const std::size_t m = u.size();
  std::vector<std::size_t> correct(m + 1);
  for (std::size_t j = 0; j <= m; ++j) {
    const double th = j < m ? u[j] : std::numeric_limits<double>::infinity();
    const auto pos_ok = static_cast<std::size_t>(ps.end() - std::lower_bound(ps.begin(), ps.end(), th));
    const auto neg_ok = static_cast<std::size_t>(std::lower_bound(ns.begin(), ns.end(), th) - ns.begin());
    correct[j] = pos_ok + neg_ok;
  }
  const auto best = *std::max_element(correct.begin(), correct.end());
  std::size_t a = 0;
  while (correct[a] != best) ++a;
  std::size_t b = a;
  while (b + 1 <= m && correct[b + 1] == best) ++b;
  // Thresholds achieving cuts a..b span (u[a-1], u[b]].
  const bool lower_open = a == 0;
  const bool upper_open = b == m;
  if (lower_open && upper_open) return 0.5 * (u.front() + u.back());
  if (lower_open) return u[b];
  if (upper_open) return std::nextafter(u[a - 1], std::numeric_limits<double>::infinity());
  return 0.5 * (u[a - 1] + u[b]);
}

inline Thresholds calibrate_thresholds(const EmbeddingModel& m, std::span<const PathQuery> dev_positives,
                                       std::span<const PathQuery> dev_negatives) {
  std::map<RelationId, std::pair<std::vector<double>, std::vector<double>>> by_rel;
  for (const auto& q : dev_positives) by_rel[q.relations.front()].first.push_back(score_path(m, q, q.answer));
  for (const auto& q : dev_negatives) by_rel[q.relations.front()].second.push_back(score_path(m, q, q.answer));
  Thresholds out;
  for (const auto& [r, scores] : by_rel) {
    if (scores.first.empty() || scores.second.empty())
      throw EvalError("relation id " + std::to_string(r) + " lacks a dev positive or negative");
    out[r] = best_threshold(scores.first, scores.second);
  }
  return out;
}

// One answer-corrupted copy per positive: the answer is replaced by a seeded
// uniform entity outside the query's answer set in `filter_graph`.
inline std::vector<PathQuery> corrupt_answers(std::span<const PathQuery> positives, const KnowledgeGraph& filter_graph,
                                              std::uint64_t seed) {
  std::vector<PathQuery> out;
  out.reserve(positives.size());
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const auto& q = positives[i];
    const auto answers = answer_set(filter_graph, q.source, q.relations);
    Rng rng(derive_seed(seed, {0xc022u, i}));
    const auto neg = sample_negatives(filter_graph.entity_count(), answers, 1, rng);
    out.push_back({q.source, q.relations, neg.front()});
  }
  return out;
}

struct RelationBreakdown {
  std::size_t queries = 0;
  double hits_at_10 = 0.0;
  double classification_accuracy = 0.0;
};

struct EvalReport {
  double hits_at_10 = 0.0;
  double classification_accuracy = 0.0;
  std::size_t query_count = 0;
  std::map<RelationId, RelationBreakdown> per_relation;  // keyed by first relation
};

// hits@10 over every test query; classification thresholds are calibrated on
// a seeded half of the test queries and accuracy is reported on the other half
// (both halves are used for each relation when a relation has a single query).
inline EvalReport evaluate(const EmbeddingModel& m, std::span<const PathQuery> test, const KnowledgeGraph& filter_graph,
                           std::uint64_t seed) {
  if (test.empty()) throw EvalError("empty query set");
  EvalReport rep;
  rep.query_count = test.size();
  std::vector<std::size_t> ranks;
  for (const auto& q : test) ranks.push_back(filtered_rank(m, q, filter_graph));
  rep.hits_at_10 = hits_from_ranks(ranks, 10);

  const auto negatives = corrupt_answers(test, filter_graph, seed);
  std::vector<std::size_t> order(test.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {0xde7u}));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<char> is_dev(test.size(), 0);
  for (std::size_t i = 0; i < order.size() / 2; ++i) is_dev[order[i]] = 1;

  std::vector<PathQuery> dev_pos, dev_neg, ev_pos, ev_neg;
  for (std::size_t i = 0; i < test.size(); ++i) {
    (is_dev[i] ? dev_pos : ev_pos).push_back(test[i]);
    (is_dev[i] ? dev_neg : ev_neg).push_back(negatives[i]);
  }
  // Relations missing from one half fall back to calibrating/evaluating on all
  // of that relation's queries.
  std::map<RelationId, int> seen_dev, seen_eval;
  for (const auto& q : dev_pos) ++seen_dev[q.relations.front()];
  for (const auto& q : ev_pos) ++seen_eval[q.relations.front()];
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto r = test[i].relations.front();
    if (!seen_dev.count(r)) {
      dev_pos.push_back(test[i]);
      dev_neg.push_back(negatives[i]);
    }
    if (!seen_eval.count(r)) {
      ev_pos.push_back(test[i]);
      ev_neg.push_back(negatives[i]);
    }
  }
  const auto thresholds = calibrate_thresholds(m, dev_pos, dev_neg);
  rep.classification_accuracy = classify(m, ev_pos, ev_neg, thresholds);

  std::map<RelationId, std::vector<std::size_t>> rel_ranks;
  for (std::size_t i = 0; i < test.size(); ++i) rel_ranks[test[i].relations.front()].push_back(ranks[i]);
  std::map<RelationId, std::pair<std::vector<PathQuery>, std::vector<PathQuery>>> rel_eval;
  for (std::size_t i = 0; i < ev_pos.size(); ++i) {
    rel_eval[ev_pos[i].relations.front()].first.push_back(ev_pos[i]);
    rel_eval[ev_neg[i].relations.front()].second.push_back(ev_neg[i]);
  }
  for (const auto& [r, rr] : rel_ranks) {
    RelationBreakdown b;
    b.queries = rr.size();
    b.hits_at_10 = hits_from_ranks(rr, 10);
    const auto& ev = rel_eval[r];
    b.classification_accuracy = classify(m, ev.first, ev.second, thresholds);
    rep.per_relation[r] = b;
  }
  return rep;
}

inline std::string format_percent(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << v;
  return os.str();
}

// Two-row comparison table: one row per training mode, columns @10 and Class.
struct TableRow {
  std::string model;
  std::string mode;
  double hits_at_10 = 0.0;
  double classification_accuracy = 0.0;
};

inline void print_eval_table(std::ostream& os, const std::string& dataset, std::span<const TableRow> rows) {
  os << std::left << std::setw(10) << "Model" << std::setw(8) << "Train" << " | " << dataset << '\n';
  os << std::setw(10) << "" << std::setw(8) << "" << " | " << std::right << std::setw(6) << "@10" << std::setw(8)
     << "Class" << '\n';
  os << std::string(10 + 8 + 3 + 14, '-') << '\n';
  for (const auto& r : rows)
    os << std::left << std::setw(10) << r.model << std::setw(8) << r.mode << " | " << std::right << std::setw(6)
       << format_percent(r.hits_at_10) << std::setw(8) << format_percent(r.classification_accuracy) << '\n';
}

}  // namespace kgsome
