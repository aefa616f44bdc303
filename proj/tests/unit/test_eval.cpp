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


#include <gtest/gtest.h>

#include <limits>
#include <sstream>

#include "helpers.hpp"
#include "kgsome/eval.hpp"

namespace kgsome {
namespace {

using testing::random_graph;
using testing::random_model;

std::size_t brute_rank(const EmbeddingModel& m, const PathQuery& q, const std::vector<EntityId>& skip) {
  const double gold = score_path(m, q, q.answer);
  std::size_t r = 1;
  for (EntityId e = 0; e < m.entity_count(); ++e) {
    if (e == q.answer || std::find(skip.begin(), skip.end(), e) != skip.end()) continue;
    if (score_path(m, q, e) >= gold) ++r;
  }
  return r;
}

TEST(Ranking, MatchesBruteForceOracle) {
  Rng rng(42);
  for (int inst = 0; inst < 200; ++inst) {
    const auto m = random_model(25, 3, 4, 1000 + inst);
    const auto g = random_graph(25, 3, 60, 2000 + inst);
    const auto qs = sample_path_queries(g, 3, 3, inst);
    for (const auto& q : qs) {
      const auto ans = answer_set(g, q.source, q.relations);
      EXPECT_EQ(filtered_rank(m, q, g), brute_rank(m, q, ans));
      std::vector<EntityId> everyone(25);
      std::iota(everyone.begin(), everyone.end(), 0u);
      EXPECT_EQ(rank_answer(m, q.source, q.relations, q.answer, everyone), brute_rank(m, q, {}));
    }
  }
}

TEST(Ranking, TiesCountAgainstGold) {
  EmbeddingModel m(3, 1, 2);
  m.entity(1)[0] = 1.0;
  m.entity(2)[0] = 1.0;  // identical to the gold answer
  const PathQuery q{0, {0}, 1};
  const std::vector<EntityId> all{0, 1, 2};
  EXPECT_EQ(rank_answer(m, 0, q.relations, 1, all), 3u);  // zero relation: everyone ties at distance 1
  m.relation(0)[0] = 1.0;
  EXPECT_EQ(rank_answer(m, 0, q.relations, 1, all), 2u);
  const std::vector<EntityId> filt{2};
  EXPECT_EQ(rank_answer(m, 0, q.relations, 1, all, filt), 1u);
  EXPECT_THROW(rank_answer(m, 0, q.relations, 1, std::vector<EntityId>{0, 2}), EvalError);
}

TEST(Ranking, FilteredNeverExceedsRaw) {
  const auto g = random_graph(30, 2, 150, 3);
  const auto m = random_model(30, 2, 5, 3);
  std::vector<EntityId> everyone(30);
  std::iota(everyone.begin(), everyone.end(), 0u);
  for (const auto& q : sample_path_queries(g, 200, 3, 3))
    EXPECT_LE(filtered_rank(m, q, g), rank_answer(m, q.source, q.relations, q.answer, everyone));
}

TEST(Hits, WorkedExampleAndMonotoneInK) {
  const std::vector<std::size_t> ranks{1, 5, 20};
  EXPECT_NEAR(hits_from_ranks(ranks, 10), 200.0 / 3.0, 1e-12);
  EXPECT_EQ(hits_from_ranks(ranks, 1), 100.0 / 3.0);
  EXPECT_EQ(hits_from_ranks(ranks, 20), 100.0);
  EXPECT_THROW(hits_from_ranks(std::vector<std::size_t>{}, 1), EvalError);

  const auto g = random_graph(40, 3, 160, 4);
  const auto m = random_model(40, 3, 6, 4);
  const auto qs = sample_path_queries(g, 100, 3, 4);
  double prev = 0.0;
  for (std::size_t k = 1; k <= 40; ++k) {
    const double h = hits_at_k(m, qs, g, k);
    EXPECT_GE(h, prev);
    prev = h;
  }
  EXPECT_EQ(prev, 100.0);
  EXPECT_THROW(hits_at_k(m, qs, g, 0), EvalError);
}

std::size_t correct_at(double th, const std::vector<double>& pos, const std::vector<double>& neg) {
  std::size_t c = 0;
  for (double p : pos) c += p >= th;
  for (double n : neg) c += n < th;
  return c;
}

TEST(Threshold, MidpointOfOptimalGap) {
  EXPECT_DOUBLE_EQ(best_threshold(std::vector<double>{-1.0, 0.0}, std::vector<double>{-3.0, -4.0}), -2.0);
}

TEST(Threshold, OpenIntervals) {
  // Everything positive is best: the upper end of (-inf, min].
  EXPECT_DOUBLE_EQ(best_threshold(std::vector<double>{1.0, 2.0}, std::vector<double>{-5.0}), -2.0);
  // Negatives dominate above every positive.
  const double th = best_threshold(std::vector<double>{-5.0}, std::vector<double>{1.0, 2.0, 3.0});
  EXPECT_EQ(correct_at(th, {-5.0}, {1.0, 2.0, 3.0}), 3u);
  EXPECT_THROW(best_threshold(std::vector<double>{}, std::vector<double>{1.0}), EvalError);
}

TEST(Threshold, AchievesGridOptimum) {
  Rng rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> pos, neg;
    for (int i = 0; i < 15; ++i) pos.push_back(std::round(4 * (n(rng) + 0.7)) / 4);
    for (int i = 0; i < 12; ++i) neg.push_back(std::round(4 * n(rng)) / 4);
    std::size_t best = 0;
    for (double t = -8.0; t <= 8.0; t += 0.125) best = std::max(best, correct_at(t, pos, neg));
    best = std::max(best, correct_at(std::numeric_limits<double>::infinity(), pos, neg));
    EXPECT_EQ(correct_at(best_threshold(pos, neg), pos, neg), best);
  }
}

TEST(Threshold, InvariantUnderMonotoneTransform) {
  Rng rng(6);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> pos, neg, tpos, tneg;
  for (int i = 0; i < 30; ++i) pos.push_back(n(rng) + 1.0);
  for (int i = 0; i < 30; ++i) neg.push_back(n(rng));
  for (double v : pos) tpos.push_back(std::exp(v));
  for (double v : neg) tneg.push_back(std::exp(v));
  EXPECT_EQ(correct_at(best_threshold(pos, neg), pos, neg), correct_at(best_threshold(tpos, tneg), tpos, tneg));
}

TEST(Classify, BalancedAccuracy) {
  const auto m = random_model(10, 2, 3, 7);
  const std::vector<PathQuery> pos{{0, {0}, 1}, {2, {1}, 3}};
  const std::vector<PathQuery> neg{{0, {0}, 4}, {2, {1}, 5}, {6, {0}, 7}};
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_EQ(classify(m, pos, neg, {{0, -inf}, {1, -inf}}), 50.0);
  EXPECT_EQ(classify(m, pos, neg, {{0, inf}, {1, inf}}), 50.0);
  EXPECT_THROW(classify(m, pos, neg, {{0, 0.0}}), EvalError);
  EXPECT_THROW(classify(m, pos, std::vector<PathQuery>{}, {{0, 0.0}}), EvalError);
}

TEST(Classify, CorruptedAnswersAreNotAnswers) {
  const auto g = random_graph(30, 2, 120, 8);
  const auto qs = sample_path_queries(g, 80, 3, 8);
  const auto neg = corrupt_answers(qs, g, 8);
  ASSERT_EQ(neg.size(), qs.size());
  for (std::size_t i = 0; i < qs.size(); ++i) {
    EXPECT_EQ(neg[i].source, qs[i].source);
    EXPECT_EQ(neg[i].relations, qs[i].relations);
    const auto ans = answer_set(g, qs[i].source, qs[i].relations);
    EXPECT_FALSE(std::binary_search(ans.begin(), ans.end(), neg[i].answer));
  }
  EXPECT_EQ(neg, corrupt_answers(qs, g, 8));
}

TEST(Evaluate, ReportIsConsistent) {
  const auto g = random_graph(40, 3, 200, 9);
  const auto m = random_model(40, 3, 6, 9);
  const auto qs = sample_path_queries(g, 150, 3, 9);
  const auto rep = evaluate(m, qs, g, 1);
  EXPECT_EQ(rep.query_count, qs.size());
  std::size_t total = 0;
  for (const auto& [r, b] : rep.per_relation) total += b.queries;
  EXPECT_EQ(total, qs.size());
  EXPECT_GE(rep.classification_accuracy, 0.0);
  EXPECT_LE(rep.classification_accuracy, 100.0);
  EXPECT_EQ(rep.hits_at_10, hits_at_k(m, qs, g, 10));
  EXPECT_THROW(evaluate(m, std::vector<PathQuery>{}, g, 1), EvalError);
}

TEST(Evaluate, TableLayout) {
  std::ostringstream os;
  const std::vector<TableRow> rows{{"TransE", "single", 12.34, 56.78}, {"TransE", "comp", 100.0, 0.0}};
  print_eval_table(os, "toy", rows);
  const auto s = os.str();
  EXPECT_NE(s.find("@10"), std::string::npos);
  EXPECT_NE(s.find("Class"), std::string::npos);
  EXPECT_NE(s.find("12.3"), std::string::npos);
  EXPECT_NE(s.find("56.8"), std::string::npos);
  EXPECT_NE(s.find("100.0"), std::string::npos);
  EXPECT_EQ(format_percent(66.666), "66.7");
}

}  // namespace
}  // namespace kgsome
