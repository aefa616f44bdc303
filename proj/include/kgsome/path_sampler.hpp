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

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "kgsome/graph.hpp"

namespace kgsome {

// A query s/r1/.../rL together with one gold answer.
struct PathQuery {
  EntityId source = 0;
  std::vector<RelationId> relations;
  EntityId answer = 0;

  std::size_t length() const noexcept { return relations.size(); }
  bool operator==(const PathQuery&) const = default;
};

inline PathQuery edge_query(const Triple& t) { return {t.head, {t.relation}, t.tail}; }

inline constexpr int kMaxWalkRestarts = 100;

// One random walk of exactly `length` steps from `start`: at each step a
// relation is drawn uniformly from those leaving the current entity, then the
// next entity uniformly from the tails of that relation. Returns nullopt on a
// dead end.
inline std::optional<PathQuery> random_walk(const KnowledgeGraph& g, EntityId start, std::size_t length, Rng& rng) {
  PathQuery q{start, {}, start};
  q.relations.reserve(length);
  EntityId current = start;
  for (std::size_t step = 0; step < length; ++step) {
    const auto rels = g.incident(current);
    if (rels.empty()) return std::nullopt;
    const RelationId r = rels[uniform_index(rng, rels.size())];
    const auto next = g.tails(current, r);
    current = next[uniform_index(rng, next.size())];
    q.relations.push_back(r);
  }
  q.answer = current;
  return q;
}

// Random-walk path-query dataset. Draws `count` walks with length uniform in
// {2..l_max} (length-1 draws are rejected and redrawn) from a uniform start
// entity, then appends every edge of `train` as a length-1 query.
inline std::vector<PathQuery> sample_path_queries(const KnowledgeGraph& train, std::size_t count, int l_max,
                                                  std::uint64_t seed) {
  if (l_max < 2) throw ConfigError("l_max must be at least 2");
  if (count == 0) throw ConfigError("count must be positive");
  if (train.empty()) throw SamplingError("graph has no edges to walk");

  Rng rng(derive_seed(seed, {0x9a7u}));
  std::uniform_int_distribution<int> length_dist(1, l_max);
  std::vector<PathQuery> out;
  out.reserve(count + train.size());
  for (std::size_t i = 0; i < count; ++i) {
    int length = 1;
    while (length == 1) length = length_dist(rng);
    std::optional<PathQuery> q;
    for (int attempt = 0; attempt <= kMaxWalkRestarts && !q; ++attempt) {
      const auto start = static_cast<EntityId>(uniform_index(rng, train.entity_count()));
      q = random_walk(train, start, static_cast<std::size_t>(length), rng);
    }
    if (!q)
      throw SamplingError("random walk of length " + std::to_string(length) + " dead-ended " +
                          std::to_string(kMaxWalkRestarts + 1) + " times");
    out.push_back(std::move(*q));
  }
  for (const auto& t : train.triples()) out.push_back(edge_query(t));
  return out;
}

// Evaluation queries of length 2..l_max drawn by walking `full` (train plus
// held-out edges); a walk is kept only if at least one step crosses an edge
// missing from `train`, so the answer cannot be read off the training graph.
inline std::vector<PathQuery> sample_heldout_path_queries(const KnowledgeGraph& full, const KnowledgeGraph& train,
                                                          std::size_t count, int l_max, std::uint64_t seed,
                                                          std::size_t max_attempts = 0) {
  if (l_max < 2) throw ConfigError("l_max must be at least 2");
  if (full.empty()) throw SamplingError("graph has no edges to walk");
  if (max_attempts == 0) max_attempts = 1000 * (count + 1);
  Rng rng(derive_seed(seed, {0x4e1du}));
  std::uniform_int_distribution<int> length_dist(2, l_max);
  std::vector<PathQuery> out;
  for (std::size_t attempt = 0; out.size() < count; ++attempt) {
    if (attempt == max_attempts)
      throw SamplingError("found only " + std::to_string(out.size()) + " of " + std::to_string(count) +
                          " held-out path queries");
    const auto length = static_cast<std::size_t>(length_dist(rng));
    const auto start = static_cast<EntityId>(uniform_index(rng, full.entity_count()));
    PathQuery q{start, {}, start};
    bool crosses = false, dead = false;
    for (std::size_t step = 0; step < length; ++step) {
      const auto rels = full.incident(q.answer);
      if (rels.empty()) {
        dead = true;
        break;
      }
      const RelationId r = rels[uniform_index(rng, rels.size())];
      const auto next = full.tails(q.answer, r);
      const EntityId t = next[uniform_index(rng, next.size())];
      crosses = crosses || !train.contains({q.answer, r, t});
      q.relations.push_back(r);
      q.answer = t;
    }
    if (!dead && crosses) out.push_back(std::move(q));
  }
  return out;
}

// Path-query file: source TAB r1 TAB ... TAB rL TAB answer. Length-1 queries
// are therefore ordinary triple lines.
inline void write_path_queries(std::ostream& out, const KnowledgeGraph& g, const std::vector<PathQuery>& qs) {
  for (const auto& q : qs) {
    out << g.entities().name(q.source);
    for (auto r : q.relations) out << '\t' << g.relations().name(r);
    out << '\t' << g.entities().name(q.answer) << '\n';
  }
}

// Names must already exist in `g`.
inline std::vector<PathQuery> read_path_queries(std::istream& in, const KnowledgeGraph& g) {
  std::vector<PathQuery> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto s = detail::rstrip(line);
    if (s.empty() || s.front() == '#') continue;
    const auto f = detail::split_tabs(s);
    if (f.size() < 3) throw ParseError(lineno, "path query needs at least 3 fields");
    PathQuery q;
    try {
      q.source = g.entities().at(f.front());
      q.answer = g.entities().at(f.back());
      for (std::size_t i = 1; i + 1 < f.size(); ++i) q.relations.push_back(g.relations().at(f[i]));
    } catch (const LookupError& e) {
      throw ParseError(lineno, e.what());
    }
    out.push_back(std::move(q));
  }
  return out;
}

}  // namespace kgsome
