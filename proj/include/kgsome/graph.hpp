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
#include <compare>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kgsome/errors.hpp"
#include "kgsome/random.hpp"

namespace kgsome {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  auto operator<=>(const Triple&) const = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    return static_cast<std::size_t>(
        mix64((std::uint64_t{t.head} << 32) ^ (std::uint64_t{t.relation} << 16) ^ t.tail ^
              (std::uint64_t{t.relation} << 48)));
  }
};

// Name <-> dense index mapping; indices are assigned in first-seen order.
class Vocabulary {
 public:
  std::uint32_t intern(std::string_view name) {
    auto it = index_.find(std::string(name));
    if (it != index_.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(names_.size());
    names_.emplace_back(name);
    index_.emplace(names_.back(), id);
    return id;
  }

  std::optional<std::uint32_t> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::uint32_t at(std::string_view name) const {
    if (auto id = find(name)) return *id;
    throw LookupError("unknown name '" + std::string(name) + "'");
  }

  const std::string& name(std::uint32_t id) const {
    if (id >= names_.size()) throw LookupError("index " + std::to_string(id) + " out of range");
    return names_[id];
  }

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  bool operator==(const Vocabulary& o) const { return names_ == o.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

namespace detail {
template <typename T>
bool insert_sorted(std::vector<T>& v, T value) {
  auto it = std::lower_bound(v.begin(), v.end(), value);
  if (it != v.end() && *it == value) return false;
  v.insert(it, value);
  return true;
}
}  // namespace detail

// Multi-relational directed graph. Relations are traversed head -> tail only;
// inverse relations exist only if the input names them explicitly.
//
// All adjacency lists are kept sorted so that every traversal and every
// seeded sampler sees the same order regardless of ingestion history.
class KnowledgeGraph {
 public:
  EntityId add_entity(std::string_view name) {
    const auto id = entities_.intern(name);
    if (id >= incident_.size()) {
      incident_.resize(id + 1);
      neighbors_.resize(id + 1);
    }
    return id;
  }

  RelationId add_relation(std::string_view name) { return relations_.intern(name); }

  // Returns false if the triple was already present.
  bool add_triple(Triple t) {
    if (t.head >= entities_.size() || t.tail >= entities_.size())
      throw LookupError("triple references an unknown entity");
    if (t.relation >= relations_.size()) throw LookupError("triple references an unknown relation");
    if (!triple_set_.insert(t).second) return false;
    triples_.push_back(t);
    detail::insert_sorted(forward_[key(t.head, t.relation)], t.tail);
    detail::insert_sorted(incident_[t.head], t.relation);
    detail::insert_sorted(neighbors_[t.head], t.tail);
    detail::insert_sorted(neighbors_[t.tail], t.head);
    return true;
  }

  bool add(std::string_view head, std::string_view relation, std::string_view tail) {
    const auto h = add_entity(head);
    const auto r = add_relation(relation);
    const auto t = add_entity(tail);
    return add_triple({h, r, t});
  }

  bool contains(const Triple& t) const { return triple_set_.count(t) != 0; }

  // Tails reachable from `head` through `relation`, sorted.
  std::span<const EntityId> tails(EntityId head, RelationId relation) const {
    auto it = forward_.find(key(head, relation));
    if (it == forward_.end()) return {};
    return it->second;
  }

  // Relations with at least one outgoing edge from `e`, sorted.
  std::span<const RelationId> incident(EntityId e) const {
    check_entity(e);
    return incident_[e];
  }

  // Entities adjacent to `e` through any triple in either direction, sorted.
  std::span<const EntityId> neighbors(EntityId e) const {
    check_entity(e);
    return neighbors_[e];
  }

  // True when no entity appears both as a head and as a tail.
  bool is_bipartite() const {
    std::vector<char> role(entities_.size(), 0);
    for (const auto& t : triples_) {
      role[t.head] |= 1;
      role[t.tail] |= 2;
    }
    return std::none_of(role.begin(), role.end(), [](char r) { return r == 3; });
  }

  void check_entity(EntityId e) const {
    if (e >= entities_.size()) throw LookupError("unknown entity id " + std::to_string(e));
  }
  void check_relation(RelationId r) const {
    if (r >= relations_.size()) throw LookupError("unknown relation id " + std::to_string(r));
  }

  const Vocabulary& entities() const noexcept { return entities_; }
  const Vocabulary& relations() const noexcept { return relations_; }
  std::size_t entity_count() const noexcept { return entities_.size(); }
  std::size_t relation_count() const noexcept { return relations_.size(); }
  // Insertion order.
  const std::vector<Triple>& triples() const noexcept { return triples_; }
  std::size_t size() const noexcept { return triples_.size(); }
  bool empty() const noexcept { return triples_.empty(); }

  // A graph with the same vocabularies and no triples; ids stay compatible.
  KnowledgeGraph empty_copy() const {
    KnowledgeGraph g;
    for (const auto& n : entities_.names()) g.add_entity(n);
    for (const auto& n : relations_.names()) g.add_relation(n);
    return g;
  }

 private:
  static std::uint64_t key(EntityId h, RelationId r) { return (std::uint64_t{h} << 32) | r; }

  Vocabulary entities_;
  Vocabulary relations_;
  std::vector<Triple> triples_;
  std::unordered_set<Triple, TripleHash> triple_set_;
  std::unordered_map<std::uint64_t, std::vector<EntityId>> forward_;
  std::vector<std::vector<RelationId>> incident_;
  std::vector<std::vector<EntityId>> neighbors_;
};

namespace detail {
inline std::string_view rstrip(std::string_view s) {
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_tabs(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}
}  // namespace detail

// Reads TAB-separated triples into `graph`. '#' lines and blank lines are
// skipped; trailing whitespace is stripped. Returns the number of lines that
// added a new triple.
inline std::size_t ingest_triples(std::istream& in, KnowledgeGraph& graph) {
  std::string line;
  std::size_t lineno = 0;
  std::size_t added = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto s = detail::rstrip(line);
    if (s.empty() || s.front() == '#') continue;
    const auto fields = detail::split_tabs(s);
    if (fields.size() != 3)
      throw ParseError(lineno, "expected 3 TAB-separated fields, got " + std::to_string(fields.size()));
    for (const auto& f : fields)
      if (f.empty()) throw ParseError(lineno, "empty field");
    if (graph.add(fields[0], fields[1], fields[2])) ++added;
  }
  return added;
}

inline void write_triple(std::ostream& out, const KnowledgeGraph& g, const Triple& t) {
  out << g.entities().name(t.head) << '\t' << g.relations().name(t.relation) << '\t'
      << g.entities().name(t.tail) << '\n';
}

inline void write_triples(std::ostream& out, const KnowledgeGraph& g) {
  for (const auto& t : g.triples()) write_triple(out, g, t);
}

// Exact set of entities reachable from `source` by following `relations` in
// order. An empty relation sequence yields {source}.
inline std::vector<EntityId> answer_set(const KnowledgeGraph& g, EntityId source,
                                        std::span<const RelationId> relations) {
  g.check_entity(source);
  for (auto r : relations) g.check_relation(r);
  std::vector<EntityId> frontier{source};
  std::vector<char> seen(g.entity_count(), 0);
  for (auto r : relations) {
    std::vector<EntityId> next;
    for (auto e : frontier)
      for (auto t : g.tails(e, r))
        if (!seen[t]) {
          seen[t] = 1;
          next.push_back(t);
        }
    for (auto t : next) seen[t] = 0;
    std::sort(next.begin(), next.end());
    frontier = std::move(next);
    if (frontier.empty()) break;
  }
  return frontier;
}

struct SplitSpec {
  double test_fraction = 0.1;
  std::uint64_t seed = 0;
};

struct SplitResult {
  KnowledgeGraph train;     // same vocabularies as the source graph
  std::vector<Triple> test;
};

// Seeded train/test split. A triple only moves to test if its head, relation
// and tail each keep at least one occurrence in train, so every test symbol
// has a trained embedding.
inline SplitResult split(const KnowledgeGraph& graph, const SplitSpec& spec) {
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0))
    throw ConfigError("test fraction must lie in (0, 1)");
  if (graph.empty()) throw ConfigError("cannot split an empty graph");

  const auto& triples = graph.triples();
  std::vector<std::size_t> order(triples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(spec.seed, {0x5711u}));
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::size_t> ent_count(graph.entity_count(), 0), rel_count(graph.relation_count(), 0);
  for (const auto& t : triples) {
    ++ent_count[t.head];
    ++ent_count[t.tail];
    ++rel_count[t.relation];
  }

  const auto target = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(triples.size())));
  std::vector<char> in_test(triples.size(), 0);
  std::size_t taken = 0;
  for (auto idx : order) {
    if (taken == target) break;
    const auto& t = triples[idx];
    if (rel_count[t.relation] < 2) continue;
    if (t.head == t.tail ? ent_count[t.head] < 3 : (ent_count[t.head] < 2 || ent_count[t.tail] < 2)) continue;
    --ent_count[t.head];
    --ent_count[t.tail];
    --rel_count[t.relation];
    in_test[idx] = 1;
    ++taken;
  }

  SplitResult result{graph.empty_copy(), {}};
  for (std::size_t i = 0; i < triples.size(); ++i) {
    if (in_test[i])
      result.test.push_back(triples[i]);
    else
      result.train.add_triple(triples[i]);
  }
  return result;
}

// Entities that take the compound role (heads of forward relations) and the
// gene role (tails of forward relations). A relation whose name ends with
// `inverse_suffix` is treated as an explicit inverse and ignored.
struct RolePartition {
  std::vector<EntityId> compounds;
  std::vector<EntityId> genes;
};

inline bool is_inverse_relation(std::string_view name, std::string_view inverse_suffix) {
  return !inverse_suffix.empty() && name.size() > inverse_suffix.size() &&
         name.substr(name.size() - inverse_suffix.size()) == inverse_suffix;
}

inline RolePartition partition_roles(const KnowledgeGraph& g, std::string_view inverse_suffix = "_inv") {
  std::vector<char> role(g.entity_count(), 0);
  for (const auto& t : g.triples()) {
    if (is_inverse_relation(g.relations().name(t.relation), inverse_suffix)) continue;
    role[t.head] |= 1;
    role[t.tail] |= 2;
  }
  RolePartition p;
  for (EntityId e = 0; e < role.size(); ++e) {
    if (role[e] & 1) p.compounds.push_back(e);
    if (role[e] & 2) p.genes.push_back(e);
  }
  return p;
}

}  // namespace kgsome
