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
#include <string>
#include <vector>

#include "kgsome/graph.hpp"

namespace kgsome {

struct SyntheticSpec {
  int blocks = 4;
  int chems_per_block = 25;
  int genes_per_block = 25;
  int relations = 3;
  double noise = 0.05;
  int edges_per_compound = 20;
  // Adds "<rel>_inv" gene->compound edges so multi-step walks exist.
  bool with_inverses = true;
  std::uint64_t seed = 0;
};

struct SyntheticKg {
  KnowledgeGraph graph;
  std::vector<EntityId> compounds;
  std::vector<EntityId> genes;
  std::vector<int> block;           // per entity id
  std::size_t cross_block_edges = 0;  // forward edges only
  std::size_t forward_edges = 0;
};

// Planted-block bipartite compound/gene graph. A compound in block k links to
// genes of block k, except that each edge is rewired to a uniformly chosen
// other block with probability `noise`.
inline SyntheticKg generate_synthetic_kg(const SyntheticSpec& spec) {
  if (spec.blocks < 1 || spec.chems_per_block < 1 || spec.genes_per_block < 1 || spec.relations < 1 ||
      spec.edges_per_compound < 1)
    throw ConfigError("synthetic graph counts must be positive");
  if (!(spec.noise >= 0.0 && spec.noise < 1.0)) throw ConfigError("noise must lie in [0, 1)");
  if (spec.noise > 0.0 && spec.blocks < 2) throw ConfigError("noise needs at least 2 blocks to rewire into");

  SyntheticKg out;
  auto& g = out.graph;
  for (int b = 0; b < spec.blocks; ++b)
    for (int i = 0; i < spec.chems_per_block; ++i) {
      out.compounds.push_back(g.add_entity("C" + std::to_string(b) + "_" + std::to_string(i)));
      out.block.push_back(b);
    }
  for (int b = 0; b < spec.blocks; ++b)
    for (int i = 0; i < spec.genes_per_block; ++i) {
      out.genes.push_back(g.add_entity("G" + std::to_string(b) + "_" + std::to_string(i)));
      out.block.push_back(b);
    }
  std::vector<RelationId> fwd, inv;
  for (int r = 0; r < spec.relations; ++r) fwd.push_back(g.add_relation("r" + std::to_string(r)));
  if (spec.with_inverses)
    for (int r = 0; r < spec.relations; ++r) inv.push_back(g.add_relation("r" + std::to_string(r) + "_inv"));

  Rng rng(derive_seed(spec.seed, {0x5e7u}));
  std::bernoulli_distribution rewire(spec.noise);
  const auto gene_of = [&](int b, std::size_t i) { return out.genes[static_cast<std::size_t>(b) * spec.genes_per_block + i]; };
  const std::size_t per_block_slots = static_cast<std::size_t>(spec.genes_per_block) * spec.relations;
  const int max_edges = static_cast<int>(std::min<std::size_t>(spec.edges_per_compound, per_block_slots));

  for (std::size_t c = 0; c < out.compounds.size(); ++c) {
    const EntityId chem = out.compounds[c];
    const int home = out.block[chem];
    int placed = 0;
    for (int attempt = 0; placed < max_edges && attempt < 50 * max_edges; ++attempt) {
      int b = home;
      if (rewire(rng)) {
        b = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(spec.blocks - 1)));
        if (b >= home) ++b;
      }
      const EntityId gene = gene_of(b, uniform_index(rng, static_cast<std::size_t>(spec.genes_per_block)));
      const auto ri = uniform_index(rng, fwd.size());
      if (!g.add_triple({chem, fwd[ri], gene})) continue;
      if (spec.with_inverses) g.add_triple({gene, inv[ri], chem});
      ++placed;
      ++out.forward_edges;
      if (b != home) ++out.cross_block_edges;
    }
  }
  return out;
}

}  // namespace kgsome
