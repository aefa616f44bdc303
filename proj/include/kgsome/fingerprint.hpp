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

// Semantic fingerprints: an entity's embedding quantized against every SOM
// codevector into three bands (2 = close, 1 = near, 0 = far).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "kgsome/errors.hpp"
#include "kgsome/graph.hpp"
#include "kgsome/som.hpp"
#include "kgsome/transe.hpp"

namespace kgsome {

struct BandThresholds {
  double band2_max = 0.1;
  double band1_max = 0.2;

  void validate() const {
    if (!(band2_max > 0.0 && band2_max < band1_max)) throw ConfigError("band thresholds need 0 < band2_max < band1_max");
  }
};

inline std::uint8_t quantize_distance(double dist, const BandThresholds& th) {
  if (dist < th.band2_max) return 2;
  if (dist < th.band1_max) return 1;
  return 0;
}

struct Fingerprint {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> cells;  // row-major bands
  std::string subject;

  std::uint8_t at(int row, int col) const { return cells[static_cast<std::size_t>(row) * width + col]; }
  bool same_bands(const Fingerprint& o) const { return width == o.width && height == o.height && cells == o.cells; }
  bool operator==(const Fingerprint&) const = default;
};

// Distance from `v` to every codevector, row-major.
inline std::vector<double> codevector_distances(const SomGrid& grid, std::span<const double> v) {
  if (v.size() != grid.dim()) throw ShapeError("vector dimension does not match grid");
  std::vector<double> out(grid.cell_count());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(squared_distance(v, grid.codevector(i)));
  return out;
}

inline Fingerprint fingerprint_from_distances(const SomGrid& grid, std::span<const double> dist, const BandThresholds& th,
                                              std::string subject = {}) {
  Fingerprint fp{grid.width(), grid.height(), std::vector<std::uint8_t>(grid.cell_count(), 0), std::move(subject)};
  for (std::size_t i = 0; i < dist.size(); ++i) fp.cells[i] = quantize_distance(dist[i], th);
  return fp;
}

inline Fingerprint entity_fingerprint(const SomGrid& grid, std::span<const double> v, const BandThresholds& th,
                                      std::string subject = {}) {
  th.validate();
  const auto d = codevector_distances(grid, v);
  return fingerprint_from_distances(grid, d, th, std::move(subject));
}

// Union semantics: per cell the minimum distance over the member vectors.
inline Fingerprint set_fingerprint(const SomGrid& grid, const Matrix& vectors, const BandThresholds& th,
                                   std::string subject = {}) {
  th.validate();
  std::vector<double> best(grid.cell_count(), std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < vectors.rows; ++r) {
    const auto d = codevector_distances(grid, vectors.row(r));
    for (std::size_t i = 0; i < best.size(); ++i) best[i] = std::min(best[i], d[i]);
  }
  return fingerprint_from_distances(grid, best, th, std::move(subject));
}

// Band-weighted Jaccard: sum_c min(a_c, b_c) / sum_c max(a_c, b_c). Two empty
// fingerprints are identical and score 1.
inline double fingerprint_similarity(const Fingerprint& a, const Fingerprint& b) {
  if (a.width != b.width || a.height != b.height || a.cells.size() != b.cells.size())
    throw ShapeError("fingerprint dimensions differ");
  std::size_t num = 0, den = 0;
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    num += std::min(a.cells[i], b.cells[i]);
    den += std::max(a.cells[i], b.cells[i]);
  }
  return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

// Band thresholds derived from the data: band1_max at the given quantile of
// all entity-to-codevector distances, band2_max at half of it.
inline BandThresholds auto_thresholds(const SomGrid& grid, const Matrix& vectors, double quantile = 0.10) {
  if (vectors.rows == 0) throw ValidationError("auto thresholds need at least one vector");
  if (!(quantile >= 0.0 && quantile <= 1.0)) throw ValidationError("threshold quantile must lie in [0, 1]");
  std::vector<double> all;
  all.reserve(vectors.rows * grid.cell_count());
  for (std::size_t r = 0; r < vectors.rows; ++r) {
    const auto d = codevector_distances(grid, vectors.row(r));
    all.insert(all.end(), d.begin(), d.end());
  }
  const auto idx = static_cast<std::size_t>(quantile * static_cast<double>(all.size() - 1));
  std::nth_element(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(idx), all.end());
  BandThresholds th{all[idx] / 2.0, all[idx]};
  if (!(th.band2_max > 0.0)) th = {1e-12, 2e-12};
  return th;
}

struct InteractionProfile {
  EntityId gene = 0;
  std::vector<std::size_t> counts;  // per cluster
};

// counts[c]: distinct assigned compounds linked to `gene` by any triple whose
// BMU cell carries cluster label c.
inline InteractionProfile interaction_profile(const KnowledgeGraph& graph, EntityId gene, std::span<const int> labels,
                                              const CellAssignment& assignment, int k) {
  graph.check_entity(gene);
  if (labels.size() != assignment.members.size()) throw ShapeError("labels and assignment cover different grids");
  std::vector<std::size_t> cell_of(graph.entity_count(), std::numeric_limits<std::size_t>::max());
  for (std::size_t i = 0; i < assignment.entities.size(); ++i) cell_of[assignment.entities[i]] = assignment.cells[i];
  InteractionProfile p{gene, std::vector<std::size_t>(static_cast<std::size_t>(k), 0)};
  for (auto e : graph.neighbors(gene)) {
    const auto c = cell_of[e];
    if (c == std::numeric_limits<std::size_t>::max()) continue;
    const int label = labels[c];
    if (label < 0 || label >= k) throw ValidationError("cluster label out of range");
    ++p.counts[static_cast<std::size_t>(label)];
  }
  return p;
}

struct SemanticRatio {
  double observed = 0.0;
  double baseline = 0.0;
  double ratio = 0.0;
};

namespace detail {
inline double jaccard_sorted(std::span<const EntityId> a, std::span<const EntityId> b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t i = 0, j = 0, inter = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++inter;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

// Sum of pairwise Jaccard similarities within groups, and the pair count.
inline std::pair<double, std::size_t> within_group_jaccard(const KnowledgeGraph& graph,
                                                           const std::vector<std::vector<EntityId>>& groups) {
  double sum = 0.0;
  std::size_t pairs = 0;
  for (const auto& g : groups) {
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = i + 1; j < g.size(); ++j) {
        sum += jaccard_sorted(graph.neighbors(g[i]), graph.neighbors(g[j]));
        ++pairs;
      }
  }
  return {sum, pairs};
}
}  // namespace detail

inline constexpr int kSemanticRatioPermutations = 20;

// Within-cell similarity of the assigned compounds' neighbour sets against a
// permutation baseline. Observed: pair-weighted mean pairwise Jaccard over
// cells holding at least two compounds. Baseline: the same statistic after
// shuffling compounds across cells with cell sizes preserved, averaged over 20
// seeded permutations.
inline SemanticRatio semantic_ratio(const KnowledgeGraph& graph, const CellAssignment& assignment, std::uint64_t seed) {
  std::vector<std::vector<EntityId>> groups;
  for (const auto& m : assignment.members)
    if (m.size() >= 2) groups.push_back(m);
  if (groups.empty()) throw EvalError("no SOM cell holds two or more compounds");

  const auto [obs_sum, pairs] = detail::within_group_jaccard(graph, groups);
  SemanticRatio out;
  out.observed = obs_sum / static_cast<double>(pairs);

  std::vector<EntityId> pool;
  for (const auto& m : assignment.members) pool.insert(pool.end(), m.begin(), m.end());
  double base = 0.0;
  for (int p = 0; p < kSemanticRatioPermutations; ++p) {
    Rng rng(derive_seed(seed, {0x5e3au, static_cast<std::uint64_t>(p)}));
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<std::vector<EntityId>> shuffled;
    std::size_t pos = 0;
    for (const auto& m : assignment.members) {
      if (m.size() >= 2) shuffled.emplace_back(pool.begin() + static_cast<std::ptrdiff_t>(pos),
                                               pool.begin() + static_cast<std::ptrdiff_t>(pos + m.size()));
      pos += m.size();
    }
    base += detail::within_group_jaccard(graph, shuffled).first / static_cast<double>(pairs);
  }
  out.baseline = base / kSemanticRatioPermutations;
  if (!(out.baseline > 0.0)) throw EvalError("permutation baseline is zero; ratio undefined");
  out.ratio = out.observed / out.baseline;
  return out;
}

struct PixelEdit {
  int row = 0;
  int col = 0;
  int band = 0;
};

struct WhatIfResult {
  Fingerprint edited;
  std::vector<RankedEntity> neighbours;  // score = fingerprint similarity
};

inline Fingerprint apply_edits(Fingerprint fp, std::span<const PixelEdit> edits) {
  for (const auto& e : edits) {
    if (e.band < 0 || e.band > 2) throw ValidationError("band must be 0, 1 or 2");
    if (e.row < 0 || e.row >= fp.height || e.col < 0 || e.col >= fp.width)
      throw ValidationError("edit (" + std::to_string(e.row) + "," + std::to_string(e.col) + ") out of range");
    fp.cells[static_cast<std::size_t>(e.row) * fp.width + e.col] = static_cast<std::uint8_t>(e.band);
  }
  return fp;
}

// The k entities (of `candidates`, or all model entities when empty) whose own
// fingerprints are most similar to `fp`; ties by entity index.
inline std::vector<RankedEntity> nearest_fingerprints(const Fingerprint& fp, const SomGrid& grid,
                                                      const EmbeddingModel& model, const BandThresholds& th,
                                                      std::size_t k, std::span<const EntityId> candidates = {}) {
  if (fp.width != grid.width() || fp.height != grid.height()) throw ShapeError("fingerprint does not match grid");
  std::vector<EntityId> ids(candidates.begin(), candidates.end());
  if (ids.empty()) {
    ids.resize(model.entity_count());
    for (EntityId e = 0; e < ids.size(); ++e) ids[e] = e;
  }
  std::vector<RankedEntity> all;
  all.reserve(ids.size());
  for (auto e : ids) all.push_back({e, fingerprint_similarity(fp, entity_fingerprint(grid, model.entity(e), th))});
  k = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                    [](const RankedEntity& a, const RankedEntity& b) {
                      return a.score != b.score ? a.score > b.score : a.entity < b.entity;
                    });
  all.resize(k);
  return all;
}

inline WhatIfResult what_if_toggle(const Fingerprint& fp, std::span<const PixelEdit> edits, const SomGrid& grid,
                                   const EmbeddingModel& model, const BandThresholds& th, std::size_t k,
                                   std::span<const EntityId> candidates = {}) {
  WhatIfResult r{apply_edits(fp, edits), {}};
  r.neighbours = nearest_fingerprints(r.edited, grid, model, th, k, candidates);
  return r;
}

// Portable pixmap: band 0 white, 1 green, 2 red.
inline void write_fingerprint_ppm(std::ostream& os, const Fingerprint& fp) {
  os << "P3\n" << fp.width << ' ' << fp.height << "\n255\n";
  for (int r = 0; r < fp.height; ++r) {
    for (int c = 0; c < fp.width; ++c) {
      switch (fp.at(r, c)) {
        case 2: os << "255 0 0"; break;
        case 1: os << "0 160 0"; break;
        default: os << "255 255 255"; break;
      }
      os << (c + 1 == fp.width ? '\n' : ' ');
    }
  }
}

// Portable graymap of node quality: darker is a tighter cell, empty cells are white.
inline void write_quality_pgm(std::ostream& os, const SomGrid& grid, std::span<const std::optional<double>> quality) {
  double hi = 0.0;
  for (const auto& q : quality)
    if (q) hi = std::max(hi, *q);
  os << "P2\n" << grid.width() << ' ' << grid.height() << "\n255\n";
  for (int r = 0; r < grid.height(); ++r) {
    for (int c = 0; c < grid.width(); ++c) {
      const auto& q = quality[static_cast<std::size_t>(r) * grid.width() + c];
      const int v = !q ? 255 : (hi > 0.0 ? static_cast<int>(std::lround(254.0 * *q / hi)) : 0);
      os << v << (c + 1 == grid.width() ? '\n' : ' ');
    }
  }
}

}  // namespace kgsome
