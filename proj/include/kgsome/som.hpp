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
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgsome/errors.hpp"
#include "kgsome/graph.hpp"
#include "kgsome/matrix.hpp"
#include "kgsome/random.hpp"

namespace kgsome {

struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
};

// Rectangular self-organizing map. Codevectors are stored row-major, one per
// cell; with `toroidal` set both axes wrap.
class SomGrid {
 public:
  SomGrid() = default;
  SomGrid(int width, int height, std::size_t dim, bool toroidal = true)
      : width_(width), height_(height), toroidal_(toroidal), codevectors_(static_cast<std::size_t>(width) * height, dim) {
    if (width < 1 || height < 1) throw ConfigError("grid dimensions must be positive");
    if (dim == 0) throw ConfigError("codevector dimension must be positive");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t dim() const noexcept { return codevectors_.cols; }
  std::size_t cell_count() const noexcept { return codevectors_.rows; }
  bool toroidal() const noexcept { return toroidal_; }

  std::size_t index(Cell c) const {
    check(c);
    return static_cast<std::size_t>(c.row) * width_ + c.col;
  }
  Cell cell(std::size_t idx) const {
    if (idx >= cell_count()) throw ShapeError("cell index out of range");
    return {static_cast<int>(idx / width_), static_cast<int>(idx % width_)};
  }
  void check(Cell c) const {
    if (c.row < 0 || c.row >= height_ || c.col < 0 || c.col >= width_)
      throw ShapeError("cell (" + std::to_string(c.row) + "," + std::to_string(c.col) + ") out of range");
  }

  std::span<double> codevector(std::size_t idx) { return codevectors_.row(idx); }
  std::span<const double> codevector(std::size_t idx) const { return codevectors_.row(idx); }
  Matrix& codevectors() noexcept { return codevectors_; }
  const Matrix& codevectors() const noexcept { return codevectors_; }

  bool operator==(const SomGrid&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  bool toroidal_ = true;
  Matrix codevectors_;
};

// Per-axis wrap: delta = min(|d|, size - |d|).
inline double grid_distance_squared(const SomGrid& g, Cell a, Cell b) {
  g.check(a);
  g.check(b);
  int dr = std::abs(a.row - b.row);
  int dc = std::abs(a.col - b.col);
  if (g.toroidal()) {
    dr = std::min(dr, g.height() - dr);
    dc = std::min(dc, g.width() - dc);
  }
  return static_cast<double>(dr) * dr + static_cast<double>(dc) * dc;
}

inline double grid_distance(const SomGrid& g, Cell a, Cell b) { return std::sqrt(grid_distance_squared(g, a, b)); }

// Row-major index of the best-matching unit; ties go to the smallest index.
inline std::size_t bmu_index(const SomGrid& g, std::span<const double> v) {
  if (v.size() != g.dim())
    throw ShapeError("vector dimension " + std::to_string(v.size()) + " does not match grid dimension " +
                     std::to_string(g.dim()));
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    const double d = squared_distance(v, g.codevector(i));
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

inline Cell bmu(const SomGrid& g, std::span<const double> v) { return g.cell(bmu_index(g, v)); }

struct RadiusSchedule {
  double initial = 0.0;
  double final = 1.0;
};

struct SomTrainConfig {
  std::size_t ordering_updates = 10000;
  std::size_t fine_updates = 5000;
  // initial <= 0 means max(width, height) / 2.
  RadiusSchedule ordering{0.0, 1.0};
  RadiusSchedule fine{1.0, 1.0};
  bool toroidal = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (ordering_updates + fine_updates == 0) throw ConfigError("SOM needs at least one update");
    if (!(ordering.final > 0.0) || !(fine.initial > 0.0) || !(fine.final > 0.0))
      throw ConfigError("SOM radii must be positive");
  }
};

// 0.5 (1 - n/N) over the whole two-phase run.
inline double som_learning_rate(std::size_t n, std::size_t total) {
  return 0.5 * (1.0 - static_cast<double>(n) / static_cast<double>(total));
}

inline double phase_radius(const RadiusSchedule& s, std::size_t step, std::size_t steps) {
  if (steps <= 1) return s.initial;
  const double f = static_cast<double>(step) / static_cast<double>(steps - 1);
  return s.initial + (s.final - s.initial) * f;
}

// One Kohonen update with a Gaussian neighbourhood around the BMU of `v`.
inline void som_update(SomGrid& g, std::span<const double> v, double lr, double sigma) {
  const Cell win = bmu(g, v);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    const double h = lr * std::exp(-grid_distance_squared(g, win, g.cell(i)) * inv);
    if (h == 0.0) continue;
    auto c = g.codevector(i);
    for (std::size_t k = 0; k < c.size(); ++k) c[k] += h * (v[k] - c[k]);
  }
}

// Codevectors drawn uniformly inside the per-dimension bounding box of `data`.
inline SomGrid init_som(const Matrix& data, int width, int height, bool toroidal, std::uint64_t seed) {
  if (data.rows == 0) throw TrainingError("SOM needs at least one training vector");
  SomGrid g(width, height, data.cols, toroidal);
  std::vector<double> lo(data.cols, std::numeric_limits<double>::infinity());
  std::vector<double> hi(data.cols, -std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < data.rows; ++r) {
    const auto x = data.row(r);
    for (std::size_t k = 0; k < data.cols; ++k) {
      lo[k] = std::min(lo[k], x[k]);
      hi[k] = std::max(hi[k], x[k]);
    }
  }
  Rng rng(derive_seed(seed, {0x50e1u}));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    auto c = g.codevector(i);
    for (std::size_t k = 0; k < c.size(); ++k) c[k] = lo[k] + (hi[k] - lo[k]) * unit(rng);
  }
  return g;
}

// Two-phase training: an ordering phase whose radius shrinks linearly, then a
// fine-adjustment phase; learning rate 0.5 (1 - n/N) with n counted across
// both phases and one training vector drawn uniformly per update.
inline SomGrid train_som(const Matrix& data, int width, int height, const SomTrainConfig& config) {
  config.validate();
  SomGrid g = init_som(data, width, height, config.toroidal, config.seed);
  RadiusSchedule ordering = config.ordering;
  if (ordering.initial <= 0.0) ordering.initial = std::max(width, height) / 2.0;
  const std::size_t total = config.ordering_updates + config.fine_updates;
  Rng rng(derive_seed(config.seed, {0x50e2u}));
  std::size_t n = 0;
  for (std::size_t s = 0; s < config.ordering_updates; ++s, ++n)
    som_update(g, data.row(uniform_index(rng, data.rows)), som_learning_rate(n, total),
               phase_radius(ordering, s, config.ordering_updates));
  for (std::size_t s = 0; s < config.fine_updates; ++s, ++n)
    som_update(g, data.row(uniform_index(rng, data.rows)), som_learning_rate(n, total),
               phase_radius(config.fine, s, config.fine_updates));
  return g;
}

// Mean distance of each vector to its BMU codevector.
inline double quantization_error(const SomGrid& g, const Matrix& data) {
  if (data.rows == 0) throw ValidationError("quantization error needs at least one vector");
  double s = 0.0;
  for (std::size_t r = 0; r < data.rows; ++r) {
    const auto x = data.row(r);
    s += std::sqrt(squared_distance(x, g.codevector(bmu_index(g, x))));
  }
  return s / static_cast<double>(data.rows);
}

// Per cell: mean distance of the vectors it wins; nullopt for empty cells.
inline std::vector<std::optional<double>> node_quality(const SomGrid& g, const Matrix& data) {
  std::vector<double> sum(g.cell_count(), 0.0);
  std::vector<std::size_t> count(g.cell_count(), 0);
  for (std::size_t r = 0; r < data.rows; ++r) {
    const auto x = data.row(r);
    const auto b = bmu_index(g, x);
    sum[b] += std::sqrt(squared_distance(x, g.codevector(b)));
    ++count[b];
  }
  std::vector<std::optional<double>> out(g.cell_count());
  for (std::size_t i = 0; i < out.size(); ++i)
    if (count[i]) out[i] = sum[i] / static_cast<double>(count[i]);
  return out;
}

// Entity -> BMU cell, plus the reverse cell -> entities map.
struct CellAssignment {
  std::vector<EntityId> entities;
  std::vector<std::size_t> cells;                // parallel to `entities`
  std::vector<std::vector<EntityId>> members;    // per cell, sorted

  std::optional<std::size_t> cell_of(EntityId e) const {
    for (std::size_t i = 0; i < entities.size(); ++i)
      if (entities[i] == e) return cells[i];
    return std::nullopt;
  }
};

inline CellAssignment assign_cells(const SomGrid& g, const Matrix& vectors, std::span<const EntityId> ids) {
  if (vectors.rows != ids.size()) throw ShapeError("one vector per entity required");
  CellAssignment a;
  a.members.resize(g.cell_count());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto c = bmu_index(g, vectors.row(i));
    a.entities.push_back(ids[i]);
    a.cells.push_back(c);
    a.members[c].push_back(ids[i]);
  }
  for (auto& m : a.members) std::sort(m.begin(), m.end());
  return a;
}

// Rows of `source` picked by `ids`.
inline Matrix gather_rows(const Matrix& source, std::span<const EntityId> ids) {
  Matrix out(ids.size(), source.cols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= source.rows) throw LookupError("row id out of range");
    const auto src = source.row(ids[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace kgsome
