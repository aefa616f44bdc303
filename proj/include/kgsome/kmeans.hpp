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
#include <limits>
#include <vector>

#include "kgsome/errors.hpp"
#include "kgsome/matrix.hpp"
#include "kgsome/random.hpp"
#include "kgsome/som.hpp"

namespace kgsome {

struct KMeansResult {
  std::vector<int> labels;
  Matrix centers;
  int iterations = 0;
};

// Lloyd's algorithm with k-means++ seeding. Stops after `max_iterations` or
// when no label changes.
inline KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed, int max_iterations = 100) {
  if (k < 1) throw ConfigError("k must be at least 1");
  if (static_cast<std::size_t>(k) > points.rows) throw ConfigError("k exceeds the number of points");
  Rng rng(derive_seed(seed, {0x63a5u}));

  KMeansResult res;
  res.centers = Matrix(static_cast<std::size_t>(k), points.cols);
  std::vector<double> d2(points.rows, std::numeric_limits<double>::infinity());
  std::size_t pick = uniform_index(rng, points.rows);
  for (int c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (double v : d2) total += v;
      if (total > 0.0) {
        double r = std::uniform_real_distribution<double>(0.0, total)(rng);
        pick = points.rows - 1;
        for (std::size_t i = 0; i < points.rows; ++i) {
          r -= d2[i];
          if (r < 0.0 && d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
        while (d2[pick] == 0.0 && pick > 0) --pick;
      } else {
        pick = uniform_index(rng, points.rows);
      }
    }
    const auto p = points.row(pick);
    std::copy(p.begin(), p.end(), res.centers.row(static_cast<std::size_t>(c)).begin());
    for (std::size_t i = 0; i < points.rows; ++i) d2[i] = std::min(d2[i], squared_distance(points.row(i), p));
  }

  res.labels.assign(points.rows, -1);
  std::vector<std::size_t> counts(static_cast<std::size_t>(k));
  for (res.iterations = 0; res.iterations < max_iterations; ++res.iterations) {
    bool changed = false;
    for (std::size_t i = 0; i < points.rows; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = squared_distance(points.row(i), res.centers.row(static_cast<std::size_t>(c)));
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (res.labels[i] != best) {
        res.labels[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Matrix sums(static_cast<std::size_t>(k), points.cols);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < points.rows; ++i) {
      auto s = sums.row(static_cast<std::size_t>(res.labels[i]));
      const auto p = points.row(i);
      for (std::size_t j = 0; j < s.size(); ++j) s[j] += p[j];
      ++counts[static_cast<std::size_t>(res.labels[i])];
    }
    for (std::size_t c = 0; c < counts.size(); ++c) {
      if (counts[c] == 0) continue;  // keep an emptied center where it was
      auto center = res.centers.row(c);
      const auto s = sums.row(c);
      for (std::size_t j = 0; j < center.size(); ++j) center[j] = s[j] / static_cast<double>(counts[c]);
    }
  }
  return res;
}

// k-way clustering of a SOM's codevectors; one label per cell, row-major.
inline std::vector<int> cluster_codevectors(const SomGrid& grid, int k, std::uint64_t seed) {
  return kmeans(grid.codevectors(), k, seed).labels;
}

}  // namespace kgsome
