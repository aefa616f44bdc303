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

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "kgsome/graph.hpp"
#include "kgsome/random.hpp"
#include "kgsome/transe.hpp"

namespace kgsome::testing {

inline KnowledgeGraph graph_from_text(const std::string& text) {
  KnowledgeGraph g;
  std::istringstream in(text);
  ingest_triples(in, g);
  return g;
}

// Random directed multigraph with names e0.., r0...
inline KnowledgeGraph random_graph(std::size_t entities, std::size_t relations, std::size_t edges, std::uint64_t seed) {
  KnowledgeGraph g;
  for (std::size_t i = 0; i < entities; ++i) g.add_entity("e" + std::to_string(i));
  for (std::size_t i = 0; i < relations; ++i) g.add_relation("r" + std::to_string(i));
  Rng rng(seed);
  std::size_t attempts = 0;
  while (g.size() < edges && attempts++ < edges * 100) {
    g.add_triple({static_cast<EntityId>(uniform_index(rng, entities)), static_cast<RelationId>(uniform_index(rng, relations)),
                  static_cast<EntityId>(uniform_index(rng, entities))});
  }
  return g;
}

// Model with i.i.d. components of scale `sd`; entities are left unprojected.
inline EmbeddingModel random_model(std::size_t entities, std::size_t relations, std::size_t dim, std::uint64_t seed,
                                   double sd = 0.5) {
  EmbeddingModel m(entities, relations, dim);
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, sd);
  for (auto& v : m.entity_matrix().data) v = n(rng);
  for (auto& v : m.relation_matrix().data) v = n(rng);
  return m;
}

// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("kgsome_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Pearson chi-square statistic of observed counts against expected counts.
inline double chi_square(const std::vector<double>& observed, const std::vector<double>& expected) {
  double s = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) s += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
  return s;
}

// Upper 0.999 quantile of chi-square with `dof` degrees of freedom
// (Wilson-Hilferty approximation).
inline double chi_square_critical(double dof) {
  const double z = 3.090232;
  const double a = 2.0 / (9.0 * dof);
  return dof * std::pow(1.0 - a + z * std::sqrt(a), 3.0);
}

}  // namespace kgsome::testing
