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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
// if any fails. Oracles are written independently of the code they check.
//
//   acceptance [--only NAME_SUBSTRING]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "kgsome/checkpoint.hpp"
#include "kgsome/cli.hpp"
#include "kgsome/eval.hpp"
#include "kgsome/fingerprint.hpp"
#include "kgsome/kmeans.hpp"
#include "kgsome/path_sampler.hpp"
#include "kgsome/service_http.hpp"
#include "kgsome/some_pipeline.hpp"
#include "kgsome/synthetic.hpp"
#include "kgsome/transe.hpp"

namespace fs = std::filesystem;
using namespace kgsome;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double time_limit_s;  // 0: no runtime bound
  std::function<Verdict()> check;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

double fd_relative(double fd, double analytic) {
  return std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-6});
}

EmbeddingModel gaussian_model(std::size_t entities, std::size_t relations, std::size_t dim, std::uint64_t seed,
                              double sd) {
  EmbeddingModel m(entities, relations, dim);
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, sd);
  for (auto& v : m.entity_matrix().data) v = n(rng);
  for (auto& v : m.relation_matrix().data) v = n(rng);
  return m;
}

KnowledgeGraph uniform_graph(std::size_t entities, std::size_t relations, std::size_t edges, std::uint64_t seed) {
  KnowledgeGraph g;
  for (std::size_t i = 0; i < entities; ++i) g.add_entity("e" + std::to_string(i));
  for (std::size_t i = 0; i < relations; ++i) g.add_relation("r" + std::to_string(i));
  Rng rng(seed);
  while (g.size() < edges)
    g.add_triple({static_cast<EntityId>(uniform_index(rng, entities)), static_cast<RelationId>(uniform_index(rng, relations)),
                  static_cast<EntityId>(uniform_index(rng, entities))});
  return g;
}

// Planted graph, compositional embedding and both role maps: the front half
// of the fingerprint pipeline, shared by several criteria.
struct PlantedPipeline {
  SyntheticKg kg;
  EmbeddingModel model;
  RolePartition roles;
  SomGrid compound_grid, gene_grid;
  Matrix compound_vectors, gene_vectors;
};

PlantedPipeline planted_pipeline(const SyntheticSpec& spec, int embed_epochs, int map_side, std::uint64_t seed,
                                 double embed_step = TrainConfig{}.step_size) {
  PlantedPipeline p{generate_synthetic_kg(spec), {}, {}, {}, {}, {}, {}};
  TrainConfig tc;
  tc.seed = seed;
  tc.epochs = embed_epochs;
  tc.step_size = embed_step;
  const auto queries = sample_path_queries(p.kg.graph, p.kg.graph.size(), 3, seed);
  p.model = init_model(p.kg.graph, tc);
  train(p.model, queries, p.kg.graph, tc);
  p.roles = partition_roles(p.kg.graph);
  SomTrainConfig sc;
  sc.seed = seed;
  p.compound_vectors = gather_rows(p.model.entity_matrix(), p.roles.compounds);
  p.gene_vectors = gather_rows(p.model.entity_matrix(), p.roles.genes);
  p.compound_grid = train_som(p.compound_vectors, map_side, map_side, sc);
  p.gene_grid = train_som(p.gene_vectors, map_side, map_side, sc);
  return p;
}

// ---------------------------------------------------------------------------

double hinge_fd_error(std::uint64_t seed, std::size_t* active) {
  auto m = gaussian_model(30, 4, 10, seed, 0.4);
  Rng rng(seed + 100);
  std::vector<PathQuery> qs;
  std::vector<std::vector<EntityId>> negs;
  for (int i = 0; i < 40; ++i) {
    PathQuery q{static_cast<EntityId>(uniform_index(rng, 30)), {}, static_cast<EntityId>(uniform_index(rng, 30))};
    const auto len = 1 + uniform_index(rng, 3);
    for (std::size_t s = 0; s < len; ++s) q.relations.push_back(static_cast<RelationId>(uniform_index(rng, 4)));
    std::vector<EntityId> n;
    for (int k = 0; k < 5; ++k) n.push_back(static_cast<EntityId>(uniform_index(rng, 30)));
    qs.push_back(std::move(q));
    negs.push_back(std::move(n));
  }
  const double margin = 1.0;
  for (std::size_t i = 0; i < qs.size(); ++i)
    if (example_loss(m, qs[i], negs[i], margin) > 0.0) ++*active;
  const auto g = objective_gradient(m, qs, negs, margin);
  const double h = 1e-5;
  double worst = 0.0;
  const auto probe = [&](std::vector<double>& params, const std::vector<double>& grad) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double keep = params[i];
      params[i] = keep + h;
      const double up = objective(m, qs, negs, margin);
      params[i] = keep - h;
      const double down = objective(m, qs, negs, margin);
      params[i] = keep;
      worst = std::max(worst, fd_relative((up - down) / (2 * h), grad[i]));
    }
  };
  probe(m.entity_matrix().data, g.entity_matrix().data);
  probe(m.relation_matrix().data, g.relation_matrix().data);
  return worst;
}

Tensor uniform_tensor(std::vector<std::size_t> shape, std::uint64_t seed, double lo, double hi) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.values) v = u(rng);
  return t;
}

double cnn_fd_error(CnnModel m, const Tensor& x, const std::vector<int>& labels, bool training, std::size_t stride) {
  const std::uint64_t mask_seed = 17;
  const auto g = backward(m, x, labels, training, mask_seed);
  const double eps = 1e-5;
  double worst = 0.0;
  const auto probe = [&](std::vector<double>& params, const std::vector<double>& grad) {
    for (std::size_t i = 0; i < params.size(); i += stride) {
      const double keep = params[i];
      params[i] = keep + eps;
      const double up = cross_entropy(m, x, labels, training, mask_seed);
      params[i] = keep - eps;
      const double down = cross_entropy(m, x, labels, training, mask_seed);
      params[i] = keep;
      worst = std::max(worst, fd_relative((up - down) / (2 * eps), grad[i]));
    }
  };
  for (std::size_t l = 0; l < m.layers().size(); ++l) {
    probe(m.weights(l).values, g.weights[l].values);
    probe(m.biases(l).values, g.biases[l].values);
  }
  return worst;
}

Verdict gradient_correctness() {
  double hinge = 0.0;
  std::size_t active = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) hinge = std::max(hinge, hinge_fd_error(seed, &active));

  struct Net {
    std::string what;
    CnnModel model;
    Tensor input;
    std::vector<int> labels;
    bool training;
    std::size_t stride;
  };
  std::vector<Net> nets;
  for (auto act : {Activation::tanh, Activation::relu, Activation::linear})
    nets.push_back({std::string("conv/") + to_string(act),
                    CnnModel({2, 6, 6}, {LayerSpec::conv(3, 3, 2, act), LayerSpec::dense(3, Activation::linear),
                                         LayerSpec::softmax()}, 1),
                    uniform_tensor({3, 2, 6, 6}, 2, -1, 1), {0, 2, 1}, false, 1});
  nets.push_back({"maxpool",
                  CnnModel({1, 6, 6}, {LayerSpec::conv(2, 3, 3, Activation::tanh), LayerSpec::maxpool(2),
                                       LayerSpec::dense(2, Activation::linear), LayerSpec::softmax()}, 3),
                  uniform_tensor({2, 1, 6, 6}, 4, -1, 1), {1, 0}, false, 1});
  nets.push_back({"dense",
                  CnnModel({3, 2, 2}, {LayerSpec::dense(5, Activation::tanh), LayerSpec::dense(4, Activation::relu),
                                       LayerSpec::dense(3, Activation::linear), LayerSpec::softmax()}, 5),
                  uniform_tensor({4, 3, 2, 2}, 6, -1, 1), {0, 1, 2, 1}, false, 1});
  nets.push_back({"dropout",
                  CnnModel({1, 4, 4}, {LayerSpec::dense(6, Activation::tanh), LayerSpec::dropout(0.5),
                                       LayerSpec::dense(2, Activation::linear), LayerSpec::softmax()}, 7),
                  uniform_tensor({3, 1, 4, 4}, 8, -1, 1), {1, 0, 1}, true, 1});
  nets.push_back({"full network", build_some_cnn({2, 10, 10}, 2, Activation::tanh, 9),
                  uniform_tensor({2, 2, 10, 10}, 10, 0, 2), {1, 0}, true, 5});
  double cnn = 0.0;
  std::string worst;
  for (const auto& n : nets) {
    const double e = cnn_fd_error(n.model, n.input, n.labels, n.training, n.stride);
    if (e >= cnn) {
      cnn = e;
      worst = n.what;
    }
  }
  return {hinge < 1e-4 && cnn < 1e-4 && active > 0,
          "hinge objective " + fmt(hinge) + " (" + std::to_string(active) + "/120 hinges active); cnn " + fmt(cnn) +
              " (largest in " + worst + ")"};
}

// ---------------------------------------------------------------------------

Verdict compositional_gain() {
  int wins = 0;
  std::ostringstream detail;
  std::size_t entities = 0, triples = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SyntheticSpec spec;
    spec.edges_per_compound = 10;
    spec.seed = seed;
    const auto kg = generate_synthetic_kg(spec);
    entities = kg.graph.entity_count();
    triples = kg.graph.size();
    const auto parts = split(kg.graph, {0.1, seed});
    KnowledgeGraph full = parts.train;
    for (const auto& t : parts.test) full.add_triple(t);
    const auto heldout = sample_heldout_path_queries(full, parts.train, 1000, 3, derive_seed(seed, {7}));

    double hits[2] = {0.0, 0.0};
    for (int comp = 0; comp < 2; ++comp) {
      TrainConfig cfg;
      cfg.seed = seed;
      cfg.mode = comp ? TrainMode::compositional : TrainMode::single_edge;
      std::vector<PathQuery> queries;
      if (comp)
        queries = sample_path_queries(parts.train, parts.train.size(), 3, seed);
      else
        for (const auto& t : parts.train.triples()) queries.push_back(edge_query(t));
      auto model = init_model(parts.train, cfg);
      train(model, queries, parts.train, cfg);
      hits[comp] = hits_at_k(model, heldout, full, 10);
    }
    if (hits[1] > hits[0]) ++wins;
    detail << (seed > 1 ? ", " : "") << format_percent(hits[1]) << "/" << format_percent(hits[0]);
  }
  return {wins >= 4, std::to_string(wins) + "/5 seeds won; path hits@10 comp/single per seed: " + detail.str() + " (" +
                         std::to_string(entities) + " entities, " + std::to_string(triples) + " triples)"};
}

// ---------------------------------------------------------------------------

// Sorts every unfiltered candidate by descending score with the gold answer
// placed after anything it ties with, then reads off its position.
std::size_t sorted_rank(const EmbeddingModel& m, const PathQuery& q, const std::vector<EntityId>& answers) {
  std::vector<double> u(m.dim());
  for (std::size_t d = 0; d < m.dim(); ++d) {
    u[d] = m.entity(q.source)[d];
    for (auto r : q.relations) u[d] += m.relation(r)[d];
  }
  const auto score = [&](EntityId e) {
    double s = 0.0;
    for (std::size_t d = 0; d < m.dim(); ++d) s -= (u[d] - m.entity(e)[d]) * (u[d] - m.entity(e)[d]);
    return s;
  };
  std::vector<std::pair<double, int>> list;  // (score, 1 for gold)
  for (EntityId e = 0; e < m.entity_count(); ++e) {
    if (e != q.answer && std::find(answers.begin(), answers.end(), e) != answers.end()) continue;
    list.push_back({score(e), e == q.answer ? 1 : 0});
  }
  std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::size_t i = 0; i < list.size(); ++i)
    if (list[i].second) return i + 1;
  return 0;
}

// Every answer reachable from the source by walking the relations, by
// breadth-first expansion over the triple list.
std::vector<EntityId> reachable(const KnowledgeGraph& g, EntityId source, const std::vector<RelationId>& rels) {
  std::vector<EntityId> frontier{source};
  for (auto r : rels) {
    std::vector<EntityId> next;
    for (const auto& t : g.triples())
      if (t.relation == r && std::find(frontier.begin(), frontier.end(), t.head) != frontier.end())
        next.push_back(t.tail);
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());
    frontier = std::move(next);
  }
  return frontier;
}

Verdict ranking_oracle() {
  std::size_t mismatches = 0, instances = 0, hit_mismatches = 0, ties = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto g = uniform_graph(40, 3, 150, seed);
    auto m = gaussian_model(40, 3, 4, seed + 1000, 0.5);
    // Coarse rounding makes exact score ties common.
    if (seed % 5 == 0)
      for (auto& v : m.entity_matrix().data) v = std::round(v * 2.0) / 2.0;
    Rng rng(seed + 2000);
    std::vector<PathQuery> batch;
    std::vector<std::size_t> expected;
    while (batch.size() < 20) {
      const auto len = 1 + uniform_index(rng, 3);
      const auto start = static_cast<EntityId>(uniform_index(rng, 40));
      auto q = random_walk(g, start, len, rng);
      if (!q) continue;
      const auto answers = reachable(g, q->source, q->relations);
      const auto r = sorted_rank(m, *q, answers);
      const auto got = filtered_rank(m, *q, g);
      if (r != got) ++mismatches;
      for (EntityId e = 0; e < 40; ++e)
        if (e != q->answer && score_path(m, q->source, q->relations, e) == score_path(m, q->source, q->relations, q->answer))
          ++ties;
      expected.push_back(r);
      batch.push_back(std::move(*q));
      ++instances;
    }
    double oracle_hits = 0.0;
    for (auto r : expected) oracle_hits += r <= 10 ? 100.0 : 0.0;
    oracle_hits /= static_cast<double>(expected.size());
    if (hits_at_k(m, batch, g, 10) != oracle_hits) ++hit_mismatches;
  }
  return {mismatches == 0 && hit_mismatches == 0 && instances == 1000,
          std::to_string(instances) + " instances, " + std::to_string(mismatches) + " rank mismatches, " +
              std::to_string(hit_mismatches) + "/50 hits@10 mismatches, " + std::to_string(ties) + " tied candidates"};
}

// ---------------------------------------------------------------------------

Verdict som_properties() {
  std::ostringstream detail;
  bool pass = true;

  // BMU against an exhaustive scan with a first-minimum tie rule.
  {
    Rng rng(5);
    std::normal_distribution<double> n;
    SomGrid g(20, 15, 6);
    for (auto& v : g.codevectors().data) v = n(rng);
    for (std::size_t i = 0; i < 20; ++i) g.codevectors().row(200 + i)[0] = g.codevectors().row(10)[0];
    int bad = 0;
    for (int t = 0; t < 500; ++t) {
      std::vector<double> v(6);
      if (t % 50 == 0) {
        const auto src = g.codevector(uniform_index(rng, g.cell_count()));
        v.assign(src.begin(), src.end());
      } else {
        for (auto& x : v) x = n(rng);
      }
      std::size_t best = 0;
      double best_d = 0.0;
      for (std::size_t c = 0; c < g.cell_count(); ++c) {
        double d = 0.0;
        for (std::size_t k = 0; k < 6; ++k) d += (v[k] - g.codevector(c)[k]) * (v[k] - g.codevector(c)[k]);
        if (c == 0 || d < best_d) {
          best = c;
          best_d = d;
        }
      }
      if (bmu_index(g, v) != best) ++bad;
    }
    pass = pass && bad == 0;
    detail << "bmu " << 500 - bad << "/500";
  }

  // Metric suites on toroidal and flat grids.
  {
    int violations = 0, checked = 0;
    Rng rng(6);
    for (auto [w, h, torus] : {std::tuple{100, 100, true}, std::tuple{7, 13, true}, std::tuple{10, 4, false}}) {
      const SomGrid g(w, h, 1, torus);
      const auto cell = [&] {
        return Cell{static_cast<int>(uniform_index(rng, static_cast<std::size_t>(h))),
                    static_cast<int>(uniform_index(rng, static_cast<std::size_t>(w)))};
      };
      for (int t = 0; t < 2000; ++t) {
        const auto a = cell(), b = cell(), c = cell();
        const double ab = grid_distance(g, a, b), ba = grid_distance(g, b, a);
        const double ac = grid_distance(g, a, c), cb = grid_distance(g, c, b);
        if (ab != ba) ++violations;
        if (ab > ac + cb + 1e-12) ++violations;
        if (grid_distance(g, a, a) != 0.0 || (ab == 0.0) != (a.row == b.row && a.col == b.col)) ++violations;
        if (torus) {
          const int dr = std::abs(a.row - b.row), dc = std::abs(a.col - b.col);
          const double ref = std::hypot(std::min(dr, h - dr), std::min(dc, w - dc));
          if (std::abs(ab - ref) > 1e-12) ++violations;
        }
        ++checked;
      }
    }
    const SomGrid t(100, 100, 1);
    if (grid_distance(t, {0, 0}, {0, 99}) != 1.0) ++violations;
    if (std::abs(grid_distance(t, {0, 0}, {75, 75}) - 25.0 * std::sqrt(2.0)) > 1e-12) ++violations;
    pass = pass && violations == 0;
    detail << ", metric " << violations << " violations in " << checked << " triples";
  }

  // Quantization error on clustered data, full two-phase schedule.
  {
    int improved = 0;
    std::ostringstream ratios;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      Rng rng(seed);
      std::normal_distribution<double> n;
      Matrix centres(6, 10), data(600, 10);
      for (auto& v : centres.data) v = 3.0 * n(rng);
      for (std::size_t i = 0; i < data.rows; ++i)
        for (std::size_t k = 0; k < 10; ++k) data.row(i)[k] = centres.row(i % 6)[k] + 0.3 * n(rng);
      SomTrainConfig cfg;
      cfg.seed = seed;
      const double before = quantization_error(init_som(data, 20, 20, true, seed), data);
      const double after = quantization_error(train_som(data, 20, 20, cfg), data);
      if (after < before) ++improved;
      ratios << (seed > 1 ? " " : "") << fmt(after / before, 3);
    }
    pass = pass && improved == 5;
    detail << ", QE lower after training in " << improved << "/5 seeds (after/before " << ratios.str() << ")";
  }
  return {pass, detail.str()};
}

// ---------------------------------------------------------------------------

Verdict semantic_ratio_calibration() {
  SyntheticSpec spec;
  spec.noise = 0.0;
  spec.edges_per_compound = 10;
  spec.seed = 1;
  const int side = 10;
  const auto p = planted_pipeline(spec, 50, side, 1);
  const auto trained = semantic_ratio(p.kg.graph, assign_cells(p.compound_grid, p.compound_vectors, p.roles.compounds), 1);

  // Randomized assignment: each compound lands in a uniformly drawn cell of
  // the same grid; averaged over independent draws.
  const int draws = 10;
  double sum = 0.0, lo = 1e9, hi = -1e9;
  for (int d = 0; d < draws; ++d) {
    Rng rng(derive_seed(99, {static_cast<std::uint64_t>(d)}));
    CellAssignment a;
    a.members.resize(side * side);
    for (auto e : p.roles.compounds) {
      const auto c = uniform_index(rng, a.members.size());
      a.entities.push_back(e);
      a.cells.push_back(c);
      a.members[c].push_back(e);
    }
    for (auto& m : a.members) std::sort(m.begin(), m.end());
    const double r = semantic_ratio(p.kg.graph, a, static_cast<std::uint64_t>(d)).ratio;
    sum += r;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  const double random_mean = sum / draws;
  return {trained.ratio > 2.0 && random_mean >= 0.8 && random_mean <= 1.2,
          "trained map ratio " + fmt(trained.ratio) + " (observed " + fmt(trained.observed) + ", baseline " +
              fmt(trained.baseline) + "); random assignment mean " + fmt(random_mean) + " over " +
              std::to_string(draws) + " draws (range " + fmt(lo, 3) + ".." + fmt(hi, 3) + ")"};
}

// ---------------------------------------------------------------------------

Verdict fingerprint_quantization() {
  const BandThresholds th{0.1, 0.2};
  const std::vector<std::pair<double, int>> table{
      {0.0, 2},   {0.01, 2},  {0.05, 2},  {0.0999, 2}, {0.09999999, 2}, {0.1, 1},  {0.1000001, 1},
      {0.15, 1},  {0.1999, 1}, {0.2, 0},  {0.2000001, 0}, {0.25, 0}, {0.5, 0},   {1.0, 0},
      {2.0, 0},   {1e-12, 2}, {0.12, 1},  {0.19, 1},  {0.3, 0},    {10.0, 0}};
  int bad = 0;
  for (const auto& [d, band] : table)
    if (quantize_distance(d, th) != band) ++bad;

  // Boundaries: every offset from one ulp to 1e-3 on both sides of each edge.
  int boundary_bad = 0, boundary_checked = 0;
  for (const auto& [edge, inner, outer] : {std::tuple{0.1, 2, 1}, std::tuple{0.2, 1, 0}}) {
    if (quantize_distance(std::nextafter(edge, 0.0), th) != inner) ++boundary_bad;
    if (quantize_distance(edge, th) != outer) ++boundary_bad;
    if (quantize_distance(std::nextafter(edge, 1.0), th) != outer) ++boundary_bad;
    boundary_checked += 3;
    for (int e = 15; e >= 3; --e) {
      const double eps = std::pow(10.0, -e);
      if (quantize_distance(edge - eps, th) != inner) ++boundary_bad;
      if (quantize_distance(edge + eps, th) != outer) ++boundary_bad;
      boundary_checked += 2;
    }
  }

  // Through a real grid: one-cell grids whose codevector sits at a chosen
  // distance from the probe.
  int grid_bad = 0;
  for (const auto& [d, band] : table) {
    SomGrid g(1, 1, 2);
    g.codevector(0)[0] = 3.0 + d;
    g.codevector(0)[1] = -1.0;
    const std::vector<double> probe{3.0, -1.0};
    if (entity_fingerprint(g, probe, th).cells[0] != band) ++grid_bad;
  }
  return {bad == 0 && boundary_bad == 0 && grid_bad == 0,
          std::to_string(table.size() - bad) + "/20 table rows, " + std::to_string(boundary_checked - boundary_bad) + "/" +
              std::to_string(boundary_checked) + " boundary probes, " + std::to_string(table.size() - grid_bad) +
              "/20 via a map"};
}

// ---------------------------------------------------------------------------

struct SomeSeedResult {
  double test_accuracy = 0.0;
  double train_accuracy = 0.0;
  double shuffled_test_accuracy = -1.0;
  std::size_t pairs = 0;
};

constexpr int kSomeMapSide = 50;
constexpr int kSomeEmbedEpochs = 50;
constexpr int kSomeCnnEpochs = 60;
constexpr double kSomeEmbedStep = 0.1;
constexpr double kSomeThresholdQuantile = 0.2;

std::vector<SomePair> planted_some_dataset(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.edges_per_compound = 10;
  spec.seed = seed;
  const auto p = planted_pipeline(spec, kSomeEmbedEpochs, kSomeMapSide, seed, kSomeEmbedStep);
  SomeDatasetConfig dc;
  dc.seed = seed;
  dc.max_positives = 200;
  dc.compound_thresholds = auto_thresholds(p.compound_grid, p.compound_vectors, kSomeThresholdQuantile);
  dc.gene_thresholds = auto_thresholds(p.gene_grid, p.gene_vectors, kSomeThresholdQuantile);
  return build_some_dataset(p.kg.graph, p.model, p.compound_grid, p.gene_grid, p.roles, dc);
}

SomeRunConfig some_run_config(std::uint64_t seed) {
  SomeRunConfig rc;
  rc.seed = seed;
  rc.cnn.seed = seed;
  rc.cnn.epochs = kSomeCnnEpochs;
  rc.cnn.step_size = 0.05;
  rc.cnn.batch_size = 16;
  return rc;
}

Verdict some_capacity_and_signal() {
  std::ostringstream detail;

  // Capacity: 20 planted pairs, memorised.
  double toy_accuracy = 0.0;
  {
    SyntheticSpec spec;
    spec.edges_per_compound = 10;
    spec.seed = 42;
    const auto p = planted_pipeline(spec, 10, 24, 42);
    SomeDatasetConfig dc;
    dc.seed = 42;
    dc.max_positives = 10;
    dc.compound_thresholds = auto_thresholds(p.compound_grid, p.compound_vectors);
    dc.gene_thresholds = auto_thresholds(p.gene_grid, p.gene_vectors);
    const auto pairs = build_some_dataset(p.kg.graph, p.model, p.compound_grid, p.gene_grid, p.roles, dc);
    std::vector<LabeledTensor> toy;
    for (const auto& s : pairs) toy.push_back({s.input, s.label});
    auto cnn = build_some_cnn({2, 24, 24}, 2, Activation::tanh, 42);
    CnnTrainConfig cfg;
    cfg.epochs = 200;
    cfg.batch_size = 4;
    cfg.seed = 42;
    train_cnn(cnn, toy, cfg);
    toy_accuracy = accuracy(cnn, toy);
    detail << "toy " << toy.size() << " pairs train acc " << fmt(toy_accuracy, 3);
  }

  std::vector<SomeSeedResult> results;
  const int shuffled_seeds = 3;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto data = planted_some_dataset(seed);
    const auto run = run_some(data, some_run_config(seed));
    SomeSeedResult r{run.report.test_accuracy, run.report.train_accuracy, -1.0, data.size()};
    if (seed <= shuffled_seeds)
      r.shuffled_test_accuracy = run_some(shuffle_labels(data, derive_seed(seed, {0x5f1u})), some_run_config(seed))
                                     .report.test_accuracy;
    results.push_back(r);
  }
  double mean = 0.0, shuffled = 0.0;
  std::ostringstream per_seed, per_shuffled;
  for (std::size_t i = 0; i < results.size(); ++i) {
    mean += results[i].test_accuracy;
    per_seed << (i ? " " : "") << fmt(results[i].test_accuracy, 3);
    if (results[i].shuffled_test_accuracy >= 0.0) {
      shuffled += results[i].shuffled_test_accuracy;
      per_shuffled << (i ? " " : "") << fmt(results[i].shuffled_test_accuracy, 3);
    }
  }
  mean /= static_cast<double>(results.size());
  shuffled /= shuffled_seeds;
  detail << "; " << results.front().pairs << " pairs/seed, test acc mean " << fmt(mean, 3) << " (" << per_seed.str()
         << "); shuffled control mean " << fmt(shuffled, 3) << " (" << per_shuffled.str() << ")";
  return {toy_accuracy >= 0.95 && mean > 0.75 && std::abs(shuffled - 0.5) <= 0.1, detail.str()};
}

// ---------------------------------------------------------------------------

// A fixed pipeline manifest replayed through the command-line front end.
const std::vector<std::string> kManifest{
    "--seed 11 synth --blocks 2 --compounds-per-block 12 --genes-per-block 12 --edges-per-compound 4 --out {}/kg.tsv",
    "--seed 11 train-embed --train {}/kg.tsv --mode comp --dim 12 --epochs 5 --out {}/embedding.json",
    "--seed 11 train-som --model {}/embedding.json --graph {}/kg.tsv --width 10 --height 10 --ordering-updates 2000 "
    "--fine-updates 1000 --clusters 3 --out {}/compound_som.json",
    "--seed 11 train-som-genes --model {}/embedding.json --graph {}/kg.tsv --width 10 --height 10 --ordering-updates 2000 "
    "--fine-updates 1000 --out {}/gene_som.json",
    "--seed 11 build-some --model {}/embedding.json --som {}/compound_som.json --gene-som {}/gene_som.json --graph "
    "{}/kg.tsv --size 8 --auto-threshold --out {}/dataset.json",
    "--seed 11 train-some --dataset {}/dataset.json --epochs 4 --out {}/cnn.json",
};

std::vector<std::string> manifest_args(const std::string& line, const fs::path& dir) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) {
    for (std::size_t at; (at = tok.find("{}")) != std::string::npos;) tok.replace(at, 2, dir.string());
    out.push_back(tok);
  }
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Verdict reproducibility() {
  const auto root = fs::temp_directory_path() / ("kgsome_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::vector<fs::path> dirs{root / "first", root / "second"};
  for (const auto& d : dirs) {
    fs::create_directories(d);
    for (const auto& line : kManifest) {
      std::ostringstream out, err;
      if (run_cli(manifest_args(line, d), out, err) != 0) {
        fs::remove_all(root);
        return {false, "manifest step failed: " + line + ": " + err.str()};
      }
    }
  }
  std::size_t files = 0, identical = 0, bytes = 0;
  for (const auto& entry : fs::directory_iterator(dirs[0])) {
    ++files;
    const auto a = slurp(entry.path()), b = slurp(dirs[1] / entry.path().filename());
    bytes += a.size();
    if (a == b) ++identical;
  }
  fs::remove_all(root);
  return {files == kManifest.size() && identical == files,
          std::to_string(identical) + "/" + std::to_string(files) + " artifacts bit-identical across two replays (" +
              std::to_string(bytes) + " bytes)"};
}

// ---------------------------------------------------------------------------

json ranked_json(const KnowledgeGraph& g, const std::vector<RankedEntity>& r, const char* key) {
  json out = json::array();
  for (const auto& e : r) out.push_back({{"entity", g.entities().name(e.entity)}, {key, e.score}});
  return out;
}

Verdict service_parity() {
  SyntheticSpec spec;
  spec.blocks = 2;
  spec.chems_per_block = 15;
  spec.genes_per_block = 15;
  spec.edges_per_compound = 5;
  spec.seed = 8;
  const int side = 12;
  const auto p = planted_pipeline(spec, 10, side, 8);

  ExplorerState st;
  st.graph = p.kg.graph;
  st.model = p.model;
  st.compound_grid = p.compound_grid;
  st.compound_thresholds = auto_thresholds(p.compound_grid, p.compound_vectors);
  st.compound_members = p.roles.compounds;
  st.clusters = cluster_codevectors(p.compound_grid, 3, 8);
  st.gene_grid = p.gene_grid;
  st.gene_thresholds = auto_thresholds(p.gene_grid, p.gene_vectors);
  st.cnn = build_some_cnn({2, 8, 8}, 2, Activation::tanh, 8);
  const ExplorerService service(st);

  httplib::Server server;
  bind_service(server, service);
  const int port = server.bind_to_any_port("127.0.0.1");
  if (port <= 0) return {false, "could not bind a local port"};
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);

  const auto& g = st.graph;
  const auto& model = st.model;
  const auto n_entities = g.entity_count();
  Rng rng(2024);
  const auto any_entity = [&] { return static_cast<EntityId>(uniform_index(rng, n_entities)); };
  const auto name = [&](EntityId e) { return g.entities().name(e); };
  const auto fp_of = [&](const SomGrid& grid, const BandThresholds& th, EntityId e, const std::string& label) {
    return entity_fingerprint(grid, model.entity(e), th, label);
  };
  const auto som_meta = [&] {
    json q = json::array();
    for (const auto& v : node_quality(st.compound_grid, gather_rows(model.entity_matrix(), st.compound_members)))
      q.push_back(v ? json(*v) : json(nullptr));
    return json{{"width", side}, {"height", side}, {"dim", model.dim()}, {"toroidal", true},
                {"clusters", st.clusters}, {"node_quality", q}, {"thresholds", thresholds_to_json(st.compound_thresholds)}};
  };

  std::map<std::string, int> by_endpoint;
  int mismatches = 0, transport_failures = 0;
  std::string first_mismatch;
  for (int i = 0; i < 200; ++i) {
    const auto kind = uniform_index(rng, 9);
    std::string method = "POST", path;
    json body, expected;
    const int k = 1 + static_cast<int>(uniform_index(rng, 30));
    switch (kind) {
      case 0: {
        method = "GET";
        path = "/health";
        expected = {{"status", "ok"}, {"entities", n_entities}, {"relations", g.relation_count()},
                    {"gene_map", true}, {"classifier", true}};
        break;
      }
      case 1: {
        method = "GET";
        const std::string prefix = uniform_index(rng, 2) ? "C" : "G0_1";
        const int limit = 1 + static_cast<int>(uniform_index(rng, 20));
        path = "/entities?prefix=" + prefix + "&limit=" + std::to_string(limit);
        json names = json::array();
        std::size_t total = 0;
        for (EntityId e = 0; e < n_entities; ++e)
          if (name(e).rfind(prefix, 0) == 0) {
            if (static_cast<int>(names.size()) < limit) names.push_back(name(e));
            ++total;
          }
        expected = {{"entities", names}, {"total", total}};
        break;
      }
      case 2: {
        method = "GET";
        const auto e = any_entity();
        const bool gene = uniform_index(rng, 2);
        path = "/fingerprint/" + name(e) + (gene ? "?map=gene" : "");
        expected = fingerprint_to_json(gene ? fp_of(*st.gene_grid, st.gene_thresholds, e, name(e))
                                            : fp_of(st.compound_grid, st.compound_thresholds, e, name(e)));
        break;
      }
      case 3: {
        path = "/fingerprint/set";
        std::vector<EntityId> ids(1 + uniform_index(rng, 4));
        for (auto& e : ids) e = any_entity();
        json names = json::array();
        for (auto e : ids) names.push_back(name(e));
        body = {{"entities", names}};
        expected = fingerprint_to_json(
            set_fingerprint(st.compound_grid, gather_rows(model.entity_matrix(), ids), st.compound_thresholds, "set"));
        break;
      }
      case 4: {
        path = "/query/path";
        const auto src = any_entity();
        std::vector<RelationId> rels(1 + uniform_index(rng, 3));
        json rnames = json::array();
        for (auto& r : rels) {
          r = static_cast<RelationId>(uniform_index(rng, g.relation_count()));
          rnames.push_back(g.relations().name(r));
        }
        body = {{"source", name(src)}, {"relations", rnames}, {"k", k}};
        // Independent top-k: score every entity, sort by descending score
        // then ascending id.
        std::vector<std::pair<double, EntityId>> all;
        for (EntityId e = 0; e < n_entities; ++e) all.push_back({score_path(model, src, rels, e), e});
        std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
          return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        std::vector<RankedEntity> top;
        for (std::size_t j = 0; j < std::min<std::size_t>(k, all.size()); ++j) top.push_back({all[j].second, all[j].first});
        expected = {{"results", ranked_json(g, top, "score")}};
        break;
      }
      case 5: {
        path = "/query/analogy";
        std::vector<EntityId> plus(1 + uniform_index(rng, 2)), minus(uniform_index(rng, 3));
        json pn = json::array(), mn = json::array();
        for (auto& e : plus) pn.push_back(name(e = any_entity()));
        for (auto& e : minus) mn.push_back(name(e = any_entity()));
        body = {{"plus", pn}, {"minus", mn}, {"k", k}};
        expected = {{"results", ranked_json(g, analogy_query(model, plus, minus, static_cast<std::size_t>(k)), "distance")}};
        break;
      }
      case 6: {
        path = "/whatif";
        const auto e = st.compound_members[uniform_index(rng, st.compound_members.size())];
        const auto fp = fp_of(st.compound_grid, st.compound_thresholds, e, name(e));
        std::vector<PixelEdit> edits(uniform_index(rng, 4));
        json ej = json::array();
        for (auto& ed : edits) {
          ed = {static_cast<int>(uniform_index(rng, side)), static_cast<int>(uniform_index(rng, side)),
                static_cast<int>(uniform_index(rng, 3))};
          ej.push_back({{"row", ed.row}, {"col", ed.col}, {"band", ed.band}});
        }
        body = {{"fingerprint", fingerprint_to_json(fp)}, {"edits", ej}, {"k", k}};
        const auto res = what_if_toggle(fp, edits, st.compound_grid, model, st.compound_thresholds,
                                        static_cast<std::size_t>(k), st.compound_members);
        expected = {{"fingerprint", fingerprint_to_json(res.edited)}, {"results", ranked_json(g, res.neighbours, "similarity")}};
        break;
      }
      case 7: {
        method = "GET";
        path = "/som/meta";
        expected = som_meta();
        break;
      }
      default: {
        path = "/predict";
        const auto c = st.compound_members[uniform_index(rng, st.compound_members.size())];
        const auto gn = p.roles.genes[uniform_index(rng, p.roles.genes.size())];
        body = {{"compound", name(c)}, {"gene", name(gn)}};
        const auto a = downsample(fingerprint_plane(fp_of(st.compound_grid, st.compound_thresholds, c, "")), side, side, 8, 8);
        const auto b = downsample(fingerprint_plane(fp_of(*st.gene_grid, st.gene_thresholds, gn, "")), side, side, 8, 8);
        Tensor input({2, 8, 8});
        std::copy(a.begin(), a.end(), input.values.begin());
        std::copy(b.begin(), b.end(), input.values.begin() + 64);
        const auto prob = predict_proba(*st.cnn, input);
        expected = {{"probabilities", prob},
                    {"class", std::max_element(prob.begin(), prob.end()) - prob.begin()}};
        break;
      }
    }
    ++by_endpoint[path.substr(0, path.find('?'))];
    auto res = method == "GET" ? client.Get(path) : client.Post(path, body.dump(), "application/json");
    if (!res || res->status != 200) {
      ++transport_failures;
      if (first_mismatch.empty()) first_mismatch = method + " " + path + " -> " + (res ? res->body : "no response");
      continue;
    }
    if (json::parse(res->body) != expected) {
      ++mismatches;
      if (first_mismatch.empty()) first_mismatch = method + " " + path;
    }
  }
  server.stop();
  worker.join();
  std::ostringstream detail;
  detail << 200 - mismatches - transport_failures << "/200 bodies equal library results over HTTP ("
         << by_endpoint.size() << " endpoint kinds)";
  if (!first_mismatch.empty()) detail << "; first failure: " << first_mismatch;
  return {mismatches == 0 && transport_failures == 0, detail.str()};
}

}  // namespace

int main(int argc, char** argv) {
  std::string only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = argv[++i];
    else {
      std::cerr << "usage: acceptance [--only NAME_SUBSTRING]\n";
      return 2;
    }
  }

  const std::vector<Criterion> criteria{
      {"gradient-correctness", 60, gradient_correctness},
      {"compositional-gain", 600, compositional_gain},
      {"ranking-oracle", 0, ranking_oracle},
      {"som-properties", 120, som_properties},
      {"semantic-ratio-calibration", 0, semantic_ratio_calibration},
      {"fingerprint-quantization", 0, fingerprint_quantization},
      {"some-capacity-and-signal", 900, some_capacity_and_signal},
      {"reproducibility", 0, reproducibility},
      {"service-parity", 0, service_parity},
  };

  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && c.name.find(only) == std::string::npos) continue;
    ++ran;
    const auto start = Clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    std::string timing = fmt(secs, 3) + "s";
    if (c.time_limit_s > 0) {
      timing += " of " + fmt(c.time_limit_s, 4) + "s allowed";
      if (secs >= c.time_limit_s) {
        v.pass = false;
        v.detail += "; over the runtime bound";
      }
    }
    if (!v.pass) ++failed;
    std::cout << (v.pass ? "PASS " : "FAIL ") << c.name << ": " << v.detail << " [" << timing << "]" << std::endl;
  }
  if (ran == 0) {
    std::cerr << "no criterion matches '" << only << "'\n";
    return 2;
  }
  std::cout << (failed ? "FAILED " : "ALL PASSED ") << ran - failed << "/" << ran << " criteria" << std::endl;
  return failed ? 1 : 0;
}
