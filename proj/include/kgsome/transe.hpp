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

// Translation embeddings trained on path queries.
//
// A query s/r1/.../rk is answered by translating the source vector through
// each relation, T_r(v) = v + w_r, and comparing the result with a candidate
// through the membership operator -||v - x_t||^2. Training minimizes the
// max-margin objective
//
//   J = sum_i sum_{t' in N(q_i)} [margin - (score(q_i, t_i) - score(q_i, t'))]_+
//
// with AdaGrad, per-example median gradient clipping, and a unit-ball
// constraint on entity vectors (relation vectors are unconstrained).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "kgsome/errors.hpp"
#include "kgsome/graph.hpp"
#include "kgsome/matrix.hpp"
#include "kgsome/path_sampler.hpp"
#include "kgsome/random.hpp"

namespace kgsome {

enum class TrainMode { single_edge, compositional };

inline const char* to_string(TrainMode m) { return m == TrainMode::single_edge ? "single" : "comp"; }

inline TrainMode parse_train_mode(std::string_view s) {
  if (s == "single" || s == "single-edge") return TrainMode::single_edge;
  if (s == "comp" || s == "compositional") return TrainMode::compositional;
  throw ConfigError("unknown training mode '" + std::string(s) + "'");
}

struct TrainConfig {
  int dim = 50;
  double margin = 1.0;
  int batch_size = 100;
  double step_size = 0.01;
  int negatives = 10;
  double init_variance = 0.25;
  double clip_factor = 3.0;
  std::size_t clip_window = 1000;
  int epochs = 10;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::compositional;

  void validate() const {
    if (dim <= 0) throw ConfigError("dim must be positive");
    if (!(margin > 0.0)) throw ConfigError("margin must be positive");
    if (batch_size <= 0) throw ConfigError("batch size must be positive");
    if (!(step_size > 0.0)) throw ConfigError("step size must be positive");
    if (negatives <= 0) throw ConfigError("negatives per example must be positive");
    if (!(init_variance > 0.0)) throw ConfigError("init variance must be positive");
    if (!(clip_factor > 0.0) || clip_window == 0) throw ConfigError("clipping parameters must be positive");
    if (epochs < 0) throw ConfigError("epochs must be non-negative");
  }
};

// Parameter set: one d-vector per entity and one translation per relation.
class EmbeddingModel {
 public:
  EmbeddingModel() = default;
  EmbeddingModel(std::size_t entities, std::size_t relations, std::size_t dim)
      : entities_(entities, dim), relations_(relations, dim) {}

  std::size_t dim() const noexcept { return entities_.cols; }
  std::size_t entity_count() const noexcept { return entities_.rows; }
  std::size_t relation_count() const noexcept { return relations_.rows; }

  std::span<double> entity(EntityId e) { return entities_.row(check_e(e)); }
  std::span<const double> entity(EntityId e) const { return entities_.row(check_e(e)); }
  std::span<double> relation(RelationId r) { return relations_.row(check_r(r)); }
  std::span<const double> relation(RelationId r) const { return relations_.row(check_r(r)); }

  Matrix& entity_matrix() noexcept { return entities_; }
  const Matrix& entity_matrix() const noexcept { return entities_; }
  Matrix& relation_matrix() noexcept { return relations_; }
  const Matrix& relation_matrix() const noexcept { return relations_; }

  bool operator==(const EmbeddingModel&) const = default;

 private:
  std::size_t check_e(EntityId e) const {
    if (e >= entities_.rows) throw LookupError("unknown entity id " + std::to_string(e));
    return e;
  }
  std::size_t check_r(RelationId r) const {
    if (r >= relations_.rows) throw LookupError("unknown relation id " + std::to_string(r));
    return r;
  }

  Matrix entities_;
  Matrix relations_;
};

inline void project_to_unit_ball(std::span<double> v) {
  const double n = norm(v);
  if (n > 1.0)
    for (auto& x : v) x /= n;
}

inline EmbeddingModel init_model(std::size_t entities, std::size_t relations, const TrainConfig& config) {
  config.validate();
  if (entities == 0 || relations == 0) throw ConfigError("vocabularies must be non-empty");
  EmbeddingModel m(entities, relations, static_cast<std::size_t>(config.dim));
  Rng rng(derive_seed(config.seed, {0x1417u}));
  std::normal_distribution<double> gauss(0.0, std::sqrt(config.init_variance));
  for (auto& x : m.entity_matrix().data) x = gauss(rng);
  for (auto& x : m.relation_matrix().data) x = gauss(rng);
  for (std::size_t e = 0; e < entities; ++e) project_to_unit_ball(m.entity(static_cast<EntityId>(e)));
  return m;
}

inline EmbeddingModel init_model(const KnowledgeGraph& graph, const TrainConfig& config) {
  return init_model(graph.entity_count(), graph.relation_count(), config);
}

// Membership operator: -||v - x||^2.
inline double membership(std::span<const double> v, std::span<const double> x) { return -squared_distance(v, x); }

inline std::vector<double> traverse(const EmbeddingModel& m, std::span<const double> v, RelationId r) {
  const auto w = m.relation(r);
  if (v.size() != w.size()) throw ShapeError("vector dimension does not match model");
  std::vector<double> out(v.begin(), v.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += w[i];
  return out;
}

// x_s + sum_i w_ri.
inline std::vector<double> path_vector(const EmbeddingModel& m, EntityId source, std::span<const RelationId> relations) {
  const auto xs = m.entity(source);
  std::vector<double> v(xs.begin(), xs.end());
  for (auto r : relations) {
    const auto w = m.relation(r);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += w[i];
  }
  return v;
}

inline double score_triple(const EmbeddingModel& m, EntityId h, RelationId r, EntityId t) {
  const auto xh = m.entity(h);
  const auto w = m.relation(r);
  const auto xt = m.entity(t);
  double s = 0.0;
  for (std::size_t i = 0; i < xh.size(); ++i) {
    const double d = xh[i] + w[i] - xt[i];
    s += d * d;
  }
  return -s;
}

inline double score_path(const EmbeddingModel& m, EntityId source, std::span<const RelationId> relations, EntityId t) {
  if (relations.empty()) throw ValidationError("path query needs at least one relation");
  if (relations.size() == 1) return score_triple(m, source, relations.front(), t);
  return membership(path_vector(m, source, relations), m.entity(t));
}

inline double score_path(const EmbeddingModel& m, const PathQuery& q, EntityId t) {
  return score_path(m, q.source, q.relations, t);
}

inline double hinge_loss(const EmbeddingModel& m, const PathQuery& q, EntityId t, EntityId t_neg, double margin = 1.0) {
  return std::max(0.0, margin - (score_path(m, q, t) - score_path(m, q, t_neg)));
}

// k negatives drawn uniformly (without replacement) from the entities outside
// the sorted answer set `answers`.
inline std::vector<EntityId> sample_negatives(std::size_t entity_count, std::span<const EntityId> answers, std::size_t k,
                                              Rng& rng) {
  if (entity_count < answers.size() + k)
    throw SamplingError("only " + std::to_string(entity_count - answers.size()) +
                        " non-answer entities available for " + std::to_string(k) + " negatives");
  std::vector<EntityId> out;
  out.reserve(k);
  while (out.size() < k) {
    const auto e = static_cast<EntityId>(uniform_index(rng, entity_count));
    if (std::binary_search(answers.begin(), answers.end(), e)) continue;
    if (std::find(out.begin(), out.end(), e) != out.end()) continue;
    out.push_back(e);
  }
  return out;
}

inline std::vector<EntityId> sample_negatives(const KnowledgeGraph& graph, const PathQuery& q, std::size_t k,
                                              std::uint64_t seed) {
  const auto answers = answer_set(graph, q.source, q.relations);
  Rng rng(seed);
  return sample_negatives(graph.entity_count(), answers, k, rng);
}

// Seed the trainer uses for the negatives of example `index` in `epoch`.
inline std::uint64_t negative_seed(std::uint64_t seed, std::size_t epoch, std::size_t index) {
  return derive_seed(seed, {0x4e67u, epoch, index});
}

// Gradient of one example's loss, restricted to the rows it touches.
class ExampleGradient {
 public:
  explicit ExampleGradient(std::size_t dim = 0) : dim_(dim) {}

  void clear() {
    ent_ids_.clear();
    rel_ids_.clear();
    ent_.clear();
    rel_.clear();
  }

  void add_entity(EntityId id, double coeff, std::span<const double> g) { add(ent_ids_, ent_, id, coeff, g); }
  void add_relation(RelationId id, double coeff, std::span<const double> g) { add(rel_ids_, rel_, id, coeff, g); }

  double norm() const {
    double s = 0.0;
    for (double v : ent_) s += v * v;
    for (double v : rel_) s += v * v;
    return std::sqrt(s);
  }

  void scale(double f) {
    for (auto& v : ent_) v *= f;
    for (auto& v : rel_) v *= f;
  }

  bool empty() const { return ent_ids_.empty() && rel_ids_.empty(); }
  std::size_t dim() const { return dim_; }
  const std::vector<EntityId>& entity_ids() const { return ent_ids_; }
  const std::vector<RelationId>& relation_ids() const { return rel_ids_; }
  std::span<const double> entity_row(std::size_t i) const { return {ent_.data() + i * dim_, dim_}; }
  std::span<const double> relation_row(std::size_t i) const { return {rel_.data() + i * dim_, dim_}; }

 private:
  void add(std::vector<std::uint32_t>& ids, std::vector<double>& rows, std::uint32_t id, double coeff,
           std::span<const double> g) {
    std::size_t slot = 0;
    while (slot < ids.size() && ids[slot] != id) ++slot;
    if (slot == ids.size()) {
      ids.push_back(id);
      rows.resize(rows.size() + dim_, 0.0);
    }
    double* row = rows.data() + slot * dim_;
    for (std::size_t i = 0; i < dim_; ++i) row[i] += coeff * g[i];
  }

  std::size_t dim_;
  std::vector<EntityId> ent_ids_;
  std::vector<RelationId> rel_ids_;
  std::vector<double> ent_;
  std::vector<double> rel_;
};

// Loss of one query against its negatives; accumulates the analytic gradient
// into `grad` when given. With u = x_s + sum w_r and an active hinge term,
//   dl/du = 2 (x_t' - x_t),  dl/dx_t = -2 (u - x_t),  dl/dx_t' = 2 (u - x_t').
inline double example_loss(const EmbeddingModel& m, const PathQuery& q, std::span<const EntityId> negatives,
                           double margin, ExampleGradient* grad = nullptr) {
  if (q.relations.empty()) throw ValidationError("path query needs at least one relation");
  const auto u = path_vector(m, q.source, q.relations);
  const auto xt = m.entity(q.answer);
  const double pos = squared_distance(u, xt);
  const std::size_t d = u.size();
  std::vector<double> du(d, 0.0), diff(d);
  double loss = 0.0;
  bool any = false;
  for (auto neg : negatives) {
    const auto xn = m.entity(neg);
    const double l = margin + pos - squared_distance(u, xn);
    if (!(l > 0.0)) continue;
    loss += l;
    if (!grad) continue;
    any = true;
    for (std::size_t i = 0; i < d; ++i) {
      du[i] += 2.0 * (xn[i] - xt[i]);
      diff[i] = u[i] - xt[i];
    }
    grad->add_entity(q.answer, -2.0, diff);
    for (std::size_t i = 0; i < d; ++i) diff[i] = u[i] - xn[i];
    grad->add_entity(neg, 2.0, diff);
  }
  if (grad && any) {
    grad->add_entity(q.source, 1.0, du);
    for (auto r : q.relations) grad->add_relation(r, 1.0, du);
  }
  return loss;
}

// J over a fixed set of (query, negatives) pairs.
inline double objective(const EmbeddingModel& m, std::span<const PathQuery> queries,
                        std::span<const std::vector<EntityId>> negatives, double margin) {
  if (queries.size() != negatives.size()) throw ValidationError("one negative list per query required");
  double j = 0.0;
  for (std::size_t i = 0; i < queries.size(); ++i) j += example_loss(m, queries[i], negatives[i], margin);
  return j;
}

// Dense gradient of `objective`, laid out like the model.
inline EmbeddingModel objective_gradient(const EmbeddingModel& m, std::span<const PathQuery> queries,
                                         std::span<const std::vector<EntityId>> negatives, double margin) {
  EmbeddingModel g(m.entity_count(), m.relation_count(), m.dim());
  ExampleGradient eg(m.dim());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    eg.clear();
    example_loss(m, queries[i], negatives[i], margin, &eg);
    for (std::size_t k = 0; k < eg.entity_ids().size(); ++k) {
      auto row = g.entity(eg.entity_ids()[k]);
      const auto src = eg.entity_row(k);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] += src[j];
    }
    for (std::size_t k = 0; k < eg.relation_ids().size(); ++k) {
      auto row = g.relation(eg.relation_ids()[k]);
      const auto src = eg.relation_row(k);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] += src[j];
    }
  }
  return g;
}

// Sliding window of observed per-example gradient norms. A gradient whose norm
// exceeds factor * median is rescaled to the median.
class GradientClipState {
 public:
  GradientClipState(std::size_t window = 1000, double factor = 3.0) : capacity_(window), factor_(factor) {}

  void observe(double n) {
    window_.push_back(n);
    if (window_.size() > capacity_) window_.pop_front();
  }

  double median() const {
    if (window_.empty()) return 0.0;
    std::vector<double> v(window_.begin(), window_.end());
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    if (v.size() % 2 == 1) return v[mid];
    const double hi = v[mid];
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
  }

  // Records `n` and returns the factor to apply to that gradient.
  double clip_scale(double n) {
    observe(n);
    const double med = median();
    if (n > factor_ * med && n > 0.0) return med / n;
    return 1.0;
  }

  std::size_t size() const noexcept { return window_.size(); }
  double factor() const noexcept { return factor_; }
  const std::deque<double>& window() const noexcept { return window_; }

 private:
  std::size_t capacity_;
  double factor_;
  std::deque<double> window_;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // J summed over the epoch's examples
  std::size_t updates = 0;         // examples with a non-zero gradient
  std::size_t clipped = 0;
  // Largest ratio of an applied per-example gradient norm to the median in
  // force when it was applied.
  double max_applied_over_median = 0.0;
};

namespace detail {
inline void adagrad_row(std::span<double> param, std::span<double> accum, std::span<const double> g, double step) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    accum[i] += g[i] * g[i];
    param[i] -= step * g[i] / (std::sqrt(accum[i]) + 1e-8);
  }
}
}  // namespace detail

// Mini-batch AdaGrad on J. Negatives for example i of epoch e are drawn from
// `graph` (filtered against the train answer set) with negative_seed(seed, e, i),
// and epoch_loss[e] is J evaluated at the parameters in force when each batch
// was drawn. Entity vectors are re-projected onto the unit ball after each batch.
inline TrainReport train(EmbeddingModel& model, std::span<const PathQuery> queries, const KnowledgeGraph& graph,
                         const TrainConfig& config) {
  config.validate();
  if (model.dim() != static_cast<std::size_t>(config.dim)) throw ConfigError("model dimension differs from config");
  if (model.entity_count() != graph.entity_count() || model.relation_count() != graph.relation_count())
    throw ConfigError("model vocabulary differs from graph");

  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < queries.size(); ++i)
    if (config.mode == TrainMode::compositional || queries[i].length() == 1) active.push_back(i);
  if (active.empty()) throw TrainingError("no training queries for the selected mode");

  std::vector<std::vector<EntityId>> answers(queries.size());
  for (auto i : active) answers[i] = answer_set(graph, queries[i].source, queries[i].relations);

  const std::size_t d = model.dim();
  Matrix ent_accum(model.entity_count(), d), rel_accum(model.relation_count(), d);
  Matrix ent_grad(model.entity_count(), d), rel_grad(model.relation_count(), d);
  std::vector<char> ent_touched(model.entity_count(), 0), rel_touched(model.relation_count(), 0);
  std::vector<EntityId> ent_list;
  std::vector<RelationId> rel_list;

  GradientClipState clip(config.clip_window, config.clip_factor);
  ExampleGradient eg(d);
  TrainReport report;
  std::vector<EntityId> negatives;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order = active;
    Rng shuffle_rng(derive_seed(config.seed, {0x5f1eu, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t i = order[b];
        Rng neg_rng(negative_seed(config.seed, static_cast<std::size_t>(epoch), i));
        negatives = sample_negatives(model.entity_count(), answers[i], static_cast<std::size_t>(config.negatives), neg_rng);
        eg.clear();
        const double l = example_loss(model, queries[i], negatives, config.margin, &eg);
        if (!std::isfinite(l))
          throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", example " + std::to_string(i));
        epoch_loss += l;
        if (eg.empty()) continue;
        const double n = eg.norm();
        if (!(n > 0.0)) continue;
        const double s = clip.clip_scale(n);
        if (s < 1.0) {
          eg.scale(s);
          ++report.clipped;
        }
        ++report.updates;
        const double med = clip.median();
        if (med > 0.0) report.max_applied_over_median = std::max(report.max_applied_over_median, n * s / med);

        for (std::size_t k = 0; k < eg.entity_ids().size(); ++k) {
          const auto id = eg.entity_ids()[k];
          if (!ent_touched[id]) {
            ent_touched[id] = 1;
            ent_list.push_back(id);
          }
          auto row = ent_grad.row(id);
          const auto src = eg.entity_row(k);
          for (std::size_t j = 0; j < d; ++j) row[j] += src[j];
        }
        for (std::size_t k = 0; k < eg.relation_ids().size(); ++k) {
          const auto id = eg.relation_ids()[k];
          if (!rel_touched[id]) {
            rel_touched[id] = 1;
            rel_list.push_back(id);
          }
          auto row = rel_grad.row(id);
          const auto src = eg.relation_row(k);
          for (std::size_t j = 0; j < d; ++j) row[j] += src[j];
        }
      }

      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      for (auto id : ent_list) {
        auto g = ent_grad.row(id);
        for (auto& v : g) v *= inv_batch;
        detail::adagrad_row(model.entity(id), ent_accum.row(id), g, config.step_size);
        project_to_unit_ball(model.entity(id));
        std::fill(g.begin(), g.end(), 0.0);
        ent_touched[id] = 0;
      }
      for (auto id : rel_list) {
        auto g = rel_grad.row(id);
        for (auto& v : g) v *= inv_batch;
        detail::adagrad_row(model.relation(id), rel_accum.row(id), g, config.step_size);
        std::fill(g.begin(), g.end(), 0.0);
        rel_touched[id] = 0;
      }
      ent_list.clear();
      rel_list.clear();
    }
    if (!std::isfinite(epoch_loss)) throw TrainingError("non-finite epoch loss at epoch " + std::to_string(epoch));
    report.epoch_loss.push_back(epoch_loss);
  }
  return report;
}

struct RankedEntity {
  EntityId entity = 0;
  double score = 0.0;
  bool operator==(const RankedEntity&) const = default;
};

// Top-k answers to s/r1/.../rL by descending score; ties by entity index.
inline std::vector<RankedEntity> top_k_answers(const EmbeddingModel& m, EntityId source,
                                               std::span<const RelationId> relations, std::size_t k) {
  const auto u = path_vector(m, source, relations);
  if (relations.empty()) throw ValidationError("path query needs at least one relation");
  std::vector<RankedEntity> all(m.entity_count());
  for (EntityId e = 0; e < all.size(); ++e) all[e] = {e, membership(u, m.entity(e))};
  k = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                    [](const RankedEntity& a, const RankedEntity& b) {
                      return a.score != b.score ? a.score > b.score : a.entity < b.entity;
                    });
  all.resize(k);
  return all;
}

// Entities nearest to sum(x_plus) - sum(x_minus), query entities excluded.
// `score` holds the Euclidean distance; ties by entity index.
inline std::vector<RankedEntity> analogy_query(const EmbeddingModel& m, std::span<const EntityId> plus,
                                               std::span<const EntityId> minus, std::size_t k) {
  if (k < 1) throw ValidationError("k must be at least 1");
  std::vector<double> v(m.dim(), 0.0);
  for (auto e : plus) {
    const auto x = m.entity(e);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += x[i];
  }
  for (auto e : minus) {
    const auto x = m.entity(e);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= x[i];
  }
  std::vector<char> excluded(m.entity_count(), 0);
  for (auto e : plus) excluded[e] = 1;
  for (auto e : minus) excluded[e] = 1;
  std::vector<RankedEntity> all;
  all.reserve(m.entity_count());
  for (EntityId e = 0; e < m.entity_count(); ++e)
    if (!excluded[e]) all.push_back({e, std::sqrt(squared_distance(v, m.entity(e)))});
  k = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                    [](const RankedEntity& a, const RankedEntity& b) {
                      return a.score != b.score ? a.score < b.score : a.entity < b.entity;
                    });
  all.resize(k);
  return all;
}

}  // namespace kgsome
