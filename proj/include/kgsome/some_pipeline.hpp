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

// Embeddings -> SOM fingerprints -> CNN interaction classifier.
//
// Each (compound, gene) pair becomes a two-channel image: channel 0 is the
// compound's fingerprint on the compound-trained map, channel 1 the gene's
// fingerprint on the gene-trained map. Images are average-pooled to the
// network input size, or optionally cut into toroidal windows.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "kgsome/convnet.hpp"
#include "kgsome/errors.hpp"
#include "kgsome/fingerprint.hpp"
#include "kgsome/graph.hpp"
#include "kgsome/som.hpp"
#include "kgsome/transe.hpp"

namespace kgsome {

struct WindowSpec {
  int height = 8;
  int width = 8;
  int step_rows = 8;
  int step_cols = 8;
};

// Windows anchored at every (i*step_rows, j*step_cols), wrapping around the
// map edges. Each window is a (1, height, width) tensor of band values.
inline std::vector<Tensor> extract_windows(const Fingerprint& fp, const WindowSpec& w) {
  if (w.height < 1 || w.width < 1 || w.step_rows < 1 || w.step_cols < 1)
    throw ConfigError("window sizes and steps must be positive");
  if (w.height > fp.height || w.width > fp.width) throw ShapeError("window larger than map");
  std::vector<Tensor> out;
  for (int r0 = 0; r0 < fp.height; r0 += w.step_rows)
    for (int c0 = 0; c0 < fp.width; c0 += w.step_cols) {
      Tensor t({1, static_cast<std::size_t>(w.height), static_cast<std::size_t>(w.width)});
      for (int i = 0; i < w.height; ++i)
        for (int j = 0; j < w.width; ++j)
          t.values[static_cast<std::size_t>(i) * w.width + j] = fp.at((r0 + i) % fp.height, (c0 + j) % fp.width);
      out.push_back(std::move(t));
    }
  return out;
}

// Area-weighted average pooling of an h x w plane onto out_h x out_w; the
// plane mean is preserved exactly.
inline std::vector<double> downsample(std::span<const double> plane, int h, int w, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1 || out_h > h || out_w > w) throw ShapeError("downsample target must fit the source");
  const double sy = static_cast<double>(h) / out_h, sx = static_cast<double>(w) / out_w;
  std::vector<double> out(static_cast<std::size_t>(out_h) * out_w, 0.0);
  for (int oi = 0; oi < out_h; ++oi) {
    const double y0 = oi * sy, y1 = (oi + 1) * sy;
    for (int oj = 0; oj < out_w; ++oj) {
      const double x0 = oj * sx, x1 = (oj + 1) * sx;
      double acc = 0.0;
      for (int i = static_cast<int>(std::floor(y0)); i < h && i < y1; ++i) {
        const double wy = std::min<double>(i + 1, y1) - std::max<double>(i, y0);
        if (wy <= 0.0) continue;
        for (int j = static_cast<int>(std::floor(x0)); j < w && j < x1; ++j) {
          const double wx = std::min<double>(j + 1, x1) - std::max<double>(j, x0);
          if (wx <= 0.0) continue;
          acc += wy * wx * plane[static_cast<std::size_t>(i) * w + j];
        }
      }
      out[static_cast<std::size_t>(oi) * out_w + oj] = acc / (sy * sx);
    }
  }
  return out;
}

inline std::vector<double> fingerprint_plane(const Fingerprint& fp) {
  return std::vector<double>(fp.cells.begin(), fp.cells.end());
}

struct SomePair {
  EntityId compound = 0;
  EntityId gene = 0;
  int label = 0;
  Tensor input;  // (2, H, W)
};

struct SomeDatasetConfig {
  BandThresholds compound_thresholds;
  BandThresholds gene_thresholds;
  double neg_ratio = 1.0;
  int out_height = 24;
  int out_width = 24;
  // When set, every pair is cut into windows instead of downsampled; each
  // window inherits the pair's label.
  std::optional<WindowSpec> window;
  // Relation -> class (>= 1). When non-empty, positives are labelled with the
  // class of their lowest-id mapped relation and pairs without one are dropped.
  std::map<RelationId, int> relation_class;
  // Seeded subsample of the positives; 0 keeps all of them.
  std::size_t max_positives = 0;
  std::uint64_t seed = 0;
};

namespace detail {
inline Tensor stack_channels(const std::vector<double>& a, const std::vector<double>& b, std::size_t h, std::size_t w) {
  Tensor t({2, h, w});
  std::copy(a.begin(), a.end(), t.values.begin());
  std::copy(b.begin(), b.end(), t.values.begin() + static_cast<std::ptrdiff_t>(h * w));
  return t;
}
}  // namespace detail

// Positives are all (compound, gene) pairs joined by at least one triple;
// negatives are seeded uniform non-interacting pairs, neg_ratio per positive.
inline std::vector<SomePair> build_some_dataset(const KnowledgeGraph& graph, const EmbeddingModel& model,
                                                const SomGrid& compound_grid, const SomGrid& gene_grid,
                                                const RolePartition& roles, const SomeDatasetConfig& cfg) {
  if (compound_grid.width() != gene_grid.width() || compound_grid.height() != gene_grid.height())
    throw ShapeError("compound and gene maps must have equal dimensions");
  if (roles.compounds.empty() || roles.genes.empty()) throw DatasetError("need at least one compound and one gene");
  if (!(cfg.neg_ratio >= 0.0)) throw ConfigError("negative ratio must be non-negative");
  if (!cfg.window && (cfg.out_height < 1 || cfg.out_width < 1 || cfg.out_height > compound_grid.height() ||
                      cfg.out_width > compound_grid.width()))
    throw ShapeError("downsample target must fit the map");

  std::vector<char> is_gene(graph.entity_count(), 0);
  for (auto g : roles.genes) is_gene[g] = 1;

  struct Candidate {
    EntityId c, g;
    int label;
  };
  std::vector<Candidate> pairs;
  std::set<std::pair<EntityId, EntityId>> interacting;
  for (auto c : roles.compounds)
    for (auto g : graph.neighbors(c)) {
      if (!is_gene[g] || g == c) continue;
      interacting.insert({c, g});
      int label = 1;
      if (!cfg.relation_class.empty()) {
        label = 0;
        for (auto r : graph.incident(c)) {
          const auto t = graph.tails(c, r);
          if (!std::binary_search(t.begin(), t.end(), g)) continue;
          auto it = cfg.relation_class.find(r);
          if (it != cfg.relation_class.end()) {
            label = it->second;
            break;
          }
        }
        if (label == 0) continue;
      }
      pairs.push_back({c, g, label});
    }
  if (pairs.empty()) throw DatasetError("graph has no compound-gene interactions");
  if (cfg.max_positives > 0 && pairs.size() > cfg.max_positives) {
    Rng pick(derive_seed(cfg.seed, {0x9051u}));
    std::shuffle(pairs.begin(), pairs.end(), pick);
    pairs.resize(cfg.max_positives);
  }

  const auto want = static_cast<std::size_t>(std::llround(cfg.neg_ratio * static_cast<double>(pairs.size())));
  const std::size_t available = roles.compounds.size() * roles.genes.size() - interacting.size();
  if (want > available)
    throw DatasetError("requested " + std::to_string(want) + " negatives but only " + std::to_string(available) +
                       " non-interacting pairs exist");
  Rng rng(derive_seed(cfg.seed, {0x0e9au}));
  std::set<std::pair<EntityId, EntityId>> chosen;
  while (chosen.size() < want) {
    const auto c = roles.compounds[uniform_index(rng, roles.compounds.size())];
    const auto g = roles.genes[uniform_index(rng, roles.genes.size())];
    if (c == g || interacting.count({c, g}) || !chosen.insert({c, g}).second) continue;
    pairs.push_back({c, g, 0});
  }

  std::map<EntityId, Fingerprint> cfp, gfp;
  const auto compound_fp = [&](EntityId e) -> const Fingerprint& {
    auto it = cfp.find(e);
    if (it == cfp.end())
      it = cfp.emplace(e, entity_fingerprint(compound_grid, model.entity(e), cfg.compound_thresholds)).first;
    return it->second;
  };
  const auto gene_fp = [&](EntityId e) -> const Fingerprint& {
    auto it = gfp.find(e);
    if (it == gfp.end()) it = gfp.emplace(e, entity_fingerprint(gene_grid, model.entity(e), cfg.gene_thresholds)).first;
    return it->second;
  };

  std::vector<SomePair> out;
  const int h = compound_grid.height(), w = compound_grid.width();
  for (const auto& p : pairs) {
    const auto& a = compound_fp(p.c);
    const auto& b = gene_fp(p.g);
    if (cfg.window) {
      const auto wa = extract_windows(a, *cfg.window);
      const auto wb = extract_windows(b, *cfg.window);
      for (std::size_t k = 0; k < wa.size(); ++k)
        out.push_back({p.c, p.g, p.label,
                       detail::stack_channels(wa[k].values, wb[k].values, static_cast<std::size_t>(cfg.window->height),
                                              static_cast<std::size_t>(cfg.window->width))});
    } else {
      const auto da = downsample(fingerprint_plane(a), h, w, cfg.out_height, cfg.out_width);
      const auto db = downsample(fingerprint_plane(b), h, w, cfg.out_height, cfg.out_width);
      out.push_back({p.c, p.g, p.label,
                     detail::stack_channels(da, db, static_cast<std::size_t>(cfg.out_height),
                                            static_cast<std::size_t>(cfg.out_width))});
    }
  }
  return out;
}

inline std::vector<SomePair> shuffle_labels(std::vector<SomePair> data, std::uint64_t seed) {
  std::vector<int> labels;
  for (const auto& p : data) labels.push_back(p.label);
  Rng rng(derive_seed(seed, {0x1abeu}));
  std::shuffle(labels.begin(), labels.end(), rng);
  for (std::size_t i = 0; i < data.size(); ++i) data[i].label = labels[i];
  return data;
}

struct SomeRunConfig {
  double train_fraction = 0.7;
  double validation_fraction = 0.1;
  CnnTrainConfig cnn;
  Activation activation = Activation::tanh;
  // Keep the epoch with the best validation accuracy (ties: lower validation
  // loss, then the earlier epoch). Ignored without a validation split.
  bool select_by_validation = true;
  std::uint64_t seed = 0;
};

struct SomeSplit {
  std::vector<std::size_t> train, validation, test;
};

inline SomeSplit split_some_dataset(std::size_t n, const SomeRunConfig& cfg) {
  if (!(cfg.train_fraction > 0.0) || !(cfg.validation_fraction >= 0.0) ||
      !(cfg.train_fraction + cfg.validation_fraction < 1.0))
    throw ConfigError("split fractions must leave a non-empty test set");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(cfg.seed, {0x5b1u}));
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(n)));
  SomeSplit s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                      order.begin() + static_cast<std::ptrdiff_t>(std::min(n, n_train + n_val)));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(std::min(n, n_train + n_val)), order.end());
  return s;
}

struct SomeReport {
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::size_t num_classes = 0;
  std::vector<std::vector<std::size_t>> confusion;  // test set, [true][predicted]
  std::vector<double> loss_trace;
  std::size_t train_size = 0, validation_size = 0, test_size = 0;
  int selected_epoch = -1;  // zero-based; -1 when the final parameters were kept
};

struct SomeRun {
  CnnModel model;
  SomeReport report;
};

inline std::vector<LabeledTensor> select_examples(std::span<const SomePair> data, std::span<const std::size_t> idx) {
  std::vector<LabeledTensor> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back({data[i].input, data[i].label});
  return out;
}

inline std::size_t count_classes(std::span<const SomePair> data) {
  int hi = 0;
  for (const auto& p : data) hi = std::max(hi, p.label);
  return static_cast<std::size_t>(hi) + 1;
}

// Evaluates `model` on the test indices of the seeded split.
inline SomeReport evaluate_some(const CnnModel& model, std::span<const SomePair> data, const SomeSplit& split) {
  SomeReport rep;
  rep.num_classes = model.num_classes();
  const auto tr = select_examples(data, split.train), va = select_examples(data, split.validation),
             te = select_examples(data, split.test);
  rep.train_size = tr.size();
  rep.validation_size = va.size();
  rep.test_size = te.size();
  rep.train_accuracy = accuracy(model, tr);
  rep.validation_accuracy = accuracy(model, va);
  rep.test_accuracy = accuracy(model, te);
  rep.confusion.assign(rep.num_classes, std::vector<std::size_t>(rep.num_classes, 0));
  for (const auto& e : te)
    ++rep.confusion[static_cast<std::size_t>(e.label)][static_cast<std::size_t>(predict_class(model, e.input))];
  return rep;
}

// Seeded train/validation/test split, SOME network training, accuracy report.
inline SomeRun run_some(std::span<const SomePair> data, const SomeRunConfig& cfg) {
  if (data.size() < 10) throw DatasetError("SOME needs at least 10 pairs");
  const auto split = split_some_dataset(data.size(), cfg);
  const auto labels_of = [&](std::span<const std::size_t> idx) {
    std::set<int> s;
    for (auto i : idx) s.insert(data[i].label);
    return s;
  };
  if (labels_of(split.train).size() < 2 || labels_of(split.test).size() < 2)
    throw DatasetError("train or test split holds a single class");

  const auto& in = data.front().input.shape;
  if (in.size() != 3) throw ShapeError("pair tensors must be (C,H,W)");
  CnnModel model = build_some_cnn({in[0], in[1], in[2]}, std::max<std::size_t>(2, count_classes(data)), cfg.activation,
                                  derive_seed(cfg.seed, {0x1417u}));
  auto cnn_cfg = cfg.cnn;
  cnn_cfg.seed = derive_seed(cfg.seed, {0x7a1eu});
  const auto train_set = select_examples(data, split.train);
  SomeRun run{std::move(model), {}};
  if (!cfg.select_by_validation || split.validation.empty()) {
    const auto trace = train_cnn(run.model, train_set, cnn_cfg);
    run.report = evaluate_some(run.model, data, split);
    run.report.loss_trace = trace;
    return run;
  }

  const auto val = select_examples(data, split.validation);
  Tensor val_batch({val.size(), in[0], in[1], in[2]});
  std::vector<int> val_labels;
  for (std::size_t i = 0; i < val.size(); ++i) {
    std::copy(val[i].input.values.begin(), val[i].input.values.end(),
              val_batch.values.begin() + static_cast<std::ptrdiff_t>(i * val[i].input.size()));
    val_labels.push_back(val[i].label);
  }
  std::optional<CnnModel> best;
  double best_acc = -1.0, best_loss = 0.0;
  int best_epoch = -1;
  const auto trace = train_cnn(run.model, train_set, cnn_cfg, [&](int epoch, const CnnModel& m) {
    const double acc = accuracy(m, val);
    const double loss = cross_entropy(m, val_batch, val_labels);
    if (acc > best_acc || (acc == best_acc && loss < best_loss)) {
      best = m;
      best_acc = acc;
      best_loss = loss;
      best_epoch = epoch;
    }
  });
  if (best) run.model = std::move(*best);
  run.report = evaluate_some(run.model, data, split);
  run.report.loss_trace = trace;
  run.report.selected_epoch = best_epoch;
  return run;
}

}  // namespace kgsome
