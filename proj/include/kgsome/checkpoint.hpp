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

// Checkpoints are JSON documents:
//
//   { "format": "kgsome", "version": 1, "kind": "<kind>", "metadata": {...}, ... }
//
// Doubles are written with shortest round-trip precision, so load(save(x))
// reproduces every numeric value bit for bit.

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "kgsome/convnet.hpp"
#include "kgsome/errors.hpp"
#include "kgsome/fingerprint.hpp"
#include "kgsome/graph.hpp"
#include "kgsome/some_pipeline.hpp"
#include "kgsome/som.hpp"
#include "kgsome/transe.hpp"

namespace kgsome {

using json = nlohmann::json;

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "kgsome";

inline json document_header(const std::string& kind, json metadata = json::object()) {
  return json{{"format", kCheckpointFormat}, {"version", kCheckpointVersion}, {"kind", kind}, {"metadata", std::move(metadata)}};
}

// Writes through a temporary file and renames, so readers never observe a
// half-written document.
inline void write_document(const std::filesystem::path& path, const json& doc) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open '" + tmp.string() + "' for writing");
    out << doc.dump(1) << '\n';
    if (!out) throw CheckpointError("write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

inline json read_document(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::exception& e) {
    throw CheckpointError("'" + path.string() + "' is not a valid document: " + e.what());
  }
}

// Checks format, version and kind; returns the document for further decoding.
inline const json& expect_kind(const json& doc, const std::string& kind) {
  if (!doc.is_object() || doc.value("format", "") != kCheckpointFormat)
    throw CheckpointError("not a kgsome document");
  if (!doc.contains("version") || !doc["version"].is_number_integer())
    throw VersionError("document has no version field");
  if (doc["version"].get<int>() != kCheckpointVersion)
    throw VersionError("unsupported document version " + std::to_string(doc["version"].get<int>()));
  const auto actual = doc.value("kind", "");
  if (actual != kind) throw KindMismatchError("expected a '" + kind + "' document, found '" + actual + "'");
  return doc;
}

namespace detail {
template <typename T>
T field(const json& j, const char* name) {
  if (!j.contains(name)) throw CheckpointError(std::string("missing field '") + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("field '") + name + "': " + e.what());
  }
}

inline std::vector<double> finite_array(const json& j, const char* name, std::size_t expected) {
  auto v = field<std::vector<double>>(j, name);
  if (v.size() != expected)
    throw CheckpointError(std::string("field '") + name + "' holds " + std::to_string(v.size()) + " values, expected " +
                          std::to_string(expected));
  for (double x : v)
    if (!std::isfinite(x)) throw CheckpointError(std::string("field '") + name + "' holds a non-finite value");
  return v;
}
}  // namespace detail

// --- knowledge graph snapshot -------------------------------------------------

inline json graph_to_json(const KnowledgeGraph& g) {
  json triples = json::array();
  for (const auto& t : g.triples()) triples.push_back({t.head, t.relation, t.tail});
  auto doc = document_header("graph");
  doc["entities"] = g.entities().names();
  doc["relations"] = g.relations().names();
  doc["triples"] = std::move(triples);
  return doc;
}

inline KnowledgeGraph graph_from_json(const json& doc) {
  expect_kind(doc, "graph");
  KnowledgeGraph g;
  for (const auto& n : detail::field<std::vector<std::string>>(doc, "entities")) g.add_entity(n);
  for (const auto& n : detail::field<std::vector<std::string>>(doc, "relations")) g.add_relation(n);
  for (const auto& t : detail::field<std::vector<std::array<std::uint32_t, 3>>>(doc, "triples")) {
    try {
      g.add_triple({t[0], t[1], t[2]});
    } catch (const LookupError& e) {
      throw CheckpointError(std::string("graph snapshot: ") + e.what());
    }
  }
  return g;
}

// --- embedding model ------------------------------------------------------------

struct EmbeddingCheckpoint {
  EmbeddingModel model;
  std::vector<std::string> entities;
  std::vector<std::string> relations;
  json metadata = json::object();
};

inline json config_to_json(const TrainConfig& c) {
  return {{"dim", c.dim},           {"margin", c.margin},         {"batch_size", c.batch_size},
          {"step_size", c.step_size}, {"negatives", c.negatives},   {"init_variance", c.init_variance},
          {"clip_factor", c.clip_factor}, {"clip_window", c.clip_window}, {"epochs", c.epochs},
          {"seed", c.seed},         {"mode", to_string(c.mode)}};
}

inline json embedding_to_json(const EmbeddingCheckpoint& c) {
  auto doc = document_header("embedding", c.metadata);
  doc["dim"] = c.model.dim();
  doc["entities"] = c.entities;
  doc["relations"] = c.relations;
  doc["entity_vectors"] = c.model.entity_matrix().data;
  doc["relation_vectors"] = c.model.relation_matrix().data;
  return doc;
}

inline EmbeddingCheckpoint embedding_from_json(const json& doc) {
  expect_kind(doc, "embedding");
  EmbeddingCheckpoint c;
  c.metadata = doc.value("metadata", json::object());
  const auto dim = detail::field<std::size_t>(doc, "dim");
  if (dim == 0) throw CheckpointError("embedding dimension must be positive");
  c.entities = detail::field<std::vector<std::string>>(doc, "entities");
  c.relations = detail::field<std::vector<std::string>>(doc, "relations");
  c.model = EmbeddingModel(c.entities.size(), c.relations.size(), dim);
  c.model.entity_matrix().data = detail::finite_array(doc, "entity_vectors", c.entities.size() * dim);
  c.model.relation_matrix().data = detail::finite_array(doc, "relation_vectors", c.relations.size() * dim);
  for (std::size_t e = 0; e < c.entities.size(); ++e)
    if (norm(c.model.entity(static_cast<EntityId>(e))) > 1.0 + 1e-9)
      throw CheckpointError("entity '" + c.entities[e] + "' lies outside the unit ball");
  return c;
}

// Graph whose vocabularies start with the checkpoint's, so ids agree with the
// model. Triples added later must only use those names.
inline KnowledgeGraph graph_with_vocab(const EmbeddingCheckpoint& c) {
  KnowledgeGraph g;
  for (const auto& n : c.entities) g.add_entity(n);
  for (const auto& n : c.relations) g.add_relation(n);
  return g;
}

// --- SOM ------------------------------------------------------------------------

struct SomCheckpoint {
  SomGrid grid;
  std::vector<int> cluster_labels;   // per cell, empty if not clustered
  std::vector<std::string> members;  // entities the map was trained on
  json metadata = json::object();
};

inline json som_to_json(const SomCheckpoint& c) {
  auto doc = document_header("som", c.metadata);
  doc["width"] = c.grid.width();
  doc["height"] = c.grid.height();
  doc["dim"] = c.grid.dim();
  doc["toroidal"] = c.grid.toroidal();
  doc["codevectors"] = c.grid.codevectors().data;
  doc["cluster_labels"] = c.cluster_labels;
  doc["members"] = c.members;
  return doc;
}

inline SomCheckpoint som_from_json(const json& doc) {
  expect_kind(doc, "som");
  SomCheckpoint c;
  c.metadata = doc.value("metadata", json::object());
  const auto w = detail::field<int>(doc, "width"), h = detail::field<int>(doc, "height");
  const auto dim = detail::field<std::size_t>(doc, "dim");
  if (w < 1 || h < 1 || dim == 0) throw CheckpointError("SOM dimensions must be positive");
  c.grid = SomGrid(w, h, dim, detail::field<bool>(doc, "toroidal"));
  c.grid.codevectors().data = detail::finite_array(doc, "codevectors", c.grid.cell_count() * dim);
  c.cluster_labels = doc.value("cluster_labels", std::vector<int>{});
  if (!c.cluster_labels.empty() && c.cluster_labels.size() != c.grid.cell_count())
    throw CheckpointError("cluster labels do not cover the grid");
  c.members = doc.value("members", std::vector<std::string>{});
  return c;
}

// --- CNN ------------------------------------------------------------------------

struct CnnCheckpoint {
  CnnModel model;
  json metadata = json::object();
};

inline json layer_to_json(const LayerSpec& l) {
  return {{"kind", to_string(l.kind)}, {"filters", l.filters}, {"kernel_h", l.kernel_h}, {"kernel_w", l.kernel_w},
          {"pool", l.pool},           {"units", l.units},      {"rate", l.rate},         {"activation", to_string(l.activation)}};
}

inline LayerSpec layer_from_json(const json& j) {
  LayerSpec l;
  try {
    l.kind = parse_layer_kind(detail::field<std::string>(j, "kind"));
    l.activation = parse_activation(detail::field<std::string>(j, "activation"));
  } catch (const ConfigError& e) {
    throw CheckpointError(e.what());
  }
  l.filters = detail::field<int>(j, "filters");
  l.kernel_h = detail::field<int>(j, "kernel_h");
  l.kernel_w = detail::field<int>(j, "kernel_w");
  l.pool = detail::field<int>(j, "pool");
  l.units = detail::field<int>(j, "units");
  l.rate = detail::field<double>(j, "rate");
  return l;
}

inline json cnn_to_json(const CnnCheckpoint& c) {
  auto doc = document_header("cnn", c.metadata);
  const auto& in = c.model.input_shape();
  doc["input_shape"] = {in.channels, in.height, in.width};
  json layers = json::array(), weights = json::array(), biases = json::array();
  for (std::size_t i = 0; i < c.model.layers().size(); ++i) {
    layers.push_back(layer_to_json(c.model.layers()[i]));
    weights.push_back(c.model.weights(i).values);
    biases.push_back(c.model.biases(i).values);
  }
  doc["layers"] = std::move(layers);
  doc["weights"] = std::move(weights);
  doc["biases"] = std::move(biases);
  return doc;
}

inline CnnCheckpoint cnn_from_json(const json& doc) {
  expect_kind(doc, "cnn");
  CnnCheckpoint c;
  c.metadata = doc.value("metadata", json::object());
  const auto in = detail::field<std::array<std::size_t, 3>>(doc, "input_shape");
  std::vector<LayerSpec> layers;
  for (const auto& l : detail::field<json>(doc, "layers")) layers.push_back(layer_from_json(l));
  try {
    c.model = CnnModel({in[0], in[1], in[2]}, layers);
  } catch (const Error& e) {
    throw CheckpointError(std::string("invalid network: ") + e.what());
  }
  const auto& w = detail::field<json>(doc, "weights");
  const auto& b = detail::field<json>(doc, "biases");
  if (!w.is_array() || !b.is_array() || w.size() != layers.size() || b.size() != layers.size())
    throw CheckpointError("one weight and bias array per layer required");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const json wi{{"w", w[i]}}, bi{{"b", b[i]}};
    c.model.weights(i).values = detail::finite_array(wi, "w", c.model.weights(i).size());
    c.model.biases(i).values = detail::finite_array(bi, "b", c.model.biases(i).size());
  }
  return c;
}

// --- SOME dataset ----------------------------------------------------------------
//
// Pair records plus every referenced fingerprint as a band string; tensors
// are rebuilt on load with the stored downsample or window settings.

inline std::string bands_to_string(const Fingerprint& fp) {
  std::string s(fp.cells.size(), '0');
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<char>('0' + fp.cells[i]);
  return s;
}

inline Fingerprint bands_from_string(const std::string& s, int width, int height, std::string subject = {}) {
  if (s.size() != static_cast<std::size_t>(width) * height) throw CheckpointError("fingerprint has the wrong size");
  Fingerprint fp{width, height, std::vector<std::uint8_t>(s.size()), std::move(subject)};
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '2') throw CheckpointError("fingerprint band outside 0..2");
    fp.cells[i] = static_cast<std::uint8_t>(s[i] - '0');
  }
  return fp;
}

inline json thresholds_to_json(const BandThresholds& t) { return {{"band2_max", t.band2_max}, {"band1_max", t.band1_max}}; }
inline BandThresholds thresholds_from_json(const json& j) {
  BandThresholds t{detail::field<double>(j, "band2_max"), detail::field<double>(j, "band1_max")};
  try {
    t.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(e.what());
  }
  return t;
}

struct DatasetDocument {
  std::vector<std::string> entities;  // vocabulary the pair ids refer to
  std::vector<SomePair> pairs;
  json metadata = json::object();
};

inline json dataset_to_json(const DatasetDocument& d, const SomGrid& compound_grid, const SomGrid& gene_grid,
                            const EmbeddingModel& model, const SomeDatasetConfig& cfg) {
  auto doc = document_header("dataset", d.metadata);
  doc["map_width"] = compound_grid.width();
  doc["map_height"] = compound_grid.height();
  doc["compound_thresholds"] = thresholds_to_json(cfg.compound_thresholds);
  doc["gene_thresholds"] = thresholds_to_json(cfg.gene_thresholds);
  if (cfg.window)
    doc["window"] = {cfg.window->height, cfg.window->width, cfg.window->step_rows, cfg.window->step_cols};
  else
    doc["downsample"] = {cfg.out_height, cfg.out_width};
  json records = json::array();
  json cfps = json::object(), gfps = json::object();
  EntityId last_c = ~EntityId{0}, last_g = ~EntityId{0};
  for (const auto& p : d.pairs) {
    if (p.compound == last_c && p.gene == last_g && cfg.window) continue;  // windows of one pair
    last_c = p.compound;
    last_g = p.gene;
    const auto& cn = d.entities.at(p.compound);
    const auto& gn = d.entities.at(p.gene);
    records.push_back({cn, gn, p.label});
    if (!cfps.contains(cn))
      cfps[cn] = bands_to_string(entity_fingerprint(compound_grid, model.entity(p.compound), cfg.compound_thresholds));
    if (!gfps.contains(gn))
      gfps[gn] = bands_to_string(entity_fingerprint(gene_grid, model.entity(p.gene), cfg.gene_thresholds));
  }
  doc["pairs"] = std::move(records);
  doc["compound_fingerprints"] = std::move(cfps);
  doc["gene_fingerprints"] = std::move(gfps);
  return doc;
}

inline DatasetDocument dataset_from_json(const json& doc) {
  expect_kind(doc, "dataset");
  DatasetDocument d;
  d.metadata = doc.value("metadata", json::object());
  const int w = detail::field<int>(doc, "map_width"), h = detail::field<int>(doc, "map_height");
  const auto& cf = detail::field<json>(doc, "compound_fingerprints");
  const auto& gf = detail::field<json>(doc, "gene_fingerprints");
  std::optional<WindowSpec> window;
  int oh = 0, ow = 0;
  if (doc.contains("window")) {
    const auto v = detail::field<std::array<int, 4>>(doc, "window");
    window = WindowSpec{v[0], v[1], v[2], v[3]};
  } else {
    const auto v = detail::field<std::array<int, 2>>(doc, "downsample");
    oh = v[0];
    ow = v[1];
  }
  std::map<std::string, EntityId> ids;
  const auto id_of = [&](const std::string& n) {
    auto [it, fresh] = ids.emplace(n, static_cast<EntityId>(d.entities.size()));
    if (fresh) d.entities.push_back(n);
    return it->second;
  };
  for (const auto& rec : detail::field<json>(doc, "pairs")) {
    if (!rec.is_array() || rec.size() != 3) throw CheckpointError("pair record must be [compound, gene, label]");
    const auto cn = rec[0].get<std::string>(), gn = rec[1].get<std::string>();
    const int label = rec[2].get<int>();
    if (label < 0) throw CheckpointError("negative pair label");
    if (!cf.contains(cn) || !gf.contains(gn)) throw CheckpointError("pair references a missing fingerprint");
    const auto a = bands_from_string(cf[cn].get<std::string>(), w, h);
    const auto b = bands_from_string(gf[gn].get<std::string>(), w, h);
    const auto c = id_of(cn), g = id_of(gn);
    try {
      if (window) {
        const auto wa = extract_windows(a, *window), wb = extract_windows(b, *window);
        for (std::size_t k = 0; k < wa.size(); ++k)
          d.pairs.push_back({c, g, label,
                             detail::stack_channels(wa[k].values, wb[k].values, static_cast<std::size_t>(window->height),
                                                    static_cast<std::size_t>(window->width))});
      } else {
        d.pairs.push_back({c, g, label,
                           detail::stack_channels(downsample(fingerprint_plane(a), h, w, oh, ow),
                                                  downsample(fingerprint_plane(b), h, w, oh, ow),
                                                  static_cast<std::size_t>(oh), static_cast<std::size_t>(ow))});
      }
    } catch (const ShapeError& e) {
      throw CheckpointError(std::string("dataset tensors: ") + e.what());
    } catch (const ConfigError& e) {
      throw CheckpointError(std::string("dataset tensors: ") + e.what());
    }
  }
  return d;
}

// --- typed file helpers ------------------------------------------------------------

inline void save_embedding(const std::filesystem::path& p, const EmbeddingCheckpoint& c) { write_document(p, embedding_to_json(c)); }
inline EmbeddingCheckpoint load_embedding(const std::filesystem::path& p) { return embedding_from_json(read_document(p)); }
inline void save_som(const std::filesystem::path& p, const SomCheckpoint& c) { write_document(p, som_to_json(c)); }
inline SomCheckpoint load_som(const std::filesystem::path& p) { return som_from_json(read_document(p)); }
inline void save_cnn(const std::filesystem::path& p, const CnnCheckpoint& c) { write_document(p, cnn_to_json(c)); }
inline CnnCheckpoint load_cnn(const std::filesystem::path& p) { return cnn_from_json(read_document(p)); }

// Fingerprint document shared by the CLI and the HTTP service.
inline json fingerprint_to_json(const Fingerprint& fp) {
  return {{"subject", fp.subject}, {"width", fp.width}, {"height", fp.height}, {"cells", fp.cells}};
}

inline Fingerprint fingerprint_from_json(const json& j) {
  Fingerprint fp;
  fp.width = detail::field<int>(j, "width");
  fp.height = detail::field<int>(j, "height");
  if (fp.width < 1 || fp.height < 1) throw ValidationError("fingerprint dimensions must be positive");
  const auto cells = detail::field<std::vector<int>>(j, "cells");
  if (cells.size() != static_cast<std::size_t>(fp.width) * fp.height)
    throw ValidationError("fingerprint cell count does not match its dimensions");
  for (int v : cells) {
    if (v < 0 || v > 2) throw ValidationError("fingerprint band outside 0..2");
    fp.cells.push_back(static_cast<std::uint8_t>(v));
  }
  fp.subject = j.value("subject", "");
  return fp;
}

}  // namespace kgsome
