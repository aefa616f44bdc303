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

// Read-only JSON explorer over a trained model and its maps.
//
//   GET  /health                   liveness and counts
//   GET  /entities?prefix=&limit=  vocabulary lookup
//   GET  /fingerprint/{entity}     ?map=compound|gene
//   POST /fingerprint/set          {"entities": [...], "map": ...}
//   POST /query/path               {"source", "relations": [...], "k"}
//   POST /query/analogy            {"plus": [...], "minus": [...], "k"}
//   POST /whatif                   {"fingerprint": {...}, "edits": [...], "k"}
//   GET  /som/meta                 map geometry, clusters, node quality
//   POST /predict                  {"compound", "gene"}
//
// Unknown names give 404, malformed input 400, and requests needing an
// artifact the session was started without give 409.

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "kgsome/checkpoint.hpp"
#include "kgsome/convnet.hpp"
#include "kgsome/fingerprint.hpp"
#include "kgsome/graph.hpp"
#include "kgsome/some_pipeline.hpp"
#include "kgsome/som.hpp"
#include "kgsome/transe.hpp"

namespace kgsome {

inline constexpr int kMaxTopK = 100;
inline constexpr int kDefaultTopK = 10;
inline constexpr int kMaxEntityListing = 1000;

struct ExplorerState {
  KnowledgeGraph graph;  // vocabulary agrees with `model`
  EmbeddingModel model;
  SomGrid compound_grid;
  BandThresholds compound_thresholds;
  std::vector<int> clusters;
  std::vector<EntityId> compound_members;  // candidates for nearest-fingerprint search
  std::optional<SomGrid> gene_grid;
  BandThresholds gene_thresholds;
  std::optional<CnnModel> cnn;
};

struct Response {
  int status = 200;
  std::string body;
};

class ExplorerService {
 public:
  explicit ExplorerService(ExplorerState state) : s_(std::move(state)) {
    if (s_.model.entity_count() != s_.graph.entity_count() || s_.model.relation_count() != s_.graph.relation_count())
      throw ConfigError("model and graph vocabularies disagree");
    if (s_.compound_grid.dim() != s_.model.dim()) throw ShapeError("compound map dimension differs from the model");
    if (s_.gene_grid && s_.gene_grid->dim() != s_.model.dim()) throw ShapeError("gene map dimension differs from the model");
    if (s_.compound_members.empty()) {
      s_.compound_members.resize(s_.graph.entity_count());
      for (std::size_t i = 0; i < s_.compound_members.size(); ++i) s_.compound_members[i] = static_cast<EntityId>(i);
    }
    quality_ = node_quality(s_.compound_grid, gather_rows(s_.model.entity_matrix(), s_.compound_members));
  }

  const ExplorerState& state() const noexcept { return s_; }

  Response handle(const std::string& method, const std::string& path, const std::map<std::string, std::string>& query,
                  const std::string& body) const {
    try {
      if (method == "GET") {
        if (path == "/health") return ok(health());
        if (path == "/entities") return ok(entities(query));
        if (path == "/som/meta") return ok(som_meta());
        static const std::string fp_prefix = "/fingerprint/";
        if (path.rfind(fp_prefix, 0) == 0 && path.size() > fp_prefix.size())
          return ok(entity_fingerprint_doc(path.substr(fp_prefix.size()), map_param(query)));
      } else if (method == "POST") {
        if (path == "/fingerprint/set") return ok(set_fingerprint_doc(parse(body)));
        if (path == "/query/path") return ok(path_query(parse(body)));
        if (path == "/query/analogy") return ok(analogy(parse(body)));
        if (path == "/whatif") return ok(whatif(parse(body)));
        if (path == "/predict") return ok(predict(parse(body)));
      } else {
        return error(405, "method not allowed");
      }
      return error(404, "no such endpoint: " + method + " " + path);
    } catch (const NotFound& e) {
      return error(404, e.what());
    } catch (const Conflict& e) {
      return error(409, e.what());
    } catch (const json::exception& e) {
      return error(400, std::string("malformed request: ") + e.what());
    } catch (const ValidationError& e) {
      return error(400, e.what());
    } catch (const CheckpointError& e) {
      return error(400, e.what());
    } catch (const ConfigError& e) {
      return error(400, e.what());
    } catch (const ShapeError& e) {
      return error(400, e.what());
    }
  }

  // Building blocks shared with the parity tests.
  json health() const {
    return {{"status", "ok"},
            {"entities", s_.graph.entity_count()},
            {"relations", s_.graph.relation_count()},
            {"gene_map", s_.gene_grid.has_value()},
            {"classifier", s_.cnn.has_value()}};
  }

  json som_meta() const {
    json q = json::array();
    for (const auto& v : quality_) q.push_back(v ? json(*v) : json(nullptr));
    return {{"width", s_.compound_grid.width()},
            {"height", s_.compound_grid.height()},
            {"dim", s_.compound_grid.dim()},
            {"toroidal", s_.compound_grid.toroidal()},
            {"clusters", s_.clusters},
            {"node_quality", std::move(q)},
            {"thresholds", thresholds_to_json(s_.compound_thresholds)}};
  }

 private:
  struct NotFound : Error {
    using Error::Error;
  };
  struct Conflict : Error {
    using Error::Error;
  };

  static Response ok(const json& j) { return {200, j.dump()}; }
  static Response error(int status, const std::string& msg) { return {status, json{{"error", msg}}.dump()}; }

  static json parse(const std::string& body) {
    auto j = json::parse(body);
    if (!j.is_object()) throw ValidationError("request body must be a JSON object");
    return j;
  }

  static int top_k(const json& req) {
    if (!req.contains("k")) return kDefaultTopK;
    if (!req["k"].is_number_integer()) throw ValidationError("k must be an integer");
    const auto k = req["k"].get<long long>();
    if (k < 1) throw ValidationError("k must be at least 1");
    return static_cast<int>(std::min<long long>(k, kMaxTopK));
  }

  static std::string map_param(const std::map<std::string, std::string>& q) {
    auto it = q.find("map");
    return it == q.end() ? "compound" : it->second;
  }

  EntityId entity(const json& v) const {
    if (!v.is_string()) throw ValidationError("entity names must be strings");
    auto id = s_.graph.entities().find(v.get<std::string>());
    if (!id) throw NotFound("unknown entity '" + v.get<std::string>() + "'");
    return *id;
  }
  EntityId entity(const std::string& name) const { return entity(json(name)); }

  RelationId relation(const json& v) const {
    if (!v.is_string()) throw ValidationError("relation names must be strings");
    auto id = s_.graph.relations().find(v.get<std::string>());
    if (!id) throw NotFound("unknown relation '" + v.get<std::string>() + "'");
    return *id;
  }

  std::vector<EntityId> entity_list(const json& req, const char* key, bool required) const {
    std::vector<EntityId> out;
    if (!req.contains(key)) {
      if (required) throw ValidationError(std::string("missing '") + key + "'");
      return out;
    }
    if (!req[key].is_array()) throw ValidationError(std::string("'") + key + "' must be an array");
    for (const auto& v : req[key]) out.push_back(entity(v));
    return out;
  }

  std::pair<const SomGrid*, BandThresholds> grid_for(const std::string& map) const {
    if (map == "compound") return {&s_.compound_grid, s_.compound_thresholds};
    if (map == "gene") {
      if (!s_.gene_grid) throw Conflict("session has no gene map");
      return {&*s_.gene_grid, s_.gene_thresholds};
    }
    throw ValidationError("map must be 'compound' or 'gene'");
  }

  json ranked(const std::vector<RankedEntity>& r, const char* score_key) const {
    json out = json::array();
    for (const auto& e : r) out.push_back({{"entity", s_.graph.entities().name(e.entity)}, {score_key, e.score}});
    return out;
  }

  json entities(const std::map<std::string, std::string>& q) const {
    const auto pit = q.find("prefix");
    const std::string prefix = pit == q.end() ? "" : pit->second;
    int limit = 50;
    if (auto it = q.find("limit"); it != q.end()) {
      try {
        std::size_t used = 0;
        limit = std::stoi(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ValidationError("limit must be an integer");
      }
      if (limit < 1) throw ValidationError("limit must be at least 1");
      limit = std::min(limit, kMaxEntityListing);
    }
    json names = json::array();
    std::size_t total = 0;
    for (const auto& n : s_.graph.entities().names()) {
      if (n.rfind(prefix, 0) != 0) continue;
      if (static_cast<int>(names.size()) < limit) names.push_back(n);
      ++total;
    }
    return {{"entities", std::move(names)}, {"total", total}};
  }

  json entity_fingerprint_doc(const std::string& name, const std::string& map) const {
    const auto e = entity(name);
    const auto [grid, th] = grid_for(map);
    return fingerprint_to_json(entity_fingerprint(*grid, s_.model.entity(e), th, name));
  }

  json set_fingerprint_doc(const json& req) const {
    const auto ids = entity_list(req, "entities", true);
    const auto [grid, th] = grid_for(req.value("map", "compound"));
    return fingerprint_to_json(set_fingerprint(*grid, gather_rows(s_.model.entity_matrix(), ids), th, "set"));
  }

  json path_query(const json& req) const {
    if (!req.contains("source")) throw ValidationError("missing 'source'");
    const auto source = entity(req["source"]);
    if (!req.contains("relations") || !req["relations"].is_array() || req["relations"].empty())
      throw ValidationError("'relations' must be a non-empty array");
    std::vector<RelationId> rels;
    for (const auto& r : req["relations"]) rels.push_back(relation(r));
    return {{"results", ranked(top_k_answers(s_.model, source, rels, static_cast<std::size_t>(top_k(req))), "score")}};
  }

  json analogy(const json& req) const {
    const auto plus = entity_list(req, "plus", true);
    const auto minus = entity_list(req, "minus", false);
    if (plus.empty()) throw ValidationError("'plus' must name at least one entity");
    return {{"results", ranked(analogy_query(s_.model, plus, minus, static_cast<std::size_t>(top_k(req))), "distance")}};
  }

  json whatif(const json& req) const {
    if (!req.contains("fingerprint")) throw ValidationError("missing 'fingerprint'");
    const auto fp = fingerprint_from_json(req["fingerprint"]);
    if (fp.width != s_.compound_grid.width() || fp.height != s_.compound_grid.height())
      throw ValidationError("fingerprint size does not match the map");
    std::vector<PixelEdit> edits;
    if (req.contains("edits")) {
      if (!req["edits"].is_array()) throw ValidationError("'edits' must be an array");
      for (const auto& e : req["edits"])
        edits.push_back({detail::field<int>(e, "row"), detail::field<int>(e, "col"), detail::field<int>(e, "band")});
    }
    const auto res = what_if_toggle(fp, edits, s_.compound_grid, s_.model, s_.compound_thresholds,
                                    static_cast<std::size_t>(top_k(req)), s_.compound_members);
    json out = fingerprint_to_json(res.edited);
    return {{"fingerprint", std::move(out)}, {"results", ranked(res.neighbours, "similarity")}};
  }

  json predict(const json& req) const {
    if (!s_.cnn || !s_.gene_grid) throw Conflict("session has no classifier or gene map");
    if (!req.contains("compound") || !req.contains("gene")) throw ValidationError("need 'compound' and 'gene'");
    const auto c = entity(req["compound"]);
    const auto g = entity(req["gene"]);
    const auto& in = s_.cnn->input_shape();
    const int h = s_.compound_grid.height(), w = s_.compound_grid.width();
    const int oh = static_cast<int>(in.height), ow = static_cast<int>(in.width);
    if (in.channels != 2 || oh > h || ow > w) throw Conflict("classifier input does not fit the maps");
    const auto a = entity_fingerprint(s_.compound_grid, s_.model.entity(c), s_.compound_thresholds);
    const auto b = entity_fingerprint(*s_.gene_grid, s_.model.entity(g), s_.gene_thresholds);
    const auto input = detail::stack_channels(downsample(fingerprint_plane(a), h, w, oh, ow),
                                        downsample(fingerprint_plane(b), h, w, oh, ow), in.height, in.width);
    const auto p = predict_proba(*s_.cnn, input);
    const auto best = std::max_element(p.begin(), p.end()) - p.begin();
    return {{"probabilities", p}, {"class", best}};
  }

  ExplorerState s_;
  std::vector<std::optional<double>> quality_;
};

}  // namespace kgsome
