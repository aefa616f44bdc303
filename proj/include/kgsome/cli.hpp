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

// `kgsome` workbench: one subcommand per pipeline stage. Every subcommand
// prints a one-line JSON summary on stdout. Exit status is 0 on success, 2 for
// usage errors (bad flags, missing inputs) and 1 for failures while running.
//
// --config FILE reads `key = value` lines; each key is the long name of a flag
// of the chosen subcommand (or a global flag). Flags given on the command line
// win over the file.

#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kgsome/checkpoint.hpp"
#include "kgsome/eval.hpp"
#include "kgsome/fingerprint.hpp"
#include "kgsome/graph.hpp"
#include "kgsome/kmeans.hpp"
#include "kgsome/path_sampler.hpp"
#include "kgsome/service_http.hpp"
#include "kgsome/some_pipeline.hpp"
#include "kgsome/som.hpp"
#include "kgsome/synthetic.hpp"
#include "kgsome/transe.hpp"

namespace kgsome {

struct UsageError : Error {
  using Error::Error;
};

namespace cli {

namespace fs = std::filesystem;

inline void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing --") + what);
  if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " file '" + path + "' does not exist");
}

inline std::ifstream open_input(const std::string& path, const char* what) {
  require_file(path, what);
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read '" + path + "'");
  return in;
}

// Triple file, or a JSON graph snapshot when the name ends in .json.
inline std::size_t load_graph_into(const std::string& path, KnowledgeGraph& g, const char* what = "graph") {
  auto in = open_input(path, what);
  if (fs::path(path).extension() == ".json") {
    std::stringstream ss;
    ss << in.rdbuf();
    const auto snap = graph_from_json(json::parse(ss.str()));
    std::size_t added = 0;
    for (const auto& t : snap.triples())
      added += g.add(snap.entities().name(t.head), snap.relations().name(t.relation), snap.entities().name(t.tail));
    return added;
  }
  return ingest_triples(in, g);
}

template <typename Writer>
void write_text(const std::string& path, Writer&& writer) {
  if (path.empty()) throw UsageError("missing --out");
  const auto tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + tmp + "' for writing");
    writer(out);
    if (!out) throw Error("write to '" + path + "' failed");
  }
  fs::rename(tmp, path);
}

inline std::vector<EntityId> lookup_entities(const KnowledgeGraph& g, const std::vector<std::string>& names) {
  std::vector<EntityId> ids;
  for (const auto& n : names) ids.push_back(g.entities().at(n));
  return ids;
}

// Model, its vocabulary-aligned graph and optional triples loaded into it.
struct ModelSession {
  EmbeddingCheckpoint ckpt;
  KnowledgeGraph graph;
};

inline ModelSession load_model_session(const std::string& model_path, const std::vector<std::string>& graph_paths) {
  require_file(model_path, "model");
  ModelSession s{load_embedding(model_path), {}};
  s.graph = graph_with_vocab(s.ckpt);
  for (const auto& p : graph_paths) {
    load_graph_into(p, s.graph);
    if (s.graph.entity_count() != s.ckpt.entities.size() || s.graph.relation_count() != s.ckpt.relations.size())
      throw LookupError("'" + p + "' names entities or relations the model was not trained on");
  }
  return s;
}

inline std::vector<EntityId> som_members(const SomCheckpoint& som, const KnowledgeGraph& g) {
  return lookup_entities(g, som.members);
}

struct ThresholdFlags {
  bool automatic = false;
  double quantile = 0.1;
  double band2 = 0.1;
  double band1 = 0.2;

  BandThresholds resolve(const SomGrid& grid, const Matrix& member_vectors) const {
    if (automatic) return auto_thresholds(grid, member_vectors, quantile);
    BandThresholds t{band2, band1};
    t.validate();
    return t;
  }
};

inline void add_threshold_flags(CLI::App* sub, ThresholdFlags& t) {
  sub->add_flag("--auto-threshold", t.automatic, "band edges from a percentile of member-to-cell distances");
  sub->add_option("--threshold-quantile", t.quantile, "percentile used by --auto-threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  sub->add_option("--band2", t.band2, "distance below which a cell is band 2")->capture_default_str();
  sub->add_option("--band1", t.band1, "distance below which a cell is band 1")->capture_default_str();
}

inline json eval_to_json(const EvalReport& r, const KnowledgeGraph& g) {
  json per = json::object();
  for (const auto& [rel, b] : r.per_relation)
    per[g.relations().name(rel)] = {{"queries", b.queries}, {"hits_at_10", b.hits_at_10},
                                    {"classification_accuracy", b.classification_accuracy}};
  return {{"queries", r.query_count}, {"hits_at_10", r.hits_at_10},
          {"classification_accuracy", r.classification_accuracy}, {"per_relation", std::move(per)}};
}

inline json some_report_to_json(const SomeReport& r) {
  return {{"train_accuracy", r.train_accuracy},       {"validation_accuracy", r.validation_accuracy},
          {"test_accuracy", r.test_accuracy},         {"num_classes", r.num_classes},
          {"confusion", r.confusion},                 {"loss_trace", r.loss_trace},
          {"train_size", r.train_size},               {"validation_size", r.validation_size},
          {"test_size", r.test_size},                 {"selected_epoch", r.selected_epoch}};
}

// Splits `key = value` config lines into `--key=value` tokens for the options
// `accepts` recognises.
template <typename Accepts>
std::vector<std::string> config_tokens(const std::string& path, Accepts&& accepts) {
  auto in = open_input(path, "config");
  std::vector<std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string{};
      return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(lineno) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty() || key == "config") throw UsageError(path + ":" + std::to_string(lineno) + ": bad key");
    const int verdict = accepts(key);
    if (verdict < 0) throw UsageError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (verdict > 0) out.push_back("--" + key + "=" + value);
  }
  return out;
}

}  // namespace cli

// Runs the workbench with `args` (program name excluded).
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  using namespace cli;
  CLI::App app{"Knowledge-graph embedding, SOM fingerprint and SOME workbench", "kgsome"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  std::string config_path, out_path;
  app.add_option("--seed", seed, "base seed for every random choice")->capture_default_str();
  app.add_option("--config", config_path, "key = value file of flag defaults");
  app.add_option("--out", out_path, "output path");

  const auto many = [](CLI::Option* o) { return o->multi_option_policy(CLI::MultiOptionPolicy::TakeAll); };

  // ingest
  std::vector<std::string> ingest_inputs;
  auto* ingest = app.add_subcommand("ingest", "read triple files and write a graph snapshot");
  many(ingest->add_option("--input", ingest_inputs, "triple file (repeatable)")->required());

  // synth
  SyntheticSpec synth_spec;
  bool synth_no_inverses = false;
  auto* synth = app.add_subcommand("synth", "generate a planted block-structured compound-gene graph");
  synth->add_option("--blocks", synth_spec.blocks)->capture_default_str();
  synth->add_option("--compounds-per-block", synth_spec.chems_per_block)->capture_default_str();
  synth->add_option("--genes-per-block", synth_spec.genes_per_block)->capture_default_str();
  synth->add_option("--relations", synth_spec.relations)->capture_default_str();
  synth->add_option("--noise", synth_spec.noise, "probability an edge leaves its block")->capture_default_str();
  synth->add_option("--edges-per-compound", synth_spec.edges_per_compound)->capture_default_str();
  synth->add_flag("--no-inverses", synth_no_inverses, "omit the gene-to-compound inverse edges");

  // split
  std::string split_input;
  SplitSpec split_spec;
  auto* split_cmd = app.add_subcommand("split", "hold out test triples; writes OUT.train.tsv and OUT.test.tsv");
  split_cmd->add_option("--input", split_input)->required();
  split_cmd->add_option("--test-fraction", split_spec.test_fraction)->capture_default_str();

  // sample-paths
  std::string paths_input;
  std::size_t paths_count = 1000;
  int paths_lmax = 3;
  auto* sample_paths = app.add_subcommand("sample-paths", "draw random-walk path queries from a training graph");
  sample_paths->add_option("--input", paths_input)->required();
  sample_paths->add_option("--count", paths_count)->capture_default_str();
  sample_paths->add_option("--l-max", paths_lmax)->capture_default_str();

  // train-embed
  std::string te_train, te_paths, te_mode = "comp";
  TrainConfig te_cfg;
  std::size_t te_path_count = 0;
  int te_lmax = 3;
  auto* train_embed = app.add_subcommand("train-embed", "train translation embeddings");
  train_embed->add_option("--train", te_train)->required();
  train_embed->add_option("--paths", te_paths, "path-query file (comp mode)");
  train_embed->add_option("--mode", te_mode, "single or comp")->capture_default_str();
  train_embed->add_option("--dim", te_cfg.dim)->capture_default_str();
  train_embed->add_option("--margin", te_cfg.margin)->capture_default_str();
  train_embed->add_option("--batch-size", te_cfg.batch_size)->capture_default_str();
  train_embed->add_option("--step-size", te_cfg.step_size)->capture_default_str();
  train_embed->add_option("--negatives", te_cfg.negatives)->capture_default_str();
  train_embed->add_option("--init-variance", te_cfg.init_variance)->capture_default_str();
  train_embed->add_option("--clip-factor", te_cfg.clip_factor)->capture_default_str();
  train_embed->add_option("--epochs", te_cfg.epochs)->capture_default_str();
  train_embed->add_option("--path-count", te_path_count, "sampled paths when --paths is absent; 0 = one per edge");
  train_embed->add_option("--l-max", te_lmax)->capture_default_str();

  // eval-embed
  std::vector<std::string> ee_models;
  std::string ee_train, ee_test, ee_name = "planted";
  std::size_t ee_path_count = 1000;
  int ee_lmax = 3;
  auto* eval_embed = app.add_subcommand("eval-embed", "hits@10 and classification accuracy on held-out queries");
  many(eval_embed->add_option("--model", ee_models, "embedding checkpoint (repeatable)")->required());
  eval_embed->add_option("--train", ee_train)->required();
  eval_embed->add_option("--test", ee_test)->required();
  eval_embed->add_option("--path-count", ee_path_count, "held-out path queries")->capture_default_str();
  eval_embed->add_option("--l-max", ee_lmax)->capture_default_str();
  eval_embed->add_option("--dataset-name", ee_name)->capture_default_str();

  // train-som / train-som-genes
  std::string ts_model, ts_role = "compound", ts_inverse = "_inv";
  std::vector<std::string> ts_graphs;
  int ts_width = 50, ts_height = 50, ts_clusters = 5;
  SomTrainConfig ts_cfg;
  bool ts_flat = false;
  const auto som_flags = [&](CLI::App* sub) {
    sub->add_option("--model", ts_model)->required();
    many(sub->add_option("--graph", ts_graphs, "triples defining the roles (repeatable)")->required());
    sub->add_option("--width", ts_width)->capture_default_str();
    sub->add_option("--height", ts_height)->capture_default_str();
    sub->add_option("--ordering-updates", ts_cfg.ordering_updates)->capture_default_str();
    sub->add_option("--fine-updates", ts_cfg.fine_updates)->capture_default_str();
    sub->add_option("--clusters", ts_clusters, "k-means clusters over codevectors; 0 disables")->capture_default_str();
    sub->add_option("--inverse-suffix", ts_inverse)->capture_default_str();
    sub->add_flag("--flat", ts_flat, "non-toroidal map");
  };
  auto* train_som_cmd = app.add_subcommand("train-som", "train a map over one entity role");
  som_flags(train_som_cmd);
  train_som_cmd->add_option("--role", ts_role, "compound, gene or all")->capture_default_str();
  auto* train_som_genes = app.add_subcommand("train-som-genes", "train the gene map");
  som_flags(train_som_genes);

  // fingerprint
  std::string fp_model, fp_som, fp_quality;
  std::vector<std::string> fp_entities;
  ThresholdFlags fp_th;
  auto* fingerprint_cmd = app.add_subcommand("fingerprint", "entity or set fingerprint; writes OUT.json and OUT.ppm");
  fingerprint_cmd->add_option("--model", fp_model)->required();
  fingerprint_cmd->add_option("--som", fp_som)->required();
  many(fingerprint_cmd->add_option("--entity", fp_entities, "entity (repeat for a set fingerprint)")->required());
  fingerprint_cmd->add_option("--quality", fp_quality, "also write a node-quality PGM here");
  add_threshold_flags(fingerprint_cmd, fp_th);

  // semantic-ratio
  std::string sr_model, sr_som, sr_gene;
  std::vector<std::string> sr_graphs;
  auto* semantic = app.add_subcommand("semantic-ratio", "within-cell neighbour similarity against a shuffled baseline");
  semantic->add_option("--model", sr_model)->required();
  semantic->add_option("--som", sr_som)->required();
  many(semantic->add_option("--graph", sr_graphs)->required());
  semantic->add_option("--gene", sr_gene, "also report this gene's interaction profile over clusters");

  // build-some
  std::string bs_model, bs_som, bs_gene_som, bs_records, bs_inverse = "_inv";
  std::vector<std::string> bs_graphs, bs_classes;
  SomeDatasetConfig bs_cfg;
  int bs_size = 24, bs_win_h = 0, bs_win_w = 0, bs_win_step = 0;
  ThresholdFlags bs_th;
  auto* build_some = app.add_subcommand("build-some", "compound-gene fingerprint pairs for the classifier");
  build_some->add_option("--model", bs_model)->required();
  build_some->add_option("--som", bs_som, "compound map")->required();
  build_some->add_option("--gene-som", bs_gene_som)->required();
  many(build_some->add_option("--graph", bs_graphs)->required());
  build_some->add_option("--neg-ratio", bs_cfg.neg_ratio)->capture_default_str();
  build_some->add_option("--size", bs_size, "downsampled side length")->capture_default_str();
  build_some->add_option("--window-height", bs_win_h, "cut windows instead of downsampling");
  build_some->add_option("--window-width", bs_win_w);
  build_some->add_option("--window-step", bs_win_step);
  build_some->add_option("--max-positives", bs_cfg.max_positives, "0 keeps all")->capture_default_str();
  many(build_some->add_option("--relation-class", bs_classes, "RELATION=CLASS for multi-class labels"));
  build_some->add_option("--records", bs_records, "also write compound TAB gene TAB label records");
  build_some->add_option("--inverse-suffix", bs_inverse)->capture_default_str();
  add_threshold_flags(build_some, bs_th);

  // train-some
  std::string tso_dataset, tso_activation = "tanh";
  SomeRunConfig tso_cfg;
  bool tso_shuffle = false;
  auto* train_some = app.add_subcommand("train-some", "train the fingerprint-pair classifier");
  train_some->add_option("--dataset", tso_dataset)->required();
  train_some->add_option("--epochs", tso_cfg.cnn.epochs)->capture_default_str();
  train_some->add_option("--step-size", tso_cfg.cnn.step_size)->capture_default_str();
  train_some->add_option("--batch-size", tso_cfg.cnn.batch_size)->capture_default_str();
  train_some->add_option("--activation", tso_activation, "tanh, relu or linear")->capture_default_str();
  train_some->add_option("--train-fraction", tso_cfg.train_fraction)->capture_default_str();
  train_some->add_option("--validation-fraction", tso_cfg.validation_fraction)->capture_default_str();
  train_some->add_flag("--shuffle-labels", tso_shuffle, "permute labels before training (control run)");

  // eval-some
  std::string es_dataset, es_cnn;
  auto* eval_some = app.add_subcommand("eval-some", "re-evaluate a classifier on its held-out split");
  eval_some->add_option("--dataset", es_dataset)->required();
  eval_some->add_option("--cnn", es_cnn)->required();

  // analogy
  std::string an_model;
  std::vector<std::string> an_plus, an_minus;
  std::size_t an_k = 10;
  auto* analogy_cmd = app.add_subcommand("analogy", "entities nearest to sum(plus) - sum(minus)");
  analogy_cmd->add_option("--model", an_model)->required();
  many(analogy_cmd->add_option("--plus", an_plus)->required());
  many(analogy_cmd->add_option("--minus", an_minus));
  analogy_cmd->add_option("-k", an_k)->capture_default_str();

  // serve
  std::string sv_model, sv_som, sv_gene_som, sv_cnn, sv_host = "127.0.0.1", sv_cors;
  std::vector<std::string> sv_graphs;
  int sv_port = 8080;
  ThresholdFlags sv_th;
  auto* serve = app.add_subcommand("serve", "HTTP explorer over a model and its maps");
  serve->add_option("--model", sv_model)->required();
  serve->add_option("--som", sv_som, "compound map")->required();
  many(serve->add_option("--graph", sv_graphs));
  serve->add_option("--gene-som", sv_gene_som);
  serve->add_option("--cnn", sv_cnn);
  serve->add_option("--host", sv_host)->capture_default_str();
  serve->add_option("--port", sv_port)->capture_default_str();
  serve->add_option("--cors-origin", sv_cors, "value for Access-Control-Allow-Origin");
  add_threshold_flags(serve, sv_th);

  try {
    // Config keys become flags placed right after the subcommand name, so
    // anything later on the command line overrides them.
    for (std::size_t i = 0; i < args.size(); ++i) {
      std::string path;
      if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
      else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
      if (path.empty()) continue;
      std::size_t sub_pos = args.size();
      CLI::App* sub = nullptr;
      for (std::size_t j = 0; j < args.size() && !sub; ++j)
        for (auto* s : app.get_subcommands({}))
          if (s->get_name() == args[j]) {
            sub = s;
            sub_pos = j;
          }
      const auto tokens = config_tokens(path, [&](const std::string& key) {
        const auto flag = "--" + key;
        if (app.get_option_no_throw(flag)) return 1;
        if (sub && sub->get_option_no_throw(flag)) return 1;
        for (auto* s : app.get_subcommands({}))
          if (s->get_option_no_throw(flag)) return 0;
        return -1;
      });
      args.insert(args.begin() + static_cast<std::ptrdiff_t>(std::min(sub_pos + 1, args.size())), tokens.begin(),
                  tokens.end());
      break;
    }
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  }

  const auto emit = [&out](const json& j) { out << j.dump() << '\n'; };

  try {
    if (ingest->parsed()) {
      KnowledgeGraph g;
      std::size_t lines = 0;
      for (const auto& p : ingest_inputs) lines += load_graph_into(p, g, "input");
      if (!out_path.empty()) write_document(out_path, graph_to_json(g));
      emit({{"command", "ingest"}, {"entities", g.entity_count()}, {"relations", g.relation_count()},
            {"triples", g.size()}, {"added", lines}});
    } else if (synth->parsed()) {
      synth_spec.seed = seed;
      synth_spec.with_inverses = !synth_no_inverses;
      const auto kg = generate_synthetic_kg(synth_spec);
      write_text(out_path, [&](std::ostream& os) { write_triples(os, kg.graph); });
      emit({{"command", "synth"}, {"entities", kg.graph.entity_count()}, {"compounds", kg.compounds.size()},
            {"genes", kg.genes.size()}, {"triples", kg.graph.size()}, {"forward_edges", kg.forward_edges},
            {"cross_block_edges", kg.cross_block_edges}});
    } else if (split_cmd->parsed()) {
      KnowledgeGraph g;
      load_graph_into(split_input, g, "input");
      split_spec.seed = seed;
      const auto res = split(g, split_spec);
      if (out_path.empty()) throw UsageError("missing --out");
      write_text(out_path + ".train.tsv", [&](std::ostream& os) { write_triples(os, res.train); });
      write_text(out_path + ".test.tsv", [&](std::ostream& os) {
        for (const auto& t : res.test) write_triple(os, g, t);
      });
      emit({{"command", "split"}, {"train", res.train.size()}, {"test", res.test.size()}});
    } else if (sample_paths->parsed()) {
      KnowledgeGraph g;
      load_graph_into(paths_input, g, "input");
      const auto qs = sample_path_queries(g, paths_count, paths_lmax, seed);
      write_text(out_path, [&](std::ostream& os) { write_path_queries(os, g, qs); });
      std::map<std::string, std::size_t> by_len;
      for (const auto& q : qs) ++by_len[std::to_string(q.length())];
      emit({{"command", "sample-paths"}, {"queries", qs.size()}, {"by_length", by_len}});
    } else if (train_embed->parsed()) {
      te_cfg.seed = seed;
      te_cfg.mode = parse_train_mode(te_mode);
      te_cfg.validate();
      KnowledgeGraph g;
      load_graph_into(te_train, g, "train");
      std::vector<PathQuery> queries;
      if (te_cfg.mode == TrainMode::single_edge) {
        for (const auto& t : g.triples()) queries.push_back(edge_query(t));
      } else if (!te_paths.empty()) {
        auto in = open_input(te_paths, "paths");
        queries = read_path_queries(in, g);
      } else {
        queries = sample_path_queries(g, te_path_count ? te_path_count : g.size(), te_lmax, derive_seed(seed, {0x7a1u}));
      }
      auto model = init_model(g, te_cfg);
      const auto rep = train(model, queries, g, te_cfg);
      auto meta = config_to_json(te_cfg);
      meta["queries"] = queries.size();
      if (out_path.empty()) throw UsageError("missing --out");
      save_embedding(out_path, {std::move(model), g.entities().names(), g.relations().names(), meta});
      emit({{"command", "train-embed"}, {"mode", to_string(te_cfg.mode)}, {"queries", queries.size()},
            {"epoch_loss", rep.epoch_loss}, {"updates", rep.updates}, {"clipped", rep.clipped}});
    } else if (eval_embed->parsed()) {
      std::vector<TableRow> edge_rows, path_rows;
      json models = json::array();
      for (const auto& mp : ee_models) {
        auto s = load_model_session(mp, {ee_train});
        const auto train_graph = s.graph;
        load_graph_into(ee_test, s.graph, "test");
        if (s.graph.entity_count() != s.ckpt.entities.size())
          throw LookupError("test file names entities the model was not trained on");
        std::vector<PathQuery> edges;
        for (const auto& t : s.graph.triples())
          if (!train_graph.contains(t)) edges.push_back(edge_query(t));
        const auto paths =
            sample_heldout_path_queries(s.graph, train_graph, ee_path_count, ee_lmax, derive_seed(seed, {0xe7a1u}));
        const auto er = evaluate(s.ckpt.model, edges, s.graph, seed);
        const auto pr = evaluate(s.ckpt.model, paths, s.graph, seed);
        const std::string mode = s.ckpt.metadata.value("mode", "?");
        edge_rows.push_back({"TransE", mode, er.hits_at_10, er.classification_accuracy});
        path_rows.push_back({"TransE", mode, pr.hits_at_10, pr.classification_accuracy});
        models.push_back({{"model", fs::path(mp).filename().string()}, {"mode", mode},
                          {"edges", eval_to_json(er, s.graph)}, {"paths", eval_to_json(pr, s.graph)}});
      }
      print_eval_table(out, ee_name + " (edges)", edge_rows);
      out << '\n';
      print_eval_table(out, ee_name + " (paths)", path_rows);
      out << '\n';
      emit({{"command", "eval-embed"}, {"models", std::move(models)}});
    } else if (train_som_cmd->parsed() || train_som_genes->parsed()) {
      if (train_som_genes->parsed()) ts_role = "gene";
      const auto s = load_model_session(ts_model, ts_graphs);
      const auto roles = partition_roles(s.graph, ts_inverse);
      std::vector<EntityId> members;
      if (ts_role == "compound") members = roles.compounds;
      else if (ts_role == "gene") members = roles.genes;
      else if (ts_role == "all")
        for (EntityId e = 0; e < s.graph.entity_count(); ++e) members.push_back(e);
      else throw UsageError("--role must be compound, gene or all");
      if (members.empty()) throw TrainingError("no entities with role '" + ts_role + "'");
      ts_cfg.seed = seed;
      ts_cfg.toroidal = !ts_flat;
      const auto data = gather_rows(s.ckpt.model.entity_matrix(), members);
      const double qe_init = quantization_error(init_som(data, ts_width, ts_height, ts_cfg.toroidal, seed), data);
      SomCheckpoint som;
      som.grid = train_som(data, ts_width, ts_height, ts_cfg);
      const double qe = quantization_error(som.grid, data);
      if (ts_clusters > 0) som.cluster_labels = cluster_codevectors(som.grid, ts_clusters, derive_seed(seed, {0xc1u}));
      for (auto e : members) som.members.push_back(s.graph.entities().name(e));
      som.metadata = {{"role", ts_role}, {"seed", seed}, {"ordering_updates", ts_cfg.ordering_updates},
                      {"fine_updates", ts_cfg.fine_updates}, {"clusters", ts_clusters}};
      if (out_path.empty()) throw UsageError("missing --out");
      save_som(out_path, som);
      emit({{"command", train_som_genes->parsed() ? "train-som-genes" : "train-som"}, {"role", ts_role},
            {"members", members.size()}, {"quantization_error_init", qe_init}, {"quantization_error", qe}});
    } else if (fingerprint_cmd->parsed()) {
      const auto s = load_model_session(fp_model, {});
      require_file(fp_som, "som");
      const auto som = load_som(fp_som);
      const auto member_vectors = gather_rows(s.ckpt.model.entity_matrix(), som_members(som, s.graph));
      const auto th = fp_th.resolve(som.grid, member_vectors);
      const auto ids = lookup_entities(s.graph, fp_entities);
      const auto fp = ids.size() == 1
                          ? entity_fingerprint(som.grid, s.ckpt.model.entity(ids[0]), th, fp_entities[0])
                          : set_fingerprint(som.grid, gather_rows(s.ckpt.model.entity_matrix(), ids), th, "set");
      if (out_path.empty()) throw UsageError("missing --out");
      write_document(out_path + ".json", [&] {
        auto doc = document_header("fingerprint", {{"thresholds", thresholds_to_json(th)}});
        doc["fingerprint"] = fingerprint_to_json(fp);
        doc["entities"] = fp_entities;
        return doc;
      }());
      write_text(out_path + ".ppm", [&](std::ostream& os) { write_fingerprint_ppm(os, fp); });
      if (!fp_quality.empty()) {
        const auto q = node_quality(som.grid, member_vectors);
        write_text(fp_quality, [&](std::ostream& os) { write_quality_pgm(os, som.grid, q); });
      }
      std::array<std::size_t, 3> bands{};
      for (auto c : fp.cells) ++bands[c];
      emit({{"command", "fingerprint"}, {"entities", fp_entities}, {"thresholds", thresholds_to_json(th)},
            {"band_counts", bands}});
    } else if (semantic->parsed()) {
      const auto s = load_model_session(sr_model, sr_graphs);
      require_file(sr_som, "som");
      const auto som = load_som(sr_som);
      const auto members = som_members(som, s.graph);
      const auto assignment = assign_cells(som.grid, gather_rows(s.ckpt.model.entity_matrix(), members), members);
      const auto r = semantic_ratio(s.graph, assignment, seed);
      json summary{{"command", "semantic-ratio"}, {"observed", r.observed}, {"baseline", r.baseline}, {"ratio", r.ratio}};
      if (!sr_gene.empty()) {
        if (som.cluster_labels.empty()) throw UsageError("map has no cluster labels");
        const int k = *std::max_element(som.cluster_labels.begin(), som.cluster_labels.end()) + 1;
        const auto prof =
            interaction_profile(s.graph, s.graph.entities().at(sr_gene), som.cluster_labels, assignment, k);
        summary["profile"] = {{"gene", sr_gene}, {"counts", prof.counts}};
      }
      emit(summary);
    } else if (build_some->parsed()) {
      const auto s = load_model_session(bs_model, bs_graphs);
      require_file(bs_som, "som");
      require_file(bs_gene_som, "gene-som");
      const auto csom = load_som(bs_som), gsom = load_som(bs_gene_som);
      const auto roles = partition_roles(s.graph, bs_inverse);
      bs_cfg.seed = seed;
      bs_cfg.compound_thresholds =
          bs_th.resolve(csom.grid, gather_rows(s.ckpt.model.entity_matrix(), som_members(csom, s.graph)));
      bs_cfg.gene_thresholds =
          bs_th.resolve(gsom.grid, gather_rows(s.ckpt.model.entity_matrix(), som_members(gsom, s.graph)));
      bs_cfg.out_height = bs_cfg.out_width = bs_size;
      if (bs_win_h > 0 || bs_win_w > 0) {
        if (bs_win_h < 1 || bs_win_w < 1) throw UsageError("--window-height and --window-width go together");
        bs_cfg.window = WindowSpec{bs_win_h, bs_win_w, bs_win_step > 0 ? bs_win_step : bs_win_h,
                                   bs_win_step > 0 ? bs_win_step : bs_win_w};
      }
      for (const auto& rc : bs_classes) {
        const auto eq = rc.find('=');
        if (eq == std::string::npos) throw UsageError("--relation-class expects RELATION=CLASS");
        const int cls = std::stoi(rc.substr(eq + 1));
        if (cls < 1) throw UsageError("relation classes start at 1");
        bs_cfg.relation_class[s.graph.relations().at(rc.substr(0, eq))] = cls;
      }
      DatasetDocument doc;
      doc.entities = s.graph.entities().names();
      doc.pairs = build_some_dataset(s.graph, s.ckpt.model, csom.grid, gsom.grid, roles, bs_cfg);
      doc.metadata = {{"seed", seed}, {"neg_ratio", bs_cfg.neg_ratio}};
      if (out_path.empty()) throw UsageError("missing --out");
      write_document(out_path, dataset_to_json(doc, csom.grid, gsom.grid, s.ckpt.model, bs_cfg));
      if (!bs_records.empty())
        write_text(bs_records, [&](std::ostream& os) {
          const SomePair* prev = nullptr;
          for (const auto& p : doc.pairs) {
            if (prev && prev->compound == p.compound && prev->gene == p.gene) continue;
            os << doc.entities[p.compound] << '\t' << doc.entities[p.gene] << '\t' << p.label << '\n';
            prev = &p;
          }
        });
      std::map<std::string, std::size_t> by_label;
      for (const auto& p : doc.pairs) ++by_label[std::to_string(p.label)];
      emit({{"command", "build-some"}, {"examples", doc.pairs.size()}, {"by_label", by_label},
            {"compound_thresholds", thresholds_to_json(bs_cfg.compound_thresholds)},
            {"gene_thresholds", thresholds_to_json(bs_cfg.gene_thresholds)}});
    } else if (train_some->parsed()) {
      require_file(tso_dataset, "dataset");
      auto data = dataset_from_json(read_document(tso_dataset));
      if (tso_shuffle) data.pairs = shuffle_labels(std::move(data.pairs), derive_seed(seed, {0x5f1u}));
      tso_cfg.seed = seed;
      tso_cfg.cnn.seed = derive_seed(seed, {0xc22u});
      tso_cfg.activation = parse_activation(tso_activation);
      const auto run = run_some(data.pairs, tso_cfg);
      if (out_path.empty()) throw UsageError("missing --out");
      save_cnn(out_path, {run.model,
                          {{"seed", seed},
                           {"train_fraction", tso_cfg.train_fraction},
                           {"validation_fraction", tso_cfg.validation_fraction},
                           {"shuffled_labels", tso_shuffle},
                           {"epochs", tso_cfg.cnn.epochs}}});
      auto summary = some_report_to_json(run.report);
      summary["command"] = "train-some";
      emit(summary);
    } else if (eval_some->parsed()) {
      require_file(es_dataset, "dataset");
      require_file(es_cnn, "cnn");
      auto data = dataset_from_json(read_document(es_dataset));
      const auto cnn = load_cnn(es_cnn);
      SomeRunConfig cfg;
      cfg.seed = cnn.metadata.value("seed", std::uint64_t{0});
      cfg.train_fraction = cnn.metadata.value("train_fraction", cfg.train_fraction);
      cfg.validation_fraction = cnn.metadata.value("validation_fraction", cfg.validation_fraction);
      if (cnn.metadata.value("shuffled_labels", false))
        data.pairs = shuffle_labels(std::move(data.pairs), derive_seed(cfg.seed, {0x5f1u}));
      auto summary = some_report_to_json(evaluate_some(cnn.model, data.pairs, split_some_dataset(data.pairs.size(), cfg)));
      summary["command"] = "eval-some";
      emit(summary);
    } else if (analogy_cmd->parsed()) {
      const auto s = load_model_session(an_model, {});
      const auto res =
          analogy_query(s.ckpt.model, lookup_entities(s.graph, an_plus), lookup_entities(s.graph, an_minus), an_k);
      json results = json::array();
      for (const auto& r : res) results.push_back({{"entity", s.graph.entities().name(r.entity)}, {"distance", r.score}});
      emit({{"command", "analogy"}, {"results", std::move(results)}});
    } else if (serve->parsed()) {
      auto s = load_model_session(sv_model, sv_graphs);
      require_file(sv_som, "som");
      const auto csom = load_som(sv_som);
      ExplorerState st;
      st.compound_members = som_members(csom, s.graph);
      st.compound_thresholds = sv_th.resolve(csom.grid, gather_rows(s.ckpt.model.entity_matrix(), st.compound_members));
      st.compound_grid = csom.grid;
      st.clusters = csom.cluster_labels;
      if (!sv_gene_som.empty()) {
        require_file(sv_gene_som, "gene-som");
        const auto gsom = load_som(sv_gene_som);
        st.gene_thresholds =
            sv_th.resolve(gsom.grid, gather_rows(s.ckpt.model.entity_matrix(), som_members(gsom, s.graph)));
        st.gene_grid = gsom.grid;
      }
      if (!sv_cnn.empty()) {
        require_file(sv_cnn, "cnn");
        st.cnn = load_cnn(sv_cnn).model;
      }
      st.graph = std::move(s.graph);
      st.model = std::move(s.ckpt.model);
      const ExplorerService service(std::move(st));
      httplib::Server server;
      bind_service(server, service, sv_cors);
      emit({{"command", "serve"}, {"host", sv_host}, {"port", sv_port}});
      out.flush();
      if (!server.listen(sv_host, sv_port)) throw Error("cannot listen on " + sv_host + ":" + std::to_string(sv_port));
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run_cli(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace kgsome
