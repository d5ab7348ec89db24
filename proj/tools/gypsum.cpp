// gypsum — unified pipeline driver.
//
// Commands:
//   build-graphs   parse a dataset and serialize one semantic graph per line
//   train          fit a model on a dataset, keeping the best checkpoint
//   summarize      decode summaries for a dataset with a trained checkpoint
//   evaluate       score predictions against references (BLEU/METEOR/ROUGE-L)
//   dedup          drop test snippets duplicated in the train set
//   end-to-end     build-graphs -> train -> summarize -> evaluate
//
// Every command prints one JSON report object to stdout — also on failure —
// and exits 0 only when all requested stages succeed. Configuration resolves
// as: preset defaults (GYPSUM_SEED env overrides the preset seed) -> --config
// file -> --seed -> --set key=value pairs, in order.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gypsum/config.hpp"
#include "gypsum/datatool.hpp"
#include "gypsum/errors.hpp"
#include "gypsum/frontend.hpp"
#include "gypsum/graph.hpp"
#include "gypsum/inference.hpp"
#include "gypsum/metrics.hpp"
#include "gypsum/model.hpp"
#include "gypsum/tensor.hpp"
#include "gypsum/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gypsum;

namespace {

// A failure attributed to a named pipeline stage; the stage name lands in the
// JSON report's "failed_stage" field.
struct StageFailure : std::runtime_error {
  std::string stage;
  StageFailure(std::string stage_name, const std::string& msg)
      : std::runtime_error(msg), stage(std::move(stage_name)) {}
};

// ---------------------------------------------------------------------------
// Configuration plumbing.
struct ConfigCli {
  std::string file;
  std::string preset = "desk";
  std::string language = "java";
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool dump = false;
};

void add_config_options(CLI::App& app, ConfigCli& c) {
  app.add_option("--config", c.file,
                 "key = value configuration file applied over the preset");
  app.add_option("--preset", c.preset, "configuration preset: desk | paper");
  app.add_option("--language", c.language, "source language: java | python");
  app.add_option("--seed", c.seed, "random seed (beats GYPSUM_SEED and file)")
      ->each([&c](const std::string&) { c.seed_given = true; });
  app.add_option("--set", c.sets,
                 "extra key=value override, repeatable, applied last");
  app.add_flag("--dump-config", c.dump,
               "print the fully resolved configuration and exit");
}

RunConfig resolve_config(const ConfigCli& c) {
  RunConfig cfg = preset_config(c.preset, c.language);
  if (!c.file.empty()) cfg = load_config_file(c.file, cfg);
  if (c.seed_given) apply_config_line(cfg, "seed", std::to_string(c.seed));
  for (const std::string& kv : c.sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects key=value, got: " + kv);
    std::string key = kv.substr(0, eq);
    std::string value = kv.substr(eq + 1);
    auto strip = [](std::string& s) {
      while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
      while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.pop_back();
    };
    strip(key);
    strip(value);
    apply_config_line(cfg, key, value);
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Shared helpers.
void ensure_parent_dir(const std::string& path) {
  fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

std::ofstream open_out(const std::string& path) {
  ensure_parent_dir(path);
  std::ofstream f(path);
  if (!f) throw DataError("cannot open for writing: " + path);
  return f;
}

json skips_json(const PreparedData& p) {
  return json{{"parse", p.skipped_parse},
              {"node_cap", p.skipped_node_cap},
              {"empty", p.skipped_empty}};
}

std::unordered_map<std::string, SemanticGraph> load_graph_file(
    const std::string& path) {
  std::ifstream f(path);
  if (!f) throw MissingFile(path);
  std::unordered_map<std::string, SemanticGraph> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    SemanticGraph g = deserialize_graph(line);
    std::string id = g.id;
    out.emplace(std::move(id), std::move(g));
  }
  return out;
}

// Pairs snippets with graphs loaded from a build-graphs file, with the same
// skip accounting as in-process preparation: a snippet whose graph is absent
// from the file counts as a parse skip.
PreparedData prepare_with_graphs(
    const std::vector<SourceSnippet>& data,
    const std::unordered_map<std::string, SemanticGraph>& graphs,
    const RunConfig& cfg, const Tokenizer& tok) {
  PreparedData out;
  for (const SourceSnippet& s : data) {
    if (tok.split(s.code).empty()) {
      ++out.skipped_empty;
      continue;
    }
    auto it = graphs.find(s.id);
    if (it == graphs.end()) {
      ++out.skipped_parse;
      continue;
    }
    if (it->second.ast.size() > cfg.node_cap) {
      ++out.skipped_node_cap;
      continue;
    }
    out.examples.push_back(PreparedExample{s, it->second});
  }
  return out;
}

PreparedData prepare(const std::vector<SourceSnippet>& data,
                     const std::string& graphs_path, const RunConfig& cfg,
                     const Tokenizer& tok) {
  if (graphs_path.empty()) return prepare_examples(data, cfg, tok);
  return prepare_with_graphs(data, load_graph_file(graphs_path), cfg, tok);
}

// ---------------------------------------------------------------------------
// build-graphs
struct BuildGraphsOpts {
  std::string input, output;
};

json run_build_graphs(const RunConfig& cfg, const BuildGraphsOpts& o) {
  std::vector<SourceSnippet> data = load_dataset(o.input);
  HeuristicTokenizer tok;
  PreparedData prep = prepare_examples(data, cfg, tok);
  if (prep.examples.empty())
    throw StageFailure("build-graphs",
                       "no graphs could be built from " + o.input);
  std::ofstream f = open_out(o.output);
  for (const PreparedExample& ex : prep.examples)
    f << serialize_graph(ex.graph) << '\n';
  return json{{"command", "build-graphs"}, {"ok", true},
              {"input", o.input},          {"output", o.output},
              {"total", data.size()},      {"built", prep.examples.size()},
              {"skipped", skips_json(prep)}};
}

// ---------------------------------------------------------------------------
// train
struct TrainOpts {
  std::string train, val, graphs, val_graphs, out_dir;
};

json run_train(const RunConfig& cfg, const TrainOpts& o) {
  std::vector<SourceSnippet> train_data = load_dataset(o.train);
  std::vector<SourceSnippet> val_data;
  if (!o.val.empty()) val_data = load_dataset(o.val);

  HeuristicTokenizer tok;
  PreparedData train_p = prepare(train_data, o.graphs, cfg, tok);
  PreparedData val_p = prepare(val_data, o.val_graphs, cfg, tok);
  if (train_p.examples.empty())
    throw StageFailure("train", "no trainable examples in " + o.train);

  fs::create_directories(o.out_dir);
  Vocabulary vocab = build_vocabulary(train_data, tok, cfg.vocab_size);
  std::string vocab_path = (fs::path(o.out_dir) / "vocab.txt").string();
  vocab.save(vocab_path);
  open_out((fs::path(o.out_dir) / "config.txt").string()) << dump_config(cfg);

  GypsumModel m(cfg, vocab, collect_kind_registry(train_p.examples));
  std::ofstream epoch_log =
      open_out((fs::path(o.out_dir) / "epochs.jsonl").string());
  TrainResult r = train_model(m, train_p, val_p, tok, o.out_dir, &epoch_log);

  return json{{"command", "train"},
              {"ok", true},
              {"examples", train_p.examples.size()},
              {"val_examples", val_p.examples.size()},
              {"skipped", skips_json(train_p)},
              {"vocab_size", vocab.size()},
              {"vocab", vocab_path},
              {"checkpoint", r.best_checkpoint},
              {"best_epoch", r.best_epoch},
              {"best_val", r.best_val},
              {"epochs_run", r.history.size()},
              {"final_train_loss",
               r.history.empty() ? 0.0 : r.history.back().train_loss}};
}

// ---------------------------------------------------------------------------
// summarize
struct SummarizeOpts {
  std::string input, checkpoint, vocab, output, graphs;
  int beam = 0;  // 0: use the checkpoint config's beam size
};

json run_summarize(const SummarizeOpts& o) {
  Vocabulary vocab = Vocabulary::load(o.vocab);
  GypsumModel m = model_from_checkpoint(o.checkpoint, std::move(vocab));
  int beam = o.beam > 0 ? o.beam : m.cfg.beam_size;

  std::vector<SourceSnippet> data = load_dataset(o.input);
  std::unordered_map<std::string, SemanticGraph> gmap;
  if (!o.graphs.empty()) gmap = load_graph_file(o.graphs);

  HeuristicTokenizer tok;
  ControlEdgeOptions copts = control_options(m.cfg);
  std::ofstream out = open_out(o.output);

  NoGradGuard no_grad;
  long long generated = 0, skipped = 0;
  for (const SourceSnippet& s : data) {
    json line{{"id", s.id}, {"reference", s.summary}};
    try {
      SemanticGraph g;
      if (!o.graphs.empty()) {
        auto it = gmap.find(s.id);
        if (it == gmap.end()) throw DataError("no graph for id " + s.id);
        g = it->second;
      } else {
        ExtendedAst ast = extend_ast(parse_source(s), tok, s.language);
        g = build_graph(std::move(ast), s.id, copts);
      }
      if (g.ast.size() > m.cfg.node_cap)
        throw DataError("node cap exceeded: " + std::to_string(g.ast.size()));
      SnippetEncoding se =
          encode_snippet(m, s.code, g, tok, ForwardContext{});
      std::vector<SummaryHypothesis> hyps = beam_search(m, se, beam);
      line["summary"] = hyps.front().text;
      line["logprob"] = hyps.front().logprob;
      line["score"] = hyps.front().score;
      ++generated;
    } catch (const ParseError& e) {
      line["summary"] = "";
      line["skipped"] = e.what();
      ++skipped;
    } catch (const DataError& e) {
      line["summary"] = "";
      line["skipped"] = e.what();
      ++skipped;
    } catch (const UnknownKind& e) {
      line["summary"] = "";
      line["skipped"] = e.what();
      ++skipped;
    }
    out << line.dump() << '\n';
  }
  return json{{"command", "summarize"}, {"ok", true},
              {"input", o.input},       {"output", o.output},
              {"beam", beam},           {"count", data.size()},
              {"generated", generated}, {"skipped", skipped}};
}

// ---------------------------------------------------------------------------
// evaluate
struct EvaluateOpts {
  std::string predictions, references, output;
};

json run_evaluate(const EvaluateOpts& o) {
  std::vector<SourceSnippet> refs = load_dataset(o.references);

  std::ifstream pf(o.predictions);
  if (!pf) throw MissingFile(o.predictions);
  std::unordered_map<std::string, std::string> pred;
  std::string line;
  int lineno = 0;
  while (std::getline(pf, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("bad prediction JSON at line " + std::to_string(lineno) +
                      ": " + e.what());
    }
    if (!j.contains("id"))
      throw DataError("prediction line " + std::to_string(lineno) +
                      " has no id");
    pred[j.at("id").get<std::string>()] = j.value("summary", "");
  }

  std::vector<std::vector<std::string>> hyps, refs_tok;
  std::vector<std::string> ids;
  for (const SourceSnippet& s : refs) {
    auto it = pred.find(s.id);
    if (it == pred.end())
      throw DataError("no prediction for reference id " + s.id);
    hyps.push_back(metric_tokens(it->second));
    refs_tok.push_back(metric_tokens(s.summary));
    ids.push_back(s.id);
  }

  MetricReport rep = evaluate_corpus(hyps, refs_tok);
  if (!o.output.empty()) {
    std::ofstream f = open_out(o.output);
    for (size_t i = 0; i < ids.size(); ++i)
      f << json{{"id", ids[i]},
                {"bleu", rep.bleu_scores[i]},
                {"meteor", rep.meteor_scores[i]},
                {"rouge_l", rep.rouge_scores[i]}}
               .dump()
        << '\n';
  }
  return json{{"command", "evaluate"}, {"ok", true},
              {"count", ids.size()},   {"bleu", rep.bleu},
              {"meteor", rep.meteor},  {"rouge_l", rep.rouge_l}};
}

// ---------------------------------------------------------------------------
// dedup
struct DedupOpts {
  std::string train, test, output, histogram, report;
  bool char_mode = false;
};

json run_dedup(const RunConfig& cfg, const DedupOpts& o) {
  std::vector<SourceSnippet> train = load_dataset(o.train);
  std::vector<SourceSnippet> test = load_dataset(o.test);
  bool char_mode = o.char_mode || cfg.lcs_char_mode;
  DedupReport rep = dedup_against_train(train, test, char_mode);

  ensure_parent_dir(o.output);
  save_dataset(o.output, rep.kept);
  if (!o.histogram.empty()) {
    ensure_parent_dir(o.histogram);
    write_histogram_csv(o.histogram, rep.histogram);
  }

  json entries = json::array();
  for (const DedupEntry& e : rep.entries)
    entries.push_back(json{{"id", e.id},
                           {"max_score", e.max_score},
                           {"nearest_train_id", e.nearest_train_id},
                           {"removed", e.removed}});
  json report{{"command", "dedup"},
              {"ok", true},
              {"char_mode", char_mode},
              {"train_size", train.size()},
              {"test_size", test.size()},
              {"kept", rep.kept.size()},
              {"removed", test.size() - rep.kept.size()},
              {"output", o.output},
              {"histogram", rep.histogram},
              {"entries", entries}};
  if (!o.report.empty()) open_out(o.report) << report.dump(2) << '\n';
  return report;
}

// ---------------------------------------------------------------------------
// end-to-end
struct EndToEndOpts {
  std::string train, val, test, out_dir;
  std::string checkpoint, vocab;  // skip training when a checkpoint is given
};

json run_end_to_end(const RunConfig& cfg, const EndToEndOpts& o) {
  json report{{"command", "end-to-end"}, {"ok", false}};
  json stages = json::object();
  std::string stage = "config";
  try {
    bool summarize_only = !o.checkpoint.empty();
    if (!summarize_only && o.train.empty())
      throw ConfigError("end-to-end needs --train (or --checkpoint to skip training)");
    if (summarize_only && o.vocab.empty())
      throw ConfigError("--checkpoint also needs --vocab");
    fs::create_directories(o.out_dir);
    auto in_out = [&](const char* name) {
      return (fs::path(o.out_dir) / name).string();
    };

    stage = "build-graphs";
    json built = json::object();
    if (!summarize_only) {
      built["train"] = run_build_graphs(
          cfg, BuildGraphsOpts{o.train, in_out("graphs_train.jsonl")});
      if (!o.val.empty())
        built["val"] = run_build_graphs(
            cfg, BuildGraphsOpts{o.val, in_out("graphs_val.jsonl")});
    }
    built["test"] = run_build_graphs(
        cfg, BuildGraphsOpts{o.test, in_out("graphs_test.jsonl")});
    stages["build_graphs"] = built;

    std::string checkpoint = o.checkpoint;
    std::string vocab = o.vocab;
    if (!summarize_only) {
      stage = "train";
      TrainOpts t;
      t.train = o.train;
      t.val = o.val;
      t.graphs = in_out("graphs_train.jsonl");
      t.val_graphs = o.val.empty() ? "" : in_out("graphs_val.jsonl");
      t.out_dir = o.out_dir;
      stages["train"] = run_train(cfg, t);
      checkpoint = stages["train"]["checkpoint"].get<std::string>();
      vocab = stages["train"]["vocab"].get<std::string>();
    }

    stage = "inference";
    SummarizeOpts s;
    s.input = o.test;
    s.checkpoint = checkpoint;
    s.vocab = vocab;
    s.output = in_out("predictions.jsonl");
    s.graphs = in_out("graphs_test.jsonl");
    s.beam = cfg.beam_size;
    stages["summarize"] = run_summarize(s);

    stage = "evaluate";
    stages["evaluate"] = run_evaluate(EvaluateOpts{
        s.output, o.test, in_out("scores.jsonl")});

    report["ok"] = true;
    report["stages"] = stages;
  } catch (const StageFailure& e) {
    report["stages"] = stages;
    report["failed_stage"] = e.stage;
    report["error"] = e.what();
  } catch (const std::exception& e) {
    report["stages"] = stages;
    report["failed_stage"] = stage;
    report["error"] = e.what();
  }
  if (!o.out_dir.empty() && fs::exists(o.out_dir))
    open_out((fs::path(o.out_dir) / "report.json").string())
        << report.dump(2) << '\n';
  return report;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "gypsum: hybrid code summarization pipeline "
      "(semantic graphs, dual-encoder model, copy-aware decoding, metrics)"};
  app.require_subcommand(0, 1);

  ConfigCli ccli;
  add_config_options(app, ccli);

  BuildGraphsOpts bg_opts;
  CLI::App* bg = app.add_subcommand(
      "build-graphs", "Parse a dataset and serialize semantic graphs");
  bg->fallthrough();
  bg->add_option("--input", bg_opts.input, "dataset JSONL")->required();
  bg->add_option("--output", bg_opts.output, "graph JSONL to write")->required();

  TrainOpts tr_opts;
  CLI::App* tr = app.add_subcommand("train", "Train a model on a dataset");
  tr->fallthrough();
  tr->add_option("--train", tr_opts.train, "training dataset JSONL")->required();
  tr->add_option("--val", tr_opts.val, "validation dataset JSONL");
  tr->add_option("--graphs", tr_opts.graphs,
                 "pre-built graph JSONL for the training set");
  tr->add_option("--val-graphs", tr_opts.val_graphs,
                 "pre-built graph JSONL for the validation set");
  tr->add_option("--out", tr_opts.out_dir, "output directory")->required();

  SummarizeOpts sm_opts;
  CLI::App* sm = app.add_subcommand(
      "summarize", "Decode summaries for a dataset with a trained model");
  sm->fallthrough();
  sm->add_option("--input", sm_opts.input, "dataset JSONL")->required();
  sm->add_option("--checkpoint", sm_opts.checkpoint, "model checkpoint")
      ->required();
  sm->add_option("--vocab", sm_opts.vocab, "vocabulary file")->required();
  sm->add_option("--output", sm_opts.output, "predictions JSONL to write")
      ->required();
  sm->add_option("--graphs", sm_opts.graphs, "pre-built graph JSONL");
  sm->add_option("--beam", sm_opts.beam,
                 "beam width (default: checkpoint config)");

  EvaluateOpts ev_opts;
  CLI::App* ev = app.add_subcommand(
      "evaluate", "Score predictions against references");
  ev->fallthrough();
  ev->add_option("--predictions", ev_opts.predictions, "predictions JSONL")
      ->required();
  ev->add_option("--references", ev_opts.references, "reference dataset JSONL")
      ->required();
  ev->add_option("--output", ev_opts.output, "per-example scores JSONL");

  DedupOpts dd_opts;
  CLI::App* dd = app.add_subcommand(
      "dedup", "Remove test snippets duplicated in the train set");
  dd->fallthrough();
  dd->add_option("--train", dd_opts.train, "train dataset JSONL")->required();
  dd->add_option("--test", dd_opts.test, "test dataset JSONL")->required();
  dd->add_option("--output", dd_opts.output, "cleaned dataset JSONL to write")
      ->required();
  dd->add_option("--histogram", dd_opts.histogram, "similarity histogram CSV");
  dd->add_option("--report", dd_opts.report, "full report JSON file");
  dd->add_flag("--char-mode", dd_opts.char_mode,
               "character-level LCS instead of sub-word tokens");

  EndToEndOpts ee_opts;
  CLI::App* ee = app.add_subcommand(
      "end-to-end", "build-graphs -> train -> summarize -> evaluate");
  ee->fallthrough();
  ee->add_option("--train", ee_opts.train, "training dataset JSONL");
  ee->add_option("--val", ee_opts.val, "validation dataset JSONL");
  ee->add_option("--test", ee_opts.test, "test dataset JSONL")->required();
  ee->add_option("--out", ee_opts.out_dir, "output directory")->required();
  ee->add_option("--checkpoint", ee_opts.checkpoint,
                 "skip training and summarize with this checkpoint");
  ee->add_option("--vocab", ee_opts.vocab,
                 "vocabulary file (required with --checkpoint)");

  CLI11_PARSE(app, argc, argv);

  RunConfig cfg;
  try {
    cfg = resolve_config(ccli);
  } catch (const std::exception& e) {
    std::cout << json{{"ok", false},
                      {"failed_stage", "config"},
                      {"error", e.what()}}
                     .dump(2)
              << '\n';
    return 1;
  }

  if (ccli.dump) {
    std::cout << dump_config(cfg);
    return 0;
  }

  std::string command, stage;
  json report;
  try {
    if (bg->parsed()) {
      command = stage = "build-graphs";
      report = run_build_graphs(cfg, bg_opts);
    } else if (tr->parsed()) {
      command = stage = "train";
      report = run_train(cfg, tr_opts);
    } else if (sm->parsed()) {
      command = "summarize";
      stage = "inference";
      report = run_summarize(sm_opts);
    } else if (ev->parsed()) {
      command = stage = "evaluate";
      report = run_evaluate(ev_opts);
    } else if (dd->parsed()) {
      command = stage = "dedup";
      report = run_dedup(cfg, dd_opts);
    } else if (ee->parsed()) {
      command = "end-to-end";
      stage = "end-to-end";
      report = run_end_to_end(cfg, ee_opts);
    } else {
      std::cerr << app.help();
      return 2;
    }
  } catch (const StageFailure& e) {
    report = json{{"command", command},
                  {"ok", false},
                  {"failed_stage", e.stage},
                  {"error", e.what()}};
  } catch (const std::exception& e) {
    report = json{{"command", command},
                  {"ok", false},
                  {"failed_stage", stage},
                  {"error", e.what()}};
  }

  std::cout << report.dump(2) << '\n';
  return report.value("ok", false) ? 0 : 1;
}
