#include "gypsum/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

#include "gypsum/archive.hpp"
#include "gypsum/errors.hpp"
#include "gypsum/frontend.hpp"

namespace gypsum {

namespace {

std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

uint64_t parse_hash_hex(const std::string& s) {
  return static_cast<uint64_t>(std::stoull(s, nullptr, 16));
}

}  // namespace

AdamState make_adam(const ParamStore& ps) {
  AdamState st;
  for (const auto& name : ps.names()) {
    size_t n = ps.get(name).size();
    st.m.emplace_back(n, 0.0);
    st.v.emplace_back(n, 0.0);
  }
  return st;
}

double global_grad_norm(const ParamStore& ps) {
  double sq = 0.0;
  for (const auto& name : ps.names()) {
    Tensor t = ps.get(name);
    for (size_t k = 0; k < t.size(); ++k) sq += t.grad()[k] * t.grad()[k];
  }
  return std::sqrt(sq);
}

void clip_gradients(const ParamStore& ps, double max_norm) {
  if (max_norm <= 0.0) return;
  double norm = global_grad_norm(ps);
  if (norm <= max_norm || norm == 0.0) return;
  double scale = max_norm / norm;
  for (const auto& name : ps.names()) {
    Tensor t = ps.get(name);
    for (size_t k = 0; k < t.size(); ++k) t.grad()[k] *= scale;
  }
}

void adam_step(const ParamStore& ps, AdamState& st, double lr) {
  const auto& names = ps.names();
  if (st.m.size() != names.size() || st.v.size() != names.size())
    throw ShapeMismatch("optimizer state does not match the parameter store");
  ++st.step;
  const double b1 = st.beta1, b2 = st.beta2;
  const double bc1 = 1.0 - std::pow(b1, double(st.step));
  const double bc2 = 1.0 - std::pow(b2, double(st.step));
  for (size_t i = 0; i < names.size(); ++i) {
    Tensor t = ps.get(names[i]);
    auto& m = st.m[i];
    auto& v = st.v[i];
    if (m.size() != t.size())
      throw ShapeMismatch("optimizer moment size mismatch for " + names[i]);
    for (size_t k = 0; k < t.size(); ++k) {
      double g = t.grad()[k];
      m[k] = b1 * m[k] + (1.0 - b1) * g;
      v[k] = b2 * v[k] + (1.0 - b2) * g * g;
      double mhat = m[k] / bc1;
      double vhat = v[k] / bc2;
      t.value()[k] -= lr * mhat / (std::sqrt(vhat) + st.eps);
    }
  }
}

PreparedData prepare_examples(const std::vector<SourceSnippet>& data,
                              const RunConfig& cfg, const Tokenizer& tok) {
  PreparedData out;
  ControlEdgeOptions opts = control_options(cfg);
  for (const auto& s : data) {
    if (tok.split(s.code).empty()) {
      ++out.skipped_empty;
      continue;
    }
    try {
      ExtendedAst ast = extend_ast(parse_source(s), tok, s.language);
      if (ast.size() > cfg.node_cap) {
        ++out.skipped_node_cap;
        continue;
      }
      SemanticGraph g = build_graph(std::move(ast), s.id, opts);
      out.examples.push_back(PreparedExample{s, std::move(g)});
    } catch (const ParseError&) {
      ++out.skipped_parse;
    } catch (const DataError&) {
      ++out.skipped_parse;
    }
  }
  return out;
}

Vocabulary build_vocabulary(const std::vector<SourceSnippet>& data,
                            const Tokenizer& tok, int max_size) {
  std::unordered_map<std::string, long long> counts;
  for (const auto& s : data) {
    for (const auto& w : tok.split(s.code)) ++counts[w];
    for (const auto& w : tok.split(s.summary)) ++counts[w];
  }
  return Vocabulary::build(counts, max_size);
}

KindRegistry collect_kind_registry(
    const std::vector<PreparedExample>& examples) {
  std::vector<std::string> kinds;
  std::unordered_map<std::string, int> seen;
  for (const auto& ex : examples) collect_kinds(ex.graph, kinds, seen);
  return KindRegistry(kinds);
}

void save_checkpoint(const std::string& path, const GypsumModel& m,
                     const AdamState& adam, int epoch,
                     const std::string& rng_state) {
  Archive a;
  a.meta = nlohmann::json{
      {"kind", "gypsum-checkpoint"},
      {"epoch", epoch},
      {"vocab_hash", hash_hex(m.vocab.hash())},
      {"config", dump_config(m.cfg)},
      {"kinds", m.kinds.kinds()},
      {"rng_state", rng_state},
      {"adam_step", adam.step},
  };
  const auto& names = m.params.names();
  if (adam.m.size() != names.size())
    throw ShapeMismatch("optimizer state does not match the parameter store");
  for (const auto& name : names) {
    Tensor t = m.params.get(name);
    a.entries.push_back(ArchiveEntry{name, t.shape(), t.value()});
  }
  for (size_t i = 0; i < names.size(); ++i) {
    int n = static_cast<int>(adam.m[i].size());
    a.entries.push_back(ArchiveEntry{"adam.m." + names[i], {n}, adam.m[i]});
    a.entries.push_back(ArchiveEntry{"adam.v." + names[i], {n}, adam.v[i]});
  }
  write_archive(path, a);
}

CheckpointInfo read_checkpoint_info(const std::string& path) {
  Archive a = read_archive(path);
  CheckpointInfo info;
  try {
    if (a.meta.value("kind", "") != "gypsum-checkpoint")
      throw FormatError("not a checkpoint archive: " + path);
    info.epoch = a.meta.at("epoch").get<int>();
    info.vocab_hash = parse_hash_hex(a.meta.at("vocab_hash").get<std::string>());
    info.rng_state = a.meta.value("rng_state", "");
    info.kinds = a.meta.at("kinds").get<std::vector<std::string>>();
    info.config_text = a.meta.at("config").get<std::string>();
    info.adam_step = a.meta.value("adam_step", 0LL);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint header malformed: " + std::string(e.what()));
  }
  return info;
}

void load_checkpoint_params(const std::string& path, GypsumModel& m,
                            AdamState* adam) {
  Archive a = read_archive(path);
  const auto& names = m.params.names();
  auto copy_into = [&](const std::string& key, std::vector<double>& dst,
                       const std::vector<int>& want_shape) {
    const ArchiveEntry* e = a.find(key);
    if (!e) throw ShapeMismatch("checkpoint lacks entry " + key);
    if (e->shape != want_shape)
      throw ShapeMismatch("checkpoint entry " + key + " has the wrong shape");
    dst = e->values;
  };
  for (const auto& name : names) {
    Tensor t = m.params.get(name);
    copy_into(name, t.value(), t.shape());
  }
  if (adam) {
    CheckpointInfo info = read_checkpoint_info(path);
    adam->step = info.adam_step;
    adam->m.assign(names.size(), {});
    adam->v.assign(names.size(), {});
    for (size_t i = 0; i < names.size(); ++i) {
      int n = static_cast<int>(m.params.get(names[i]).size());
      copy_into("adam.m." + names[i], adam->m[i], {n});
      copy_into("adam.v." + names[i], adam->v[i], {n});
    }
  }
}

GypsumModel model_from_checkpoint(const std::string& path, Vocabulary vocab) {
  CheckpointInfo info = read_checkpoint_info(path);
  if (info.vocab_hash != vocab.hash())
    throw DataError("vocabulary does not match the checkpoint hash");
  RunConfig cfg = apply_config_text(info.config_text, RunConfig{});
  GypsumModel m(cfg, std::move(vocab), KindRegistry(info.kinds));
  load_checkpoint_params(path, m, nullptr);
  return m;
}

namespace {

// Mean per-sequence loss over one span of example indices; gradients are
// recorded only when `ctx.training` callers hold live graphs (the tensors do
// that themselves — this helper just runs the forward pass).
Tensor batch_loss(const GypsumModel& m, const PreparedData& data,
                  const std::vector<int>& order, size_t lo, size_t hi,
                  const Tokenizer& tok, const ForwardContext& ctx,
                  int* clamped) {
  std::vector<std::vector<Tensor>> dists;
  std::vector<std::vector<int>> targets;
  for (size_t i = lo; i < hi; ++i) {
    const PreparedExample& ex =
        data.examples[static_cast<size_t>(order[static_cast<size_t>(i)])];
    SnippetEncoding se =
        encode_snippet(m, ex.snippet.code, ex.graph, tok, ctx);
    TargetPair tp =
        make_targets(m.vocab, se.ext, tok, ex.snippet.summary, m.cfg.l_s);
    TrainingForward fw = forward_steps(m, se, tp.input_ids, ctx);
    std::vector<Tensor> seq;
    seq.reserve(fw.steps.size());
    for (auto& s : fw.steps) seq.push_back(s.merged);
    dists.push_back(std::move(seq));
    targets.push_back(tp.expect_ids_ext);
  }
  NllResult r = nll_loss(dists, targets);
  if (clamped) *clamped += r.clamped;
  return r.loss;
}

}  // namespace

double evaluate_loss(const GypsumModel& m, const PreparedData& data,
                     const Tokenizer& tok, int* clamped) {
  if (data.examples.empty()) throw DataError("loss over an empty dataset");
  NoGradGuard ng;
  ForwardContext ctx;  // evaluation: no dropout
  std::vector<int> order(data.examples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  // One pass, mean of per-sequence losses == mean over the whole set.
  double total = 0.0;
  for (size_t i = 0; i < order.size(); ++i)
    total += batch_loss(m, data, order, i, i + 1, tok, ctx, clamped).item();
  return total / double(order.size());
}

TrainResult train_model(GypsumModel& m, const PreparedData& train,
                        const PreparedData& val, const Tokenizer& tok,
                        const std::string& out_dir, std::ostream* epoch_log) {
  if (train.examples.empty()) throw DataError("training set is empty");
  std::filesystem::create_directories(out_dir);

  AdamState adam = make_adam(m.params);
  Rng shuffle_rng(m.cfg.seed ^ 0x5DEECE66DULL);
  Rng dropout_rng(m.cfg.seed ^ 0xB5026F5AA96619E9ULL);

  TrainResult res;
  res.best_checkpoint =
      (std::filesystem::path(out_dir) / "best.ckpt").string();
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;

  std::vector<int> order(train.examples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  const size_t bs =
      std::max<size_t>(1, static_cast<size_t>(m.cfg.batch_size));
  for (int epoch = 1; epoch <= m.cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    ForwardContext ctx{true, m.cfg.dropout, &dropout_rng};
    double train_total = 0.0;
    size_t train_batches = 0;
    int clamped = 0;
    for (size_t lo = 0; lo < order.size(); lo += bs) {
      size_t hi = std::min(order.size(), lo + bs);
      m.params.zero_grad_all();
      Tensor loss =
          batch_loss(m, train, order, lo, hi, tok, ctx, &clamped);
      loss.backward();
      clip_gradients(m.params, m.cfg.grad_clip);
      adam_step(m.params, adam, m.cfg.learning_rate);
      train_total += loss.item();
      ++train_batches;
    }
    double train_loss = train_total / double(train_batches);
    double val_loss = val.examples.empty()
                          ? evaluate_loss(m, train, tok, nullptr)
                          : evaluate_loss(m, val, tok, nullptr);

    EpochStats st;
    st.epoch = epoch;
    st.train_loss = train_loss;
    st.val_loss = val_loss;
    st.clamped = clamped;
    st.improved = val_loss < best;
    if (st.improved) {
      best = val_loss;
      res.best_epoch = epoch;
      res.best_val = val_loss;
      since_best = 0;
      save_checkpoint(res.best_checkpoint, m, adam, epoch,
                      shuffle_rng.state());
    } else {
      ++since_best;
    }
    res.history.push_back(st);

    if (epoch_log) {
      nlohmann::json line{{"epoch", epoch},
                          {"train_loss", train_loss},
                          {"val_loss", val_loss},
                          {"clamped", clamped},
                          {"improved", st.improved}};
      (*epoch_log) << line.dump() << "\n";
    }
    if (m.cfg.patience > 0 && since_best >= m.cfg.patience) break;
  }
  return res;
}

}  // namespace gypsum
