#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gypsum/model.hpp"

namespace gypsum {

// ---------------------------------------------------------------------------
// Optimizer: Adam with bias correction, one moment pair per parameter tensor
// (aligned with the store's creation order).
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long step = 0;
  std::vector<std::vector<double>> m, v;
};
AdamState make_adam(const ParamStore& ps);

// L2 norm over every gradient entry in the store.
double global_grad_norm(const ParamStore& ps);
// Scales all gradients down so their global norm is at most max_norm.
// No-op when max_norm <= 0 or the norm is already within bounds.
void clip_gradients(const ParamStore& ps, double max_norm);
// One update: m,v moment update with bias correction, then the step at `lr`.
void adam_step(const ParamStore& ps, AdamState& st, double lr);

// ---------------------------------------------------------------------------
// Data preparation.
struct PreparedExample {
  SourceSnippet snippet;
  SemanticGraph graph;
};
struct PreparedData {
  std::vector<PreparedExample> examples;
  int skipped_parse = 0;     // front-end or graph-construction failures
  int skipped_node_cap = 0;  // graphs beyond cfg.node_cap
  int skipped_empty = 0;     // snippets with no code tokens
};
PreparedData prepare_examples(const std::vector<SourceSnippet>& data,
                              const RunConfig& cfg, const Tokenizer& tok);

// Sub-word counts over code and summaries; vocabulary capped at max_size.
Vocabulary build_vocabulary(const std::vector<SourceSnippet>& data,
                            const Tokenizer& tok, int max_size);
// Union of node kinds over the prepared graphs, first-seen order.
KindRegistry collect_kind_registry(const std::vector<PreparedExample>& examples);

// ---------------------------------------------------------------------------
// Checkpoints: a parameter archive whose header also records the epoch, the
// vocabulary hash, the resolved config, the kind registry, the data-order RNG
// state, and the optimizer step; entries are the parameters in creation order
// followed by the Adam moments.
struct CheckpointInfo {
  int epoch = 0;
  uint64_t vocab_hash = 0;
  std::string rng_state;
  std::vector<std::string> kinds;
  std::string config_text;
  long long adam_step = 0;
};
void save_checkpoint(const std::string& path, const GypsumModel& m,
                     const AdamState& adam, int epoch,
                     const std::string& rng_state);
CheckpointInfo read_checkpoint_info(const std::string& path);
// Copies parameters (and, when `adam` is non-null, optimizer moments) into an
// already-assembled model; every name must exist with the exact shape.
void load_checkpoint_params(const std::string& path, GypsumModel& m,
                            AdamState* adam);
// Rebuilds the model a checkpoint describes: config from the stored snapshot,
// kinds from the stored registry, vocabulary supplied by the caller and
// verified against the stored hash.
GypsumModel model_from_checkpoint(const std::string& path, Vocabulary vocab);

// ---------------------------------------------------------------------------
// Training loop.
struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  int clamped = 0;    // loss-floor hits this epoch
  bool improved = false;
};
struct TrainResult {
  int best_epoch = -1;
  double best_val = 0.0;
  std::string best_checkpoint;  // path of the retained best checkpoint
  std::vector<EpochStats> history;
};

// Teacher-forced training with Adam, per-epoch validation, early stopping on
// validation-loss patience, and best-checkpoint retention under out_dir.
// When `val` is empty the training loss stands in for validation. Every
// epoch appends one JSON line to *epoch_log when it is non-null.
// Deterministic for a fixed config seed. DataError on an empty train set.
TrainResult train_model(GypsumModel& m, const PreparedData& train,
                        const PreparedData& val, const Tokenizer& tok,
                        const std::string& out_dir, std::ostream* epoch_log);

// Mean validation-style loss (no dropout, no gradients) over examples.
// Returns the clamp count through *clamped when non-null.
double evaluate_loss(const GypsumModel& m, const PreparedData& data,
                     const Tokenizer& tok, int* clamped);

}  // namespace gypsum
