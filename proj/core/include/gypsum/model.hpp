#pragma once

#include <string>
#include <vector>

#include "gypsum/cencoder.hpp"
#include "gypsum/config.hpp"
#include "gypsum/copygen.hpp"
#include "gypsum/decoder.hpp"
#include "gypsum/gencoder.hpp"
#include "gypsum/graph.hpp"
#include "gypsum/nn.hpp"
#include "gypsum/tokenizer.hpp"
#include "gypsum/vocab.hpp"

namespace gypsum {

// Full assembly: one shared token table feeding both encoders, the fusion
// decoder, and the copy/generate head, all parameters in a single store.
struct GypsumModel {
  RunConfig cfg;
  Vocabulary vocab;
  KindRegistry kinds;
  ParamStore params;
  Tensor tok_emb;  // [|vocab|, d_model], shared by both encoders
  CEncoderParams cencoder;
  GEncoderParams gencoder;
  DecoderParams decoder;
  CopyGenParams copygen;

  GypsumModel(const RunConfig& config, Vocabulary vocabulary,
              KindRegistry kind_registry);
};

// Maps the per-pattern config switches onto graph construction options.
ControlEdgeOptions control_options(const RunConfig& cfg);

// Everything one snippet contributes to a decode: sub-word tokens, both
// encoder outputs, the copyable-position masks, the surface strings behind
// each copyable position, and the extended output vocabulary they induce.
struct SnippetEncoding {
  TokenSequence tokens;
  EncoderOutput enc_c;
  GraphEncoding enc_g;
  CopyMasks masks;
  std::vector<std::string> code_texts;  // length l_c; "" on padding
  std::vector<std::string> leaf_texts;  // length l_g; "" off-leaf
  ExtendedVocab ext;
};
SnippetEncoding encode_snippet(const GypsumModel& m, const std::string& code,
                               const SemanticGraph& g, const Tokenizer& tok,
                               const ForwardContext& ctx);

// Decoder input ids (BOS-led, in-vocabulary) and the expected outputs: the
// summary's sub-words plus EOS, each resolved to an extended-vocabulary id
// (-1 when the token is neither in the vocabulary nor copyable — such
// positions have probability zero and hit the loss clamp).
struct TargetPair {
  std::vector<int> input_ids;            // BOS, y_1 .. y_T
  std::vector<std::string> expect_text;  // y_1 .. y_T (no EOS)
  std::vector<int> expect_ids_ext;       // y_1 .. y_T, EOS
};
TargetPair make_targets(const Vocabulary& vocab, const ExtendedVocab& ext,
                        const Tokenizer& tok, const std::string& summary,
                        int l_s);

// Teacher-forced pass: the decoder run plus one merged distribution per
// target position.
struct TrainingForward {
  DecoderOutput dec;
  std::vector<StepDistribution> steps;
};
TrainingForward forward_steps(const GypsumModel& m, const SnippetEncoding& se,
                              const std::vector<int>& input_ids,
                              const ForwardContext& ctx);

// Incremental decoding: one history of layer inputs per decoder layer.
struct DecodeState {
  std::vector<std::vector<Tensor>> hist;
  int next_pos() const {
    return hist.empty() ? 0 : static_cast<int>(hist[0].size());
  }
};
// Extends the state by one position fed with `input_id` and returns the
// distribution for the next output token. LengthError once l_s is reached.
StepDistribution decode_step(const GypsumModel& m, const SnippetEncoding& se,
                             DecodeState& st, int input_id,
                             const ForwardContext& ctx);

// Vocabulary-space id to feed back when the previous output was `ext_id`
// (novel copies have no embedding row and re-enter as UNK).
inline int feedback_id(const ExtendedVocab& ext, int ext_id) {
  return ext_id < ext.vocab_size ? ext_id : Vocabulary::kUnk;
}

// Mean over sequences of the per-sequence sum of -log p(target). Target
// probabilities are clamped at 1e-12; `clamped` counts how often the clamp
// fired (including unreachable targets with id -1).
struct NllResult {
  Tensor loss;  // scalar [1]
  int clamped = 0;
};
NllResult nll_loss(const std::vector<std::vector<Tensor>>& seq_step_dists,
                   const std::vector<std::vector<int>>& seq_target_ids);

}  // namespace gypsum
