#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "gypsum/config.hpp"
#include "gypsum/nn.hpp"
#include "gypsum/tensor.hpp"
#include "gypsum/vocab.hpp"

namespace gypsum {

// Output head combining generation from the vocabulary with copying from the
// token encoder's positions and the graph encoder's leaf positions. All
// distributions are differentiable tensors.
struct CopyGenParams {
  Tensor w_gen;  // [3, d_e] gate logits: (generate, copy-code, copy-leaf)
  Tensor w_voc;  // [vocab, d_e] vocabulary logits
};
// `vocab_size` is the actual vocabulary being decoded over (it may be smaller
// than the configured maximum when the corpus has few distinct sub-words).
CopyGenParams make_copygen(ParamStore& ps, const std::string& prefix, int d_e,
                           int vocab_size);

// softmax(w_gen . d_t) -> [3]
Tensor gate_probs(const CopyGenParams& p, const Tensor& d_t);
// softmax(w_voc . d_t) -> [vocab]
Tensor vocab_dist(const CopyGenParams& p, const Tensor& d_t);

// Copy-source masks: `code[i]`=1 when encoder position i holds a real code
// sub-word; `leaf[i]`=1 when graph output position i holds a leaf node.
struct CopyMasks {
  std::vector<uint8_t> code;  // length l_c
  std::vector<uint8_t> leaf;  // length l_g
};

// Masks each attention row to its copyable positions. a_c is renormalized;
// a_g is renormalized when `renormalize_leaves` (the default) and otherwise
// left sub-normalized. Throws DegenerateMask when a mask selects nothing.
struct CopyDists {
  Tensor a_c;  // [l_c]
  Tensor a_g;  // [l_g]
};
CopyDists copy_dists(const Tensor& attn_c_row, const Tensor& attn_g_row,
                     const CopyMasks& masks, bool renormalize_leaves);

// Extended vocabulary for one input: shared sub-word ids first, then novel
// source strings in first-appearance order (code positions, then leaves).
struct ExtendedVocab {
  int vocab_size = 0;                // shared vocabulary prefix
  std::vector<std::string> novel;    // out-of-vocabulary source strings
  std::unordered_map<std::string, int> novel_index;  // string -> extended id
  std::vector<int> code_pos_ext;     // per code position: extended id, -1 masked
  std::vector<int> leaf_pos_ext;     // per graph position: extended id, -1 masked

  int size() const { return vocab_size + static_cast<int>(novel.size()); }
  // Extended id for a surface string; -1 when neither in-vocab nor in-source.
  int id_of(const Vocabulary& vocab, const std::string& token) const;
  // Surface string for an extended id.
  const std::string& token_of(const Vocabulary& vocab, int ext_id) const;
};
ExtendedVocab build_extended_vocab(const Vocabulary& vocab,
                                   const std::vector<std::string>& code_tokens,
                                   const std::vector<std::string>& leaf_texts,
                                   const CopyMasks& masks);

// Merged step distribution over the extended vocabulary:
//   p(y) = gate[0]*p_voc(y) + gate[1]*sum_{code pos of y} a_c
//                           + gate[2]*sum_{leaf pos of y} a_g
// with matching by exact surface sub-word string.
Tensor token_dist(const Tensor& gate, const Tensor& p_voc, const Tensor& a_c,
                  const Tensor& a_g, const ExtendedVocab& ext);

// Full head for one decoder step.
struct StepDistribution {
  Tensor gate;    // [3]
  Tensor p_voc;   // [vocab]
  Tensor a_c;     // [l_c]
  Tensor a_g;     // [l_g]
  Tensor merged;  // [ext.size()]
};
StepDistribution step_distribution(const CopyGenParams& p, const Tensor& d_t,
                                   const Tensor& attn_c_row, const Tensor& attn_g_row,
                                   const CopyMasks& masks, const ExtendedVocab& ext,
                                   const RunConfig& cfg);

}  // namespace gypsum
