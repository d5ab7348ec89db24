#pragma once

#include <string>
#include <vector>

#include "gypsum/cencoder.hpp"  // EncoderOutput
#include "gypsum/config.hpp"
#include "gypsum/nn.hpp"
#include "gypsum/tensor.hpp"

namespace gypsum {

// Fusion decoder layer: masked self-attention, one attention over the token
// encoding and one over the graph encoding, their concatenation squashed by
// tanh and projected back to d_e, then (optionally) a standard feed-forward
// block. Residuals and layer normalization follow the standard post-norm
// decoder sublayer pattern.
struct DecoderLayerParams {
  MhaParams self_attn;
  LayerNormParams ln_self;
  MhaParams attn_c;
  MhaParams attn_g;
  LinearParams w_fuse;  // [d_e, 2*d_e], no bias
  LayerNormParams ln_fuse;
  FeedForwardParams ff;   // present when fusion_ff_block
  LayerNormParams ln_ff;  // present when fusion_ff_block
};

struct DecoderParams {
  Tensor tgt_emb;  // [vocab, d_e] decoder-side target embedding
  Tensor pos_emb;  // [l_s, d_e] learned absolute positions
  std::vector<DecoderLayerParams> layers;
  bool ff_block = true;
};

DecoderParams make_decoder(ParamStore& ps, const std::string& prefix,
                           const RunConfig& cfg);

struct DecoderOutput {
  Tensor states;  // [T, d_e] last-layer vectors per target position
  Tensor attn_c;  // [T, l_c] last-layer head-averaged token-encoder attention
  Tensor attn_g;  // [T, l_g] last-layer head-averaged graph-encoder attention
};

// Teacher-forced pass over the BOS-prefixed target prefix (unpadded length T).
// Throws LengthError when T is 0 or exceeds l_s.
DecoderOutput decode_training(const DecoderParams& p, const std::vector<int>& targets,
                              const EncoderOutput& enc_c, const EncoderOutput& enc_g,
                              const RunConfig& cfg, const ForwardContext& ctx);

// One position through one layer: d_prev is the layer's input vector at the
// current position, d_hist the layer inputs at every position up to and
// including it (d_prev duplicated as the last row). Returns the layer output
// for the position plus its head-averaged cross-attention rows.
struct LayerStepResult {
  Tensor d_out;       // [d_e]
  Tensor attn_c_row;  // [l_c]
  Tensor attn_g_row;  // [l_g]
};
LayerStepResult decoder_layer_step(const DecoderParams& p, int layer_idx,
                                   const Tensor& d_prev, const Tensor& d_hist,
                                   const EncoderOutput& enc_c,
                                   const EncoderOutput& enc_g, const RunConfig& cfg,
                                   const ForwardContext& ctx);

}  // namespace gypsum
