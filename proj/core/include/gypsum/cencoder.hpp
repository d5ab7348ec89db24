#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gypsum/config.hpp"
#include "gypsum/nn.hpp"
#include "gypsum/tensor.hpp"

namespace gypsum {

// Transformer encoder over the sub-word token sequence, followed by a linear
// projection from d_model to the shared embedding width d_e.
struct CEncoderLayer {
  MhaParams self_attn;
  LayerNormParams ln_attn;
  FeedForwardParams ff;
  LayerNormParams ln_ff;
};

struct CEncoderParams {
  Tensor tok_emb;  // [vocab, d_model]; owned by the caller, shared with the
                   // graph encoder's node-text embedding
  Tensor pos_emb;  // [l_c, d_model] learned absolute positions
  std::vector<CEncoderLayer> layers;
  LinearParams w_c;  // [d_e, d_model] output projection, bias zero-initialized
};

// Registers every encoder parameter (except the shared token table, passed in)
// under `prefix` in creation order.
CEncoderParams make_cencoder(ParamStore& ps, const std::string& prefix,
                             const RunConfig& cfg, Tensor shared_tok_emb);

struct EncoderOutput {
  Tensor matrix;              // [l_c, d_e]; padded rows exactly zero
  std::vector<uint8_t> mask;  // length l_c, 1 = real token
};

// Encodes ids (already BOS/EOS-free raw code sub-words) padded to l_c.
// Trailing PAD ids in the input are stripped first, so appending padding never
// changes the result. Throws LengthError when the sequence is empty or the
// real-token count exceeds l_c.
EncoderOutput encode_tokens(const CEncoderParams& p, const std::vector<int>& token_ids,
                            const RunConfig& cfg, const ForwardContext& ctx);

// Loads externally pre-trained encoder weights from a parameter archive into
// the stack (token/position embeddings and per-layer weights). The output
// projection stays locally initialized. Expected archive keys:
//   embeddings.word [vocab, d_model], embeddings.position [l_c, d_model],
//   layer.<i>.attn.{wq,wk,wv,wo}, layer.<i>.ln_attn.{gamma,beta},
//   layer.<i>.ff.{w1,b1,w2,b2}, layer.<i>.ln_ff.{gamma,beta}
// Throws MissingFile when absent, ShapeMismatch on any key/shape disagreement.
void load_pretrained_adapter(CEncoderParams& p, const std::string& weights_path);

}  // namespace gypsum
